// Finite-difference checks of psi gradients (adjacency draws replayed) and
// of the theta score.
#include "checks.hpp"

#include "lgc/edge_dist.hpp"

#include <gtest/gtest.h>

#include <random>

namespace lgc {
namespace {

struct Kind {
  LossKind kind;
  PointMetric metric;
};

class PsiGradient : public testing::TestWithParam<Kind> {};

TEST_P(PsiGradient, MatchesCentralDifferencesOnFiftyInstances) {
  const Kind k = GetParam();
  const auto r = checks::psi_gradient_fd(k.kind, k.metric, 50, 11);
  EXPECT_LT(r.max_rel_err, 1e-4);
  EXPECT_GT(r.checked, 100u);
  EXPECT_LT(r.skipped, r.checked / 10);
}

INSTANTIATE_TEST_SUITE_P(AllLosses, PsiGradient,
                         testing::Values(Kind{LossKind::dist_mmd, PointMetric::mse},
                                         Kind{LossKind::dist_crps, PointMetric::mse},
                                         Kind{LossKind::point_mse, PointMetric::mse},
                                         Kind{LossKind::lit1, PointMetric::mae},
                                         Kind{LossKind::lit1, PointMetric::mse},
                                         Kind{LossKind::lit2, PointMetric::mae},
                                         Kind{LossKind::lit2, PointMetric::mse},
                                         Kind{LossKind::elbo, PointMetric::mse}),
                         [](const testing::TestParamInfo<Kind>& info) {
                           std::string s = to_string(info.param.kind);
                           if (info.param.kind == LossKind::lit1 || info.param.kind == LossKind::lit2)
                             s += "_" + to_string(info.param.metric);
                           return s;
                         });

TEST(ScoreGradient, MatchesFiniteDifferencesOfLogLikelihood) {
  const auto r = checks::score_gradient_fd(50, 3);
  EXPECT_LT(r.max_rel_err, 1e-5);
  EXPECT_GT(r.checked, 500u);
}

TEST(ScoreGradient, KlGradientMatchesFiniteDifferences) {
  Rng gen = make_rng(4);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Matrix theta(3, 3), prior(3, 3);
  for (Eigen::Index i = 0; i < 9; ++i) {
    theta.data()[i] = u(gen);
    prior.data()[i] = u(gen);
  }
  const EdgeDistribution p(prior);
  const Matrix g = kl_gradient(EdgeDistribution(theta), p);
  for (Eigen::Index i = 0; i < 9; ++i) {
    Matrix tp = theta, tm = theta;
    tp.data()[i] += 1e-6;
    tm.data()[i] -= 1e-6;
    const double fd = (kl_to(EdgeDistribution(tp), p) - kl_to(EdgeDistribution(tm), p)) / 2e-6;
    EXPECT_NEAR(g.data()[i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

}  // namespace
}  // namespace lgc
