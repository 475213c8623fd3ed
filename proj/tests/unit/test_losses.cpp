#include "lgc/enumeration.hpp"
#include "lgc/errors.hpp"
#include "lgc/losses.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace lgc {
namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

std::vector<const DataPair*> view(const std::vector<DataPair>& pairs) {
  std::vector<const DataPair*> v;
  for (const auto& p : pairs) v.push_back(&p);
  return v;
}

// Deterministic distribution putting all mass on A (hard zeros and ones).
EdgeDistribution point_mass(const Matrix& a) {
  return EdgeDistribution(a, BoolMatrix::Constant(a.rows(), a.cols(), false));
}

LossConfig cfg_for(LossKind kind) {
  LossConfig cfg;
  cfg.kind = kind;
  cfg.n_adj = 8;
  cfg.kernel.sigma = 0.3;
  return cfg;
}

struct Problem {
  EdgeDistribution dist;
  PolyGnn model;
  std::vector<DataPair> pairs;
};

Problem random_setup(Rng& rng, std::size_t n = 4, std::size_t n_pairs = 6) {
  Matrix theta(n, n);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta.data()[i] = u(rng);
  Problem s{EdgeDistribution(theta), PolyGnn({random_matrix(1, 2, rng, 0.5), random_matrix(1, 2, rng, 0.5)}), {}};
  for (std::size_t p = 0; p < n_pairs; ++p)
    s.pairs.push_back({random_matrix(n, 2, rng), random_matrix(n, 1, rng, 0.3)});
  return s;
}

TEST(Mmd, DegenerateDistributionAtTargetGivesMinusOne) {
  Rng rng = make_rng(1);
  Matrix a = Matrix::Zero(3, 3);
  a(0, 1) = a(1, 2) = 1;
  const PolyGnn m({Matrix::Constant(1, 1, 0.7), Matrix::Constant(1, 1, -0.4)});
  const Matrix x = random_matrix(3, 1, rng);
  AdjacencySample adj = AdjacencySample::from_dense(a);
  const std::vector<DataPair> pairs{{x, forward(m, x, adj)}};
  LossConfig cfg = cfg_for(LossKind::dist_mmd);
  cfg.n_adj = 2;
  const auto est = mmd2_batch(point_mass(a), m, view(pairs), cfg, rng);
  EXPECT_NEAR(est.value, -1.0, 1e-12);
  EXPECT_EQ(est.grad_theta.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Crps, ZeroWhenAllOutputsHitTarget) {
  Rng rng = make_rng(2);
  Matrix a = Matrix::Zero(2, 2);
  a(0, 1) = 1;
  const PolyGnn m({Matrix::Constant(1, 1, 0.7)});
  const Matrix x = random_matrix(2, 1, rng);
  const std::vector<DataPair> pairs{{x, forward(m, x, AdjacencySample::from_dense(a))}};
  const auto est = crps_batch(point_mass(a), m, view(pairs), cfg_for(LossKind::dist_crps), rng);
  EXPECT_NEAR(est.value, 0.0, 1e-15);
}

TEST(Crps, TwoPointClosedFormValue) {
  // one edge with probability 1/2 switches the scalar output between 0 and
  // tanh(w x) = 1 up to rounding; the target sits at 0.
  Matrix t = Matrix::Zero(2, 2);
  t(0, 1) = 0.5;
  BoolMatrix mask = BoolMatrix::Constant(2, 2, false);
  const EdgeDistribution d(t, mask);
  const PolyGnn m({Matrix::Constant(1, 1, 40.0)});
  Matrix x = Matrix::Zero(2, 1);
  x(1, 0) = 1.0;
  const std::vector<DataPair> pairs{{x, Matrix::Zero(2, 1)}};
  LossConfig cfg = cfg_for(LossKind::dist_crps);
  cfg.n_adj = 32;
  Rng rng = make_rng(3);
  double sum = 0.0;
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) sum += crps_batch(d, m, view(pairs), cfg, rng, {false, false}).value;
  EXPECT_NEAR(sum / reps, 0.5, 0.005);
}

TEST(Crps, TranslationInvariantInOutputSpace) {
  // tanh outputs cannot be shifted freely, so the shift is applied to raw
  // sample sets
  Rng rng = make_rng(4);
  std::vector<Vector> p, q, ps, qs;
  Vector shift = Vector::Constant(3, 0.37);
  for (int i = 0; i < 6; ++i) {
    p.push_back(Vector::Random(3));
    q.push_back(Vector::Random(3));
    ps.push_back(p.back() + shift);
    qs.push_back(q.back() + shift);
  }
  const KernelSpec energy{KernelKind::energy, 1.0, 1.0};
  EXPECT_NEAR(mmd2_full_unbiased(energy, p, q), mmd2_full_unbiased(energy, ps, qs), 1e-12);
}

TEST(PointMse, ZeroWhenMeanHitsTarget) {
  Rng rng = make_rng(5);
  Matrix a = Matrix::Zero(2, 2);
  a(1, 0) = 1;
  const PolyGnn m({Matrix::Constant(1, 1, 0.7)});
  const Matrix x = random_matrix(2, 1, rng);
  const std::vector<DataPair> pairs{{x, forward(m, x, AdjacencySample::from_dense(a))}};
  const auto est = point_mse_batch(point_mass(a), m, view(pairs), cfg_for(LossKind::point_mse), rng);
  EXPECT_NEAR(est.value, 0.0, 1e-15);
  EXPECT_EQ(est.grad_theta.cwiseAbs().maxCoeff(), 0.0);
}

TEST(PointMse, DeterministicDistributionGivesPlainMse) {
  Rng rng = make_rng(6);
  Matrix a = Matrix::Zero(2, 2);
  a(1, 0) = 1;
  const PolyGnn m({Matrix::Constant(1, 1, 0.7)});
  const Matrix x = random_matrix(2, 1, rng);
  const Matrix y = random_matrix(2, 1, rng);
  const std::vector<DataPair> pairs{{x, y}};
  const auto est = point_mse_batch(point_mass(a), m, view(pairs), cfg_for(LossKind::point_mse), rng);
  const Matrix out = forward(m, x, AdjacencySample::from_dense(a));
  EXPECT_NEAR(est.value, (out - y).squaredNorm() / 2.0, 1e-12);
}

TEST(Lit1, ZeroWhenOutputsHitTarget) {
  Rng rng = make_rng(7);
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 1;
  const PolyGnn m({Matrix::Constant(1, 1, 0.7)});
  const Matrix x = random_matrix(2, 1, rng);
  const std::vector<DataPair> pairs{{x, forward(m, x, AdjacencySample::from_dense(a))}};
  for (auto metric : {PointMetric::mae, PointMetric::mse}) {
    LossConfig cfg = cfg_for(LossKind::lit1);
    cfg.inner_metric = metric;
    EXPECT_NEAR(lit1_batch(point_mass(a), m, view(pairs), cfg, rng).value, 0.0, 1e-15);
  }
}

TEST(Lit1, ModelIgnoringGraphHasZeroExpectedThetaGradient) {
  Matrix theta(2, 2);
  theta << 0.3, 0.6, 0.45, 0.8;
  const EdgeDistribution d(theta);
  const PolyGnn m({Matrix::Zero(1, 1)});  // output 0 for every A
  const std::vector<DataPair> pairs{{Matrix::Ones(2, 1), Matrix::Constant(2, 1, 0.4)}};
  for (auto metric : {PointMetric::mae, PointMetric::mse}) {
    LossConfig cfg = cfg_for(LossKind::lit1);
    cfg.inner_metric = metric;
    const auto exact = enumeration_oracle(d, m, pairs[0].x, pairs[0].y, cfg);
    EXPECT_LT(exact.grad_theta.cwiseAbs().maxCoeff(), 1e-12);
    Rng rng = make_rng(8);
    const auto est = lit1_batch(d, m, view(pairs), cfg, rng);
    // a constant loss is cancelled exactly by the leave-one-out baseline
    EXPECT_LT(est.grad_theta.cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Lit2, SingleNodeGraphMatchesLit1) {
  // With N = 1 the row score is the whole score; the per-node baseline is the
  // only difference, so both agree on the value for the same samples.
  const EdgeDistribution d(Matrix::Constant(1, 1, 0.4));
  const PolyGnn m({Matrix::Constant(1, 1, 0.9)});
  const std::vector<DataPair> pairs{{Matrix::Constant(1, 1, 0.8), Matrix::Constant(1, 1, 0.3)}};
  LossConfig cfg = cfg_for(LossKind::lit1);
  cfg.inner_metric = PointMetric::mse;
  LossConfig cfg2 = cfg;
  cfg2.kind = LossKind::lit2;
  Rng r1 = make_rng(9), r2 = make_rng(9);
  LossState st;
  EXPECT_DOUBLE_EQ(lit1_batch(d, m, view(pairs), cfg, r1).value,
                   lit2_batch(d, m, view(pairs), cfg2, st, r2).value);
  const auto e1 = enumeration_oracle(d, m, pairs[0].x, pairs[0].y, cfg);
  const auto e2 = enumeration_oracle(d, m, pairs[0].x, pairs[0].y, cfg2);
  EXPECT_NEAR(e1.grad_theta(0, 0), e2.grad_theta(0, 0), 1e-12);
}

TEST(Lit2, BaselinesConvergeToStationaryNodeLoss) {
  Rng rng = make_rng(10);
  Problem s = random_setup(rng, 3, 1);
  LossConfig cfg = cfg_for(LossKind::lit2);
  cfg.inner_metric = PointMetric::mse;
  cfg.baseline_momentum = 0.99;
  LossState st;
  for (int step = 0; step < 3000; ++step) lit2_batch(s.dist, s.model, view(s.pairs), cfg, st, rng);
  // exact per-node expected loss by enumeration of the 9-edge graph
  const OutcomeSet outs = enumerate_outputs(s.dist, s.model, s.pairs[0].x);
  Vector expected = Vector::Zero(3);
  for (std::size_t k = 0; k < outs.outputs.size(); ++k)
    for (int i = 0; i < 3; ++i)
      expected(i) += outs.prob[k] * std::pow(outs.outputs[k](i) - s.pairs[0].y(i), 2);
  for (int i = 0; i < 3; ++i)
    EXPECT_NEAR(st.node_baselines(i), expected(i), 0.05 * expected(i) + 1e-3) << i;
}

TEST(Elbo, ZeroResidualUnitSigmaNll) {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 1) = 1;
  const PolyGnn m({Matrix::Constant(1, 1, 0.7)});
  Rng rng = make_rng(11);
  const Matrix x = random_matrix(2, 1, rng);
  const std::vector<DataPair> pairs{{x, forward(m, x, AdjacencySample::from_dense(a))}};
  LossConfig cfg = cfg_for(LossKind::elbo);
  cfg.elbo_sigma = 1.0;
  const EdgeDistribution d(a, 1e-12);
  cfg.elbo_prior = d;
  const auto est = elbo_batch(d, m, view(pairs), cfg, rng);
  EXPECT_NEAR(est.aux.at("kl"), 0.0, 1e-12);
  EXPECT_NEAR(est.value, 2 * 0.5 * std::log(2 * M_PI), 1e-12);
  EXPECT_NEAR(0.5 * std::log(2 * M_PI), 0.918939, 1e-6);
}

TEST(Elbo, MissingPriorIsAConfigError) {
  Rng rng = make_rng(12);
  Problem s = random_setup(rng);
  LossConfig cfg = cfg_for(LossKind::elbo);
  EXPECT_THROW(elbo_batch(s.dist, s.model, view(s.pairs), cfg, rng), ConfigError);
}

TEST(Dispatch, WrongKindIsRejected) {
  Rng rng = make_rng(13);
  Problem s = random_setup(rng);
  EXPECT_THROW(mmd2_batch(s.dist, s.model, view(s.pairs), cfg_for(LossKind::point_mse), rng),
               ConfigMismatch);
  EXPECT_THROW(crps_batch(s.dist, s.model, view(s.pairs), cfg_for(LossKind::dist_mmd), rng),
               ConfigMismatch);
  EXPECT_THROW(lit1_batch(s.dist, s.model, view(s.pairs), cfg_for(LossKind::elbo), rng),
               ConfigMismatch);
}

TEST(ControlVariates, LeaveValueUnchangedForTheSameStream) {
  Rng gen = make_rng(14);
  Problem s = random_setup(gen);
  s.dist.freeze(0, 0, 0.0);
  for (auto kind : {LossKind::dist_mmd, LossKind::dist_crps, LossKind::point_mse, LossKind::lit1,
                    LossKind::lit2, LossKind::elbo}) {
    LossConfig on = cfg_for(kind), off = cfg_for(kind);
    on.elbo_prior = off.elbo_prior = EdgeDistribution::constant(4, 0.3);
    off.control_variates = false;
    Rng r1 = make_rng(15), r2 = make_rng(15);
    LossState s1, s2;
    const auto a = estimate_loss(s.dist, s.model, view(s.pairs), on, s1, r1);
    const auto b = estimate_loss(s.dist, s.model, view(s.pairs), off, s2, r2);
    EXPECT_EQ(a.value, b.value) << to_string(kind);
    for (std::size_t l = 0; l < a.grad_psi.size(); ++l) EXPECT_EQ(a.grad_psi[l], b.grad_psi[l]);
  }
}

TEST(ControlVariates, BetasAreBatchMeansOfTheComputedKernels) {
  Rng gen = make_rng(16);
  Problem s = random_setup(gen, 3, 4);
  LossConfig cfg = cfg_for(LossKind::dist_mmd);
  cfg.n_adj = 5;
  Rng rng = make_rng(17), replay = make_rng(17);
  const auto est = mmd2_batch(s.dist, s.model, view(s.pairs), cfg, rng);
  // replay the same adjacency stream and recompute every kernel value
  EdgeSampler sampler(s.dist);
  double pair_sum = 0.0, cross_sum = 0.0;
  for (const auto& p : s.pairs) {
    std::vector<Vector> outs;
    for (std::size_t k = 0; k < cfg.n_adj; ++k) {
      const Matrix y = forward(s.model, p.x, sampler.sample(replay));
      outs.push_back(Eigen::Map<const Vector>(y.data(), y.size()));
    }
    const Eigen::Map<const Vector> target(p.y.data(), p.y.size());
    for (std::size_t i = 0; i < outs.size(); ++i) {
      cross_sum += kernels::eval(cfg.kernel, {outs[i].data(), 3}, {target.data(), 3});
      for (std::size_t j = 0; j < i; ++j)
        pair_sum += kernels::eval(cfg.kernel, {outs[i].data(), 3}, {outs[j].data(), 3});
    }
  }
  EXPECT_NEAR(est.aux.at("beta1"), pair_sum / (4 * 5 * 4 / 2.0), 1e-12);
  EXPECT_NEAR(est.aux.at("beta2"), cross_sum / (4 * 5), 1e-12);
}

TEST(VarianceProfile, DeterministicDistributionHasNoVariance) {
  Rng gen = make_rng(18);
  Problem s = random_setup(gen);
  Matrix t = Matrix::Zero(4, 4);
  t(0, 1) = t(2, 3) = 1.0;
  // trainable entries clamped to the extremes; a tiny epsilon keeps flips,
  // each carrying a 1/epsilon score, out of the draws
  const EdgeDistribution d(t, 1e-12);
  Rng rng = make_rng(19);
  const auto prof = estimator_variance_profile(cfg_for(LossKind::dist_mmd), d, s.model,
                                               view(s.pairs), 50, rng);
  EXPECT_EQ(prof.resamples, 50u);
  EXPECT_LT(prof.mean_variance, 1e-3);
}

TEST(VarianceProfile, ShrinksWithMoreAdjacencySamples) {
  double v8 = 0.0, v32 = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng gen = make_rng(20, seed);
    Problem s = random_setup(gen, 4, 4);
    LossConfig cfg = cfg_for(LossKind::dist_mmd);
    cfg.n_adj = 8;
    Rng r1 = make_rng(21, seed), r2 = make_rng(22, seed);
    v8 += estimator_variance_profile(cfg, s.dist, s.model, view(s.pairs), 100, r1).mean_variance;
    cfg.n_adj = 32;
    v32 += estimator_variance_profile(cfg, s.dist, s.model, view(s.pairs), 100, r2).mean_variance;
  }
  EXPECT_LT(v32, v8);
}

TEST(VarianceProfile, RequiresTwoResamples) {
  Rng gen = make_rng(23);
  Problem s = random_setup(gen);
  EXPECT_THROW(estimator_variance_profile(cfg_for(LossKind::dist_mmd), s.dist, s.model,
                                          view(s.pairs), 1, gen),
               InsufficientSamples);
}

TEST(FullMmd, NonNegativeWhenModelEqualsTarget) {
  // model and target are the same edge distribution and predictor; the
  // unbiased estimator averaged over inputs is within two standard errors
  // of zero or above
  Rng rng = make_rng(24);
  Problem s = random_setup(rng, 3, 1);
  const KernelSpec k{KernelKind::rational_quadratic, 0.3, 0.5};
  EdgeSampler sampler(s.dist);
  std::vector<double> vals;
  for (int rep = 0; rep < 400; ++rep) {
    const Matrix x = random_matrix(3, 2, rng);
    std::vector<Vector> p, q;
    for (int i = 0; i < 8; ++i) {
      const Matrix a = forward(s.model, x, sampler.sample(rng));
      const Matrix b = forward(s.model, x, sampler.sample(rng));
      p.push_back(Eigen::Map<const Vector>(a.data(), a.size()));
      q.push_back(Eigen::Map<const Vector>(b.data(), b.size()));
    }
    vals.push_back(mmd2_full_unbiased(k, p, q));
  }
  double mean = 0.0, sq = 0.0;
  for (double v : vals) mean += v;
  mean /= vals.size();
  for (double v : vals) sq += (v - mean) * (v - mean);
  const double se = std::sqrt(sq / (vals.size() - 1) / vals.size());
  EXPECT_GE(mean, -2 * se);
}

}  // namespace
}  // namespace lgc
