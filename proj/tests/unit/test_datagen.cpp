#include "lgc/datagen.hpp"
#include "lgc/errors.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>

namespace lgc {
namespace {

namespace fs = std::filesystem;

TEST(Template, DefaultBenchmarkHasEighteenEdges) {
  const GroundTruth gt = build_ground_truth({});
  EXPECT_EQ(gt.node_count(), 12u);
  const auto edges = canonical_template_edges(3, 4);
  EXPECT_EQ(edges.size(), 18u);
  std::size_t on = 0;
  for (Eigen::Index i = 0; i < 12; ++i)
    for (Eigen::Index j = 0; j < 12; ++j) {
      const double t = gt.dist_star.theta()(i, j);
      EXPECT_TRUE(t == 0.0 || t == 0.75);
      on += t == 0.75;
    }
  EXPECT_EQ(on, 18u);
  for (Eigen::Index i = 0; i < 12; ++i) EXPECT_EQ(gt.dist_star.theta()(i, i), 0.0);
}

TEST(Template, ThreeOfFiveIntraEdgesTouchLocalNodesTwoAndThree) {
  int touching = 0;
  for (auto [from, to] : canonical_template_edges(1, 4)) touching += from >= 2 || to >= 2;
  EXPECT_EQ(touching, 3);
}

TEST(Template, LargeBenchmarkSize) {
  GroundTruthParams p;
  p.n_communities = 30;
  const GroundTruth gt = build_ground_truth(p);
  EXPECT_EQ(gt.node_count(), 120u);
  EXPECT_EQ(canonical_template_edges(30, 4).size(), 180u);
}

TEST(Template, RejectsInvalidParameters) {
  GroundTruthParams p;
  p.community_size = 5;
  EXPECT_THROW(build_ground_truth(p), InvalidShape);
  p = {};
  p.theta_on = 0.0;
  EXPECT_THROW(build_ground_truth(p), InvalidShape);
}

TEST(Generate, FeatureScaleOutputRangeAndSplits) {
  const Dataset d = generate(build_ground_truth({}), 35000, 42);
  double sum = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (const auto& p : d.pairs) {
    for (Eigen::Index i = 0; i < p.x.size(); ++i) {
      sum += p.x.data()[i];
      sq += p.x.data()[i] * p.x.data()[i];
      ++count;
    }
    EXPECT_LT(p.y.cwiseAbs().maxCoeff(), 1.0);
  }
  const double m = sum / count;
  EXPECT_NEAR(std::sqrt(sq / count - m * m), 1.5, 0.01);

  std::vector<std::size_t> all;
  for (const auto* split : {&d.train, &d.validation, &d.test}) all.insert(all.end(), split->begin(), split->end());
  std::sort(all.begin(), all.end());
  ASSERT_EQ(all.size(), d.pairs.size());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
  EXPECT_EQ(d.train.size(), 28000u);
  EXPECT_EQ(d.validation.size(), 3500u);
}

TEST(Generate, EmptyGraphGivesZeroOutputs) {
  GroundTruth gt = build_ground_truth({});
  gt.dist_star = EdgeDistribution(Matrix::Zero(12, 12), BoolMatrix::Constant(12, 12, false));
  for (const auto& p : generate(gt, 200, 1).pairs) EXPECT_EQ(p.y, Matrix::Zero(12, 1));
}

TEST(Generate, SeedReproducesAndManifestRegenerates) {
  const GroundTruth gt = build_ground_truth({});
  const Dataset a = generate(gt, 500, 9), b = generate(gt, 500, 9), c = generate(gt, 500, 10);
  const Dataset r = regenerate(a.manifest);
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    EXPECT_EQ(a.pairs[i].x, b.pairs[i].x);
    EXPECT_EQ(a.pairs[i].y, b.pairs[i].y);
    EXPECT_EQ(a.pairs[i].x, r.pairs[i].x);
    EXPECT_EQ(a.pairs[i].y, r.pairs[i].y);
  }
  EXPECT_NE(a.pairs[0].x, c.pairs[0].x);
}

TEST(Generate, SaveAndLoadRoundTripExactly) {
  const Dataset a = generate(build_ground_truth({}), 300, 5);
  const fs::path dir = fs::temp_directory_path() / "lgc_test_dataset";
  fs::remove_all(dir);
  save_dataset(a, dir);
  const Dataset b = load_dataset(dir);
  ASSERT_EQ(b.pairs.size(), a.pairs.size());
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    EXPECT_EQ(a.pairs[i].x, b.pairs[i].x);
    EXPECT_EQ(a.pairs[i].y, b.pairs[i].y);
  }
  EXPECT_EQ(b.test, a.test);
  EXPECT_EQ(b.ground_truth.dist_star.theta(), a.ground_truth.dist_star.theta());
  fs::remove_all(dir);
  EXPECT_THROW(load_dataset(dir), IoError);
}

TEST(Generate, OutputDistributionMatchesEnumerationForFixedInput) {
  // one community with theta_on 0.75: 5 random edges, 32 outcomes; check the
  // empirical y distribution for a fixed x against exact outcome weights
  GroundTruthParams p;
  p.n_communities = 1;
  const GroundTruth gt = build_ground_truth(p);
  const auto edges = canonical_template_edges(1, 4);
  Rng rng = make_rng(3);
  std::normal_distribution<double> n(0.0, 1.5);
  Matrix x(4, gt.model_star.d_in());
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  std::map<std::vector<double>, double> exact;
  for (unsigned b = 0; b < 32; ++b) {
    AdjacencySample a(4);
    int on = 0;
    for (std::size_t e = 0; e < 5; ++e)
      if ((b >> e) & 1U) {
        a.set(edges[e].first, edges[e].second);
        ++on;
      }
    const Matrix y = forward(gt.model_star, x, a);
    exact[{y.data(), y.data() + y.size()}] += std::pow(0.75, on) * std::pow(0.25, 5 - on);
  }
  std::map<std::vector<double>, double> counts;
  const int draws = 100000;
  for (int k = 0; k < draws; ++k) {
    const Matrix y = forward(gt.model_star, x, sample(gt.dist_star, rng));
    counts[{y.data(), y.data() + y.size()}] += 1;
  }
  for (const auto& [y, c] : counts) ASSERT_TRUE(exact.count(y));
  for (const auto& [y, pr] : exact) {
    const double se = std::sqrt(pr * (1 - pr) / draws);
    EXPECT_NEAR(counts[y] / draws, pr, 3 * se + 1e-12);
  }
}

TEST(Oracle, DeterministicGroundTruthHasZeroError) {
  GroundTruthParams p;
  p.theta_on = 1.0;
  const GroundTruth gt = build_ground_truth(p);
  OracleOptions o;
  o.n_inputs = 200;
  o.n_adj = 16;
  EXPECT_NEAR(optimal_error_oracle(gt, PointMetric::mse, o), 0.0, 1e-20);
  EXPECT_EQ(optimal_error_oracle(gt, PointMetric::mae, o), 0.0);
}

TEST(Oracle, StableAcrossSeeds) {
  const GroundTruth gt = build_ground_truth({});
  OracleOptions o;
  o.n_inputs = 10000;
  o.n_adj = 256;
  std::array<double, 2> mse{}, mae{};
  for (std::uint64_t s = 0; s < 2; ++s) {
    o.seed = 100 + s;
    mse[s] = optimal_error_oracle(gt, PointMetric::mse, o);
    mae[s] = optimal_error_oracle(gt, PointMetric::mae, o);
    EXPECT_GT(mae[s], 0.0);
  }
  EXPECT_NEAR(mse[0], mse[1], 0.002);
  EXPECT_NEAR(mae[0], mae[1], 0.002);
}

}  // namespace
}  // namespace lgc
