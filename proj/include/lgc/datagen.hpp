#pragma once

// Synthetic benchmark: community-structured edge probabilities, the
// ground-truth predictor and seeded dataset materialisation.

#include "lgc/edge_dist.hpp"
#include "lgc/losses.hpp"
#include "lgc/poly_gnn.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace lgc {

struct GroundTruthParams {
  std::size_t n_communities = 3;
  std::size_t community_size = 4;
  double theta_on = 0.75;
  double sigma_x = 1.5;
  std::vector<Matrix> psi_layers = default_psi_layers();

  static std::vector<Matrix> default_psi_layers();
};

struct GroundTruth {
  GroundTruthParams params;
  EdgeDistribution dist_star;
  PolyGnn model_star;

  std::size_t node_count() const { return dist_star.size(); }
};

using Edge = std::pair<std::size_t, std::size_t>;

/// Directed template edges: inside each community of four local nodes
/// {0->1, 1->0, 0->2, 2->3, 3->1}, plus local node 3 of community c to local
/// node 0 of community (c + 1) mod C when C > 1.
std::vector<Edge> canonical_template_edges(std::size_t n_communities, std::size_t community_size);

GroundTruth build_ground_truth(const GroundTruthParams& params);

struct DatasetManifest {
  std::uint64_t seed = 0;
  std::size_t n_pairs = 0;
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
  std::size_t n_test = 0;
  GroundTruthParams ground_truth;
};

struct Dataset {
  DatasetManifest manifest;
  GroundTruth ground_truth;
  std::vector<DataPair> pairs;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;

  std::vector<const DataPair*> split_view(const std::vector<std::size_t>& indices) const;
};

/// x ~ N(0, sigma_x^2 I), A ~ theta*, y = f_psi*(x, A); 80/10/10 contiguous
/// split. Sequential in one RNG stream, so a seed reproduces the pairs
/// bit-exactly.
Dataset generate(const GroundTruth& gt, std::size_t n_pairs, std::uint64_t seed);
Dataset regenerate(const DatasetManifest& manifest);

struct OracleOptions {
  std::size_t n_inputs = 100000;
  std::size_t n_adj = 256;
  std::uint64_t seed = 7;
};

/// Irreducible per-entry point-prediction error of the ground truth: the
/// variance around the conditional mean (mse) or the mean absolute deviation
/// around the per-entry conditional median (mae). For mae the median is the
/// n_adj-sample Monte-Carlo median, scored against independent draws.
double optimal_error_oracle(const GroundTruth& gt, PointMetric metric,
                            const OracleOptions& opts = {});

void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

void to_json(nlohmann::json& j, const GroundTruthParams& p);
void from_json(const nlohmann::json& j, GroundTruthParams& p);
void to_json(nlohmann::json& j, const DatasetManifest& m);
void from_json(const nlohmann::json& j, DatasetManifest& m);

}  // namespace lgc
