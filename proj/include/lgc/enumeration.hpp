#pragma once
// Exact population losses for tiny graphs, by summing over every adjacency
// outcome. Ground truth for the unbiasedness tests of the estimators.
#include "lgc/edge_dist.hpp"
#include "lgc/kernels.hpp"
#include "lgc/losses.hpp"
#include "lgc/poly_gnn.hpp"
#include <cstddef>
#include <vector>

namespace lgc {

inline constexpr std::size_t kMaxEnumeratedEdges = 12;

struct OracleResult {
  double value = 0.0;
  Matrix grad_theta;
  // point_mse only: per-entry output variance. The N_adj-sample estimator of
  // the value has expectation value + variance_term / N_adj.
  double variance_term = 0.0;
};

/// Exact population loss for one data pair and its exact theta gradient.
/// For lit2 the gradient is the expected update direction of the row-wise
/// estimator (node loss times the score of its own row only).
/// Throws TooManyEdges when more than 12 entries are random.
OracleResult enumeration_oracle(const EdgeDistribution& dist, const PolyGnn& model,
                                const Matrix& x, const Matrix& y, const LossConfig& cfg);

/// Finite distribution over flattened outputs.
struct OutcomeSet {
  std::vector<Vector> outputs;
  std::vector<double> prob;
};

OutcomeSet enumerate_outputs(const EdgeDistribution& dist, const PolyGnn& model,
                             const Matrix& x);

/// E_{y ~ target} l(y, T[model]) per output entry, with T the mean for mse and
/// the per-entry median for mae.
double population_point_loss(const OutcomeSet& model_out, const OutcomeSet& target,
                             PointMetric metric);

/// Three-term MMD^2 between two finite distributions.
double population_mmd2(const OutcomeSet& p, const OutcomeSet& q, const KernelSpec& kernel);

}  // namespace lgc
