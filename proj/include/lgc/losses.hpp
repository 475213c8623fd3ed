#pragma once

// Mini-batch estimators of the training objectives. Every estimator returns
// the loss value, a score-function gradient for theta and a pathwise gradient
// for psi.

#include "lgc/edge_dist.hpp"
#include "lgc/kernels.hpp"
#include "lgc/poly_gnn.hpp"
#include "lgc/types.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lgc {

enum class LossKind { dist_mmd, dist_crps, point_mse, lit1, lit2, elbo };
enum class PointMetric { mae, mse };

std::string to_string(LossKind kind);
std::string to_string(PointMetric metric);
LossKind loss_kind_from_string(const std::string& name);
PointMetric point_metric_from_string(const std::string& name);

struct DataPair {
  Matrix x;  // N x d_in
  Matrix y;  // N x d_out
};

using Batch = std::span<const DataPair* const>;

struct LossConfig {
  LossKind kind = LossKind::dist_mmd;
  PointMetric inner_metric = PointMetric::mse;
  std::size_t n_adj = 16;
  bool control_variates = true;
  KernelSpec kernel{};
  double elbo_sigma = 0.1;
  std::optional<EdgeDistribution> elbo_prior;
  double baseline_momentum = 0.99;

  void validate() const;
};

struct LossEstimate {
  double value = 0.0;
  Matrix grad_theta;
  std::vector<Matrix> grad_psi;
  std::map<std::string, double> aux;
};

/// Mutable estimator state carried across mini-batches (node baselines of
/// the node-level literature loss).
struct LossState {
  Vector node_baselines;
};

struct EstimateOptions {
  bool grad_theta = true;
  bool grad_psi = true;
};

LossEstimate mmd2_batch(const EdgeDistribution& dist, const PolyGnn& model, Batch batch,
                        const LossConfig& cfg, Rng& rng, EstimateOptions opts = {});
LossEstimate crps_batch(const EdgeDistribution& dist, const PolyGnn& model, Batch batch,
                        const LossConfig& cfg, Rng& rng, EstimateOptions opts = {});
LossEstimate point_mse_batch(const EdgeDistribution& dist, const PolyGnn& model, Batch batch,
                             const LossConfig& cfg, Rng& rng, EstimateOptions opts = {});
LossEstimate lit1_batch(const EdgeDistribution& dist, const PolyGnn& model, Batch batch,
                        const LossConfig& cfg, Rng& rng, EstimateOptions opts = {});
LossEstimate lit2_batch(const EdgeDistribution& dist, const PolyGnn& model, Batch batch,
                        const LossConfig& cfg, LossState& state, Rng& rng,
                        EstimateOptions opts = {});
LossEstimate elbo_batch(const EdgeDistribution& dist, const PolyGnn& model, Batch batch,
                        const LossConfig& cfg, Rng& rng, EstimateOptions opts = {});

/// Dispatches on cfg.kind.
LossEstimate estimate_loss(const EdgeDistribution& dist, const PolyGnn& model, Batch batch,
                           const LossConfig& cfg, LossState& state, Rng& rng,
                           EstimateOptions opts = {});

struct VarianceProfile {
  Matrix variance;       // per-entry sample variance of grad_theta
  double mean_variance;  // mean over trainable entries
  std::size_t resamples;
};

/// Re-estimates grad_theta `resamples` times on a fixed batch with fresh
/// adjacency draws. `state` is copied, never advanced.
VarianceProfile estimator_variance_profile(const LossConfig& cfg, const EdgeDistribution& dist,
                                           const PolyGnn& model, Batch batch,
                                           std::size_t resamples, Rng& rng,
                                           const LossState& state = {});

/// Unbiased three-term MMD^2 between two sample sets (rows are flattened
/// outputs). Training never uses this; it needs several targets per input.
double mmd2_full_unbiased(const KernelSpec& k, const std::vector<Vector>& model_samples,
                          const std::vector<Vector>& target_samples);

}  // namespace lgc
