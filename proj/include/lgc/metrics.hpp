#pragma once

#include "lgc/edge_dist.hpp"
#include "lgc/kernels.hpp"
#include "lgc/losses.hpp"
#include "lgc/poly_gnn.hpp"

#include <cstddef>

namespace lgc {

struct CalibrationMetrics {
  double mae = 0.0;     // N^-2 ||theta* - theta||_1
  double max_ae = 0.0;  // max |theta*_ij - theta_ij|
};

CalibrationMetrics calibration_metrics(const Matrix& theta_learned, const Matrix& theta_star);

struct PointMetrics {
  double mse_y = 0.0;       // T = Monte-Carlo mean
  double mae_y = 0.0;       // T = per-entry Monte-Carlo median
  double mae_y_mean = 0.0;  // T = Monte-Carlo mean, scored with MAE
};

/// Per pair, estimates T from n_eval_adj adjacency draws and averages the
/// per-entry errors over the split.
PointMetrics point_metrics(const EdgeDistribution& dist, const PolyGnn& model, Batch split,
                           std::size_t n_eval_adj, Rng& rng);

/// Two-term MMD^2 estimate averaged over a split (no gradients).
double distributional_loss(const EdgeDistribution& dist, const PolyGnn& model, Batch split,
                           const KernelSpec& kernel, std::size_t n_adj, Rng& rng);

}  // namespace lgc
