#include "lgc/metrics.hpp"

#include "lgc/errors.hpp"

#include <algorithm>
#include <cmath>

namespace lgc {

CalibrationMetrics calibration_metrics(const Matrix& theta_learned, const Matrix& theta_star) {
  if (theta_learned.rows() != theta_star.rows() || theta_learned.cols() != theta_star.cols())
    throw ShapeMismatch("calibration metrics on matrices of different shape");
  const auto abs_err = (theta_star - theta_learned).array().abs();
  return {abs_err.sum() / static_cast<double>(theta_star.size()), abs_err.maxCoeff()};
}

PointMetrics point_metrics(const EdgeDistribution& dist, const PolyGnn& model, Batch split,
                           std::size_t n_eval_adj, Rng& rng) {
  if (n_eval_adj < 2) throw InsufficientSamples("point metrics need n_eval_adj >= 2");
  if (split.empty()) return {};
  const EdgeSampler sampler(dist);
  std::vector<BinaryMatrix> hops(model.hops());
  AdjacencySample a(dist.size());
  Matrix y;
  const std::size_t m = n_eval_adj;
  const auto len = static_cast<std::size_t>(split.front()->y.size());
  std::vector<double> samples(len * m);
  std::vector<double> column(m);

  double mse = 0.0;
  double mae = 0.0;
  double mae_mean = 0.0;
  for (const DataPair* pair : split) {
    const ProjectedInputs proj = project_inputs(model, pair->x);
    for (std::size_t k = 0; k < m; ++k) {
      sampler.sample(rng, a);
      hop_matrices_into(a, hops);
      forward_projected(proj, hops, y);
      for (std::size_t e = 0; e < len; ++e) samples[e * m + k] = y.data()[e];
    }
    double pair_mse = 0.0;
    double pair_mae = 0.0;
    double pair_mae_mean = 0.0;
    for (std::size_t e = 0; e < len; ++e) {
      const double* s = samples.data() + e * m;
      double mean = 0.0;
      for (std::size_t k = 0; k < m; ++k) mean += s[k];
      mean /= static_cast<double>(m);
      std::copy(s, s + m, column.begin());
      const double median = median_of(column);
      const double target = pair->y.data()[e];
      pair_mse += (target - mean) * (target - mean);
      pair_mae += std::abs(target - median);
      pair_mae_mean += std::abs(target - mean);
    }
    mse += pair_mse / static_cast<double>(len);
    mae += pair_mae / static_cast<double>(len);
    mae_mean += pair_mae_mean / static_cast<double>(len);
  }
  const auto count = static_cast<double>(split.size());
  return {mse / count, mae / count, mae_mean / count};
}

double distributional_loss(const EdgeDistribution& dist, const PolyGnn& model, Batch split,
                           const KernelSpec& kernel, std::size_t n_adj, Rng& rng) {
  if (split.empty()) return 0.0;
  LossConfig cfg;
  cfg.kind = kernel.kind == KernelKind::energy ? LossKind::dist_crps : LossKind::dist_mmd;
  cfg.kernel = kernel;
  cfg.n_adj = n_adj;
  EstimateOptions opts;
  opts.grad_psi = false;
  opts.grad_theta = false;
  LossState state;
  constexpr std::size_t kChunk = 256;
  double total = 0.0;
  for (std::size_t start = 0; start < split.size(); start += kChunk) {
    const auto chunk = split.subspan(start, std::min(kChunk, split.size() - start));
    total += estimate_loss(dist, model, chunk, cfg, state, rng, opts).value *
             static_cast<double>(chunk.size());
  }
  return total / static_cast<double>(split.size());
}

}  // namespace lgc
