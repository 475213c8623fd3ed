#include "lgc/losses.hpp"

#include "lgc/errors.hpp"

#include <cmath>
#include <numbers>

namespace lgc {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::dist_mmd: return "dist_mmd";
    case LossKind::dist_crps: return "dist_crps";
    case LossKind::point_mse: return "point_mse";
    case LossKind::lit1: return "lit1";
    case LossKind::lit2: return "lit2";
    case LossKind::elbo: return "elbo";
  }
  return "unknown";
}

std::string to_string(PointMetric metric) { return metric == PointMetric::mae ? "mae" : "mse"; }

LossKind loss_kind_from_string(const std::string& name) {
  for (auto k : {LossKind::dist_mmd, LossKind::dist_crps, LossKind::point_mse, LossKind::lit1,
                 LossKind::lit2, LossKind::elbo})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown loss kind '" + name + "'");
}

PointMetric point_metric_from_string(const std::string& name) {
  if (name == "mae") return PointMetric::mae;
  if (name == "mse") return PointMetric::mse;
  throw ConfigError("unknown point metric '" + name + "'");
}

void LossConfig::validate() const {
  const bool distributional = kind == LossKind::dist_mmd || kind == LossKind::dist_crps;
  if (distributional || kind == LossKind::point_mse) {
    if (n_adj < 2) throw ConfigError(to_string(kind) + " needs n_adj >= 2");
  } else if (n_adj < 1) {
    throw ConfigError("n_adj must be at least 1");
  }
  if (kind == LossKind::dist_mmd) kernel.validate();
  if (kind == LossKind::elbo) {
    if (!(elbo_sigma > 0.0)) throw ConfigError("elbo_sigma must be positive");
    if (!elbo_prior) throw ConfigError("elbo loss needs a prior distribution");
  }
  if (!(baseline_momentum >= 0.0 && baseline_momentum < 1.0))
    throw ConfigError("baseline_momentum must lie in [0, 1)");
}

namespace {

// Per-call scratch buffers reused across the pairs of one batch.
struct Workspace {
  Workspace(const PolyGnn& model, std::size_t n, std::size_t k)
      : adj(k, AdjacencySample(n)),
        hops(k, std::vector<BinaryMatrix>(model.hops())),
        yhat(k),
        dy(k, Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(model.d_out()))),
        acc(model.hops(),
            Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(model.d_out()))) {}

  std::vector<AdjacencySample> adj;
  std::vector<std::vector<BinaryMatrix>> hops;
  std::vector<Matrix> yhat;
  std::vector<Matrix> dy;
  std::vector<Matrix> acc;
};

void check_inputs(const EdgeDistribution& dist, const PolyGnn& model, Batch batch,
                  const LossConfig& cfg) {
  cfg.validate();
  if (batch.empty()) throw ConfigError("empty mini-batch");
  const auto n = static_cast<Eigen::Index>(dist.size());
  for (const DataPair* p : batch) {
    if (p->x.rows() != n || p->y.rows() != n)
      throw ShapeMismatch("data pair node count differs from the edge distribution");
    if (static_cast<std::size_t>(p->x.cols()) != model.d_in() ||
        static_cast<std::size_t>(p->y.cols()) != model.d_out())
      throw ShapeMismatch("data pair feature widths differ from the model");
  }
}

void require_kind(const LossConfig& cfg, LossKind expected) {
  if (cfg.kind != expected)
    throw ConfigMismatch("estimator for " + to_string(expected) + " called with loss kind " +
                         to_string(cfg.kind));
}

void draw_outputs(const EdgeSampler& sampler, const PolyGnn& model, const Matrix& x, Rng& rng,
                  Workspace& ws) {
  const ProjectedInputs proj = project_inputs(model, x);
  for (std::size_t k = 0; k < ws.adj.size(); ++k) {
    sampler.sample(rng, ws.adj[k]);
    hop_matrices_into(ws.adj[k], ws.hops[k]);
    forward_projected(proj, ws.hops[k], ws.yhat[k]);
  }
}

void backprop_pair(Workspace& ws, const Matrix& x, std::vector<Matrix>& grad_psi) {
  for (auto& a : ws.acc) a.setZero();
  for (std::size_t k = 0; k < ws.adj.size(); ++k)
    accumulate_backward(ws.hops[k], ws.yhat[k], ws.dy[k], ws.acc);
  finish_backward(ws.acc, x, grad_psi);
}

std::vector<Matrix> zero_psi_grads(const PolyGnn& model) {
  return std::vector<Matrix>(model.hops(), Matrix::Zero(model.layer(0).rows(), model.layer(0).cols()));
}

// Leave-one-out batch baseline for a linear score estimator. A sample with
// statistic v gets weight scale * (v - (S - v) / (M - 1)) where S sums the
// statistic over all M samples of the batch. Written as
// scale * v * (1 + 1/(M-1)) + gamma with gamma = -scale * S / (M - 1), so the
// per-sample part is known immediately and gamma is applied once per batch.
// `multiplicity` is how many baseline copies a sample's statistic carries
// (K-1 for the pairwise MMD term, whose row sum spans K-1 kernels).
struct LooBaseline {
  LooBaseline(bool enabled, double others, double multiplicity = 1.0)
      : active(enabled && others > 0.0), others(others), multiplicity(multiplicity) {}
  double self_factor() const { return active ? 1.0 + multiplicity / others : 1.0; }
  double shift(double total) const { return active ? -multiplicity * total / others : 0.0; }
  bool active;
  double others;
  double multiplicity;
};

LossEstimate distributional(const KernelSpec& kernel, const EdgeDistribution& dist,
                            const PolyGnn& model, Batch batch, const LossConfig& cfg, Rng& rng,
                            EstimateOptions opts) {
  const std::size_t n = dist.size();
  const std::size_t K = cfg.n_adj;
  const double B = static_cast<double>(batch.size());
  const double Kd = static_cast<double>(K);
  const double c_pair = 2.0 / (Kd * (Kd - 1.0));
  const double c_cross = 2.0 / Kd;
  const std::size_t len = n * model.d_out();

  // Leave-one-out baselines: beta_1 for sample i excludes the K-1 pairwise
  // kernels involving i, beta_2 excludes its own cross kernel.
  const double pairs_total = B * Kd * (Kd - 1.0) / 2.0;
  const LooBaseline beta1(cfg.control_variates, pairs_total - (Kd - 1.0), Kd - 1.0);
  const LooBaseline beta2(cfg.control_variates, B * Kd - 1.0);

  EdgeSampler sampler(dist);
  Workspace ws(model, n, K);
  ScoreAccumulator acc_sample(n);
  ScoreAccumulator acc_unit(n);
  std::vector<Matrix> grad_psi = zero_psi_grads(model);
  std::vector<double> row_sum(K);

  double value = 0.0;
  double sum_pair = 0.0;
  double sum_cross = 0.0;
  for (const DataPair* pair : batch) {
    draw_outputs(sampler, model, pair->x, rng, ws);
    std::fill(row_sum.begin(), row_sum.end(), 0.0);
    if (opts.grad_psi)
      for (auto& d : ws.dy) d.setZero();

    for (std::size_t i = 0; i < K; ++i) {
      const double* yi = ws.yhat[i].data();
      for (std::size_t j = 0; j < i; ++j) {
        const double* yj = ws.yhat[j].data();
        const auto kv = kernels::radial(kernel, kernels::squared_distance(yi, yj, len));
        sum_pair += kv.value;
        row_sum[i] += kv.value;
        row_sum[j] += kv.value;
        value += c_pair * kv.value;
        if (opts.grad_psi && kv.grad_scale != 0.0) {
          double* di = ws.dy[i].data();
          double* dj = ws.dy[j].data();
          const double s = c_pair * kv.grad_scale;
          for (std::size_t e = 0; e < len; ++e) {
            const double diff = s * (yi[e] - yj[e]);
            di[e] += diff;
            dj[e] -= diff;
          }
        }
      }
    }
    const double* target = pair->y.data();
    for (std::size_t i = 0; i < K; ++i) {
      const double* yi = ws.yhat[i].data();
      const auto kv = kernels::radial(kernel, kernels::squared_distance(yi, target, len));
      sum_cross += kv.value;
      value -= c_cross * kv.value;
      if (opts.grad_psi && kv.grad_scale != 0.0) {
        double* di = ws.dy[i].data();
        const double s = c_cross * kv.grad_scale;
        for (std::size_t e = 0; e < len; ++e) di[e] -= s * (yi[e] - target[e]);
      }
      if (opts.grad_theta) {
        const double w = c_pair * row_sum[i] * beta1.self_factor() -
                         c_cross * kv.value * beta2.self_factor();
        acc_sample.add(ws.adj[i], w);
        if (cfg.control_variates) acc_unit.add(ws.adj[i], 1.0);
      }
    }
    if (opts.grad_psi) backprop_pair(ws, pair->x, grad_psi);
  }

  LossEstimate est;
  est.value = value / B;
  if (opts.grad_theta) {
    const double gamma = c_pair * beta1.shift(sum_pair) - c_cross * beta2.shift(sum_cross);
    acc_sample.add_scaled(acc_unit, gamma);
    est.grad_theta = acc_sample.gradient(dist) / B;
  }
  if (opts.grad_psi) {
    for (auto& g : grad_psi) g /= B;
    est.grad_psi = std::move(grad_psi);
  }
  est.aux["beta1"] = sum_pair / pairs_total;
  est.aux["beta2"] = sum_cross / (B * Kd);
  return est;
}

double entry_loss(PointMetric metric, double diff) {
  return metric == PointMetric::mae ? std::abs(diff) : diff * diff;
}

double entry_loss_grad(PointMetric metric, double diff) {
  if (metric == PointMetric::mse) return 2.0 * diff;
  return diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
}

// Shared structure of the sample-averaged losses (lit1 and the ELBO data
// term): value = mean over pairs and samples of a per-sample loss, theta
// gradient by the score function with a leave-one-out batch baseline.
template <typename SampleLoss>
LossEstimate sample_averaged(const EdgeDistribution& dist, const PolyGnn& model, Batch batch,
                             const LossConfig& cfg, Rng& rng, EstimateOptions opts,
                             SampleLoss&& sample_loss) {
  const std::size_t n = dist.size();
  const std::size_t K = cfg.n_adj;
  const double B = static_cast<double>(batch.size());
  const double Kd = static_cast<double>(K);
  const LooBaseline baseline(cfg.control_variates, B * Kd - 1.0);

  EdgeSampler sampler(dist);
  Workspace ws(model, n, K);
  ScoreAccumulator acc_sample(n);
  ScoreAccumulator acc_unit(n);
  std::vector<Matrix> grad_psi = zero_psi_grads(model);

  double value = 0.0;
  double total = 0.0;
  for (const DataPair* pair : batch) {
    draw_outputs(sampler, model, pair->x, rng, ws);
    for (std::size_t k = 0; k < K; ++k) {
      // sample_loss fills dy with d(loss)/d(yhat) and returns the loss
      const double loss = sample_loss(ws.yhat[k], pair->y, ws.dy[k]);
      total += loss;
      value += loss / Kd;
      if (opts.grad_psi) ws.dy[k] /= Kd;
      if (opts.grad_theta) {
        acc_sample.add(ws.adj[k], loss * baseline.self_factor() / Kd);
        if (cfg.control_variates) acc_unit.add(ws.adj[k], 1.0);
      }
    }
    if (opts.grad_psi) backprop_pair(ws, pair->x, grad_psi);
  }

  LossEstimate est;
  est.value = value / B;
  if (opts.grad_theta) {
    acc_sample.add_scaled(acc_unit, baseline.shift(total) / Kd);
    est.grad_theta = acc_sample.gradient(dist) / B;
  }
  if (opts.grad_psi) {
    for (auto& g : grad_psi) g /= B;
    est.grad_psi = std::move(grad_psi);
  }
  est.aux["baseline"] = total / (B * Kd);
  return est;
}

}  // namespace

LossEstimate mmd2_batch(const EdgeDistribution& dist, const PolyGnn& model, Batch batch,
                        const LossConfig& cfg, Rng& rng, EstimateOptions opts) {
  require_kind(cfg, LossKind::dist_mmd);
  check_inputs(dist, model, batch, cfg);
  return distributional(cfg.kernel, dist, model, batch, cfg, rng, opts);
}

LossEstimate crps_batch(const EdgeDistribution& dist, const PolyGnn& model, Batch batch,
                        const LossConfig& cfg, Rng& rng, EstimateOptions opts) {
  require_kind(cfg, LossKind::dist_crps);
  check_inputs(dist, model, batch, cfg);
  KernelSpec energy;
  energy.kind = KernelKind::energy;
  return distributional(energy, dist, model, batch, cfg, rng, opts);
}

LossEstimate point_mse_batch(const EdgeDistribution& dist, const PolyGnn& model, Batch batch,
                             const LossConfig& cfg, Rng& rng, EstimateOptions opts) {
  require_kind(cfg, LossKind::point_mse);
  check_inputs(dist, model, batch, cfg);
  const std::size_t n = dist.size();
  const std::size_t K = cfg.n_adj;
  const double B = static_cast<double>(batch.size());
  const double Kd = static_cast<double>(K);
  const std::size_t len = n * model.d_out();
  const double per_entry = 1.0 / static_cast<double>(len);

  EdgeSampler sampler(dist);
  Workspace ws(model, n, K);
  ScoreAccumulator acc(n);
  std::vector<Matrix> grad_psi = zero_psi_grads(model);
  Matrix mean;
  Matrix others;

  double value = 0.0;
  for (const DataPair* pair : batch) {
    draw_outputs(sampler, model, pair->x, rng, ws);
    mean.setZero(pair->y.rows(), pair->y.cols());
    for (const auto& y : ws.yhat) mean += y;
    mean /= Kd;
    const Matrix residual = mean - pair->y;
    value += per_entry * residual.squaredNorm();
    if (opts.grad_psi) {
      for (auto& d : ws.dy) d = (2.0 * per_entry / Kd) * residual;
      backprop_pair(ws, pair->x, grad_psi);
    }
    if (opts.grad_theta) {
      // 2 (E[yhat] - y*) . E[yhat * score]: both factors of sample k are
      // estimated from disjoint samples (the first from the other K-1 draws),
      // so the product is unbiased; with control variates the leave-one-out
      // mean is also subtracted from yhat_k.
      for (std::size_t k = 0; k < K; ++k) {
        others = (Kd * mean - ws.yhat[k]) / (Kd - 1.0);
        double dot;
        if (cfg.control_variates)
          dot = ((others - pair->y).array() * (ws.yhat[k] - others).array()).sum();
        else
          dot = ((others - pair->y).array() * ws.yhat[k].array()).sum();
        acc.add(ws.adj[k], 2.0 * per_entry * dot / Kd);
      }
    }
  }

  LossEstimate est;
  est.value = value / B;
  if (opts.grad_theta) est.grad_theta = acc.gradient(dist) / B;
  if (opts.grad_psi) {
    for (auto& g : grad_psi) g /= B;
    est.grad_psi = std::move(grad_psi);
  }
  return est;
}

LossEstimate lit1_batch(const EdgeDistribution& dist, const PolyGnn& model, Batch batch,
                        const LossConfig& cfg, Rng& rng, EstimateOptions opts) {
  require_kind(cfg, LossKind::lit1);
  check_inputs(dist, model, batch, cfg);
  const PointMetric metric = cfg.inner_metric;
  const double per_entry = 1.0 / static_cast<double>(dist.size() * model.d_out());
  return sample_averaged(dist, model, batch, cfg, rng, opts,
                         [&](const Matrix& yhat, const Matrix& y, Matrix& dy) {
                           double loss = 0.0;
                           dy.resize(y.rows(), y.cols());
                           for (Eigen::Index e = 0; e < y.size(); ++e) {
                             const double diff = yhat.data()[e] - y.data()[e];
                             loss += entry_loss(metric, diff);
                             dy.data()[e] = per_entry * entry_loss_grad(metric, diff);
                           }
                           return loss * per_entry;
                         });
}

LossEstimate elbo_batch(const EdgeDistribution& dist, const PolyGnn& model, Batch batch,
                        const LossConfig& cfg, Rng& rng, EstimateOptions opts) {
  require_kind(cfg, LossKind::elbo);
  check_inputs(dist, model, batch, cfg);
  const EdgeDistribution& prior = *cfg.elbo_prior;
  if (prior.size() != dist.size()) throw ShapeMismatch("ELBO prior size differs from distribution");
  const double var = cfg.elbo_sigma * cfg.elbo_sigma;
  const double log_norm = 0.5 * std::log(2.0 * std::numbers::pi * var);
  LossEstimate est = sample_averaged(dist, model, batch, cfg, rng, opts,
                                     [&](const Matrix& yhat, const Matrix& y, Matrix& dy) {
                                       double nll = 0.0;
                                       dy.resize(y.rows(), y.cols());
                                       for (Eigen::Index e = 0; e < y.size(); ++e) {
                                         const double diff = yhat.data()[e] - y.data()[e];
                                         nll += log_norm + diff * diff / (2.0 * var);
                                         dy.data()[e] = diff / var;
                                       }
                                       return nll;
                                     });
  const double kl = kl_to(dist, prior);
  est.aux["nll"] = est.value;
  est.aux["kl"] = kl;
  est.value += kl;
  if (opts.grad_theta) est.grad_theta += kl_gradient(dist, prior);
  return est;
}

LossEstimate lit2_batch(const EdgeDistribution& dist, const PolyGnn& model, Batch batch,
                        const LossConfig& cfg, LossState& state, Rng& rng, EstimateOptions opts) {
  require_kind(cfg, LossKind::lit2);
  check_inputs(dist, model, batch, cfg);
  const std::size_t n = dist.size();
  const std::size_t K = cfg.n_adj;
  const std::size_t d = model.d_out();
  const double B = static_cast<double>(batch.size());
  const double Kd = static_cast<double>(K);
  const double Nd = static_cast<double>(n);
  const double per_entry = 1.0 / static_cast<double>(n * d);
  const PointMetric metric = cfg.inner_metric;

  if (state.node_baselines.size() != static_cast<Eigen::Index>(n))
    state.node_baselines = Vector::Zero(static_cast<Eigen::Index>(n));

  EdgeSampler sampler(dist);
  Workspace ws(model, n, K);
  ScoreAccumulator acc(n);
  std::vector<Matrix> grad_psi = zero_psi_grads(model);
  std::vector<double> row_weights(n);
  Vector node_loss_sum = Vector::Zero(static_cast<Eigen::Index>(n));

  double value = 0.0;
  for (const DataPair* pair : batch) {
    draw_outputs(sampler, model, pair->x, rng, ws);
    for (std::size_t k = 0; k < K; ++k) {
      Matrix& dy = ws.dy[k];
      dy.resize(pair->y.rows(), pair->y.cols());
      for (std::size_t i = 0; i < n; ++i) {
        double node = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          const auto r = static_cast<Eigen::Index>(i);
          const auto col = static_cast<Eigen::Index>(c);
          const double diff = ws.yhat[k](r, col) - pair->y(r, col);
          node += entry_loss(metric, diff);
          dy(r, col) = per_entry * entry_loss_grad(metric, diff) / Kd;
        }
        node /= static_cast<double>(d);
        node_loss_sum(static_cast<Eigen::Index>(i)) += node;
        value += node / (Nd * Kd);
        const double b = cfg.control_variates ? state.node_baselines(static_cast<Eigen::Index>(i)) : 0.0;
        row_weights[i] = (node - b) / (Nd * Kd);
      }
      if (opts.grad_theta) acc.add_rows(ws.adj[k], row_weights.data());
    }
    if (opts.grad_psi) backprop_pair(ws, pair->x, grad_psi);
  }

  LossEstimate est;
  est.value = value / B;
  if (opts.grad_theta) est.grad_theta = acc.gradient(dist) / B;
  if (opts.grad_psi) {
    for (auto& g : grad_psi) g /= B;
    est.grad_psi = std::move(grad_psi);
  }
  if (cfg.control_variates) {
    const double m = cfg.baseline_momentum;
    state.node_baselines = m * state.node_baselines + (1.0 - m) * node_loss_sum / (B * Kd);
  }
  est.aux["baseline_mean"] = state.node_baselines.mean();
  return est;
}

LossEstimate estimate_loss(const EdgeDistribution& dist, const PolyGnn& model, Batch batch,
                           const LossConfig& cfg, LossState& state, Rng& rng,
                           EstimateOptions opts) {
  switch (cfg.kind) {
    case LossKind::dist_mmd: return mmd2_batch(dist, model, batch, cfg, rng, opts);
    case LossKind::dist_crps: return crps_batch(dist, model, batch, cfg, rng, opts);
    case LossKind::point_mse: return point_mse_batch(dist, model, batch, cfg, rng, opts);
    case LossKind::lit1: return lit1_batch(dist, model, batch, cfg, rng, opts);
    case LossKind::lit2: return lit2_batch(dist, model, batch, cfg, state, rng, opts);
    case LossKind::elbo: return elbo_batch(dist, model, batch, cfg, rng, opts);
  }
  throw ConfigError("unhandled loss kind");
}

VarianceProfile estimator_variance_profile(const LossConfig& cfg, const EdgeDistribution& dist,
                                           const PolyGnn& model, Batch batch,
                                           std::size_t resamples, Rng& rng,
                                           const LossState& state) {
  if (resamples < 2) throw InsufficientSamples("variance profile needs at least 2 resamples");
  const auto n = static_cast<Eigen::Index>(dist.size());
  Matrix mean = Matrix::Zero(n, n);
  Matrix m2 = Matrix::Zero(n, n);
  EstimateOptions opts;
  opts.grad_psi = false;
  for (std::size_t r = 0; r < resamples; ++r) {
    LossState scratch = state;
    const LossEstimate est = estimate_loss(dist, model, batch, cfg, scratch, rng, opts);
    const Matrix delta = est.grad_theta - mean;
    mean += delta / static_cast<double>(r + 1);
    m2.array() += delta.array() * (est.grad_theta - mean).array();
  }
  VarianceProfile out;
  out.variance = m2 / static_cast<double>(resamples - 1);
  out.resamples = resamples;
  double sum = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (dist.mask()(i, j)) {
        sum += out.variance(i, j);
        ++count;
      }
  out.mean_variance = count > 0 ? sum / static_cast<double>(count) : 0.0;
  return out;
}

double mmd2_full_unbiased(const KernelSpec& k, const std::vector<Vector>& p,
                          const std::vector<Vector>& q) {
  if (p.size() < 2 || q.size() < 2) throw InsufficientSamples("three-term MMD needs two samples per side");
  auto within = [&](const std::vector<Vector>& s) {
    double total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        total += kernels::radial(k, (s[i] - s[j]).squaredNorm()).value;
    return 2.0 * total / (static_cast<double>(s.size()) * static_cast<double>(s.size() - 1));
  };
  double cross = 0.0;
  for (const auto& a : p)
    for (const auto& b : q) {
      if (a.size() != b.size()) throw ShapeMismatch("sample dimensions differ");
      cross += kernels::radial(k, (a - b).squaredNorm()).value;
    }
  cross /= static_cast<double>(p.size() * q.size());
  return within(p) + within(q) - 2.0 * cross;
}

}  // namespace lgc
