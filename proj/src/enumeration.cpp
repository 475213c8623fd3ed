#include "lgc/enumeration.hpp"

#include "lgc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace lgc {

namespace {

struct Outcome {
  double prob;
  Matrix y;      // model output
  Matrix score;  // d log P(A) / d theta, zero on frozen entries
};

std::vector<Outcome> enumerate(const EdgeDistribution& dist, const PolyGnn& model,
                               const Matrix& x) {
  const std::size_t n = dist.size();
  const Matrix& theta = dist.theta();
  std::vector<std::pair<std::size_t, std::size_t>> random;
  AdjacencySample base(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double t = theta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (t >= 1.0) base.set(i, j, true);
      else if (t > 0.0) random.emplace_back(i, j);
    }
  if (random.size() > kMaxEnumeratedEdges)
    throw TooManyEdges(std::to_string(random.size()) + " random entries exceed the enumeration bound of " +
                       std::to_string(kMaxEnumeratedEdges));

  const auto nn = static_cast<Eigen::Index>(n);
  std::vector<Outcome> out;
  out.reserve(std::size_t{1} << random.size());
  for (std::size_t mask = 0; mask < (std::size_t{1} << random.size()); ++mask) {
    AdjacencySample a = base;
    Outcome o{1.0, {}, Matrix::Zero(nn, nn)};
    for (std::size_t b = 0; b < random.size(); ++b) {
      const auto [i, j] = random[b];
      const auto r = static_cast<Eigen::Index>(i);
      const auto c = static_cast<Eigen::Index>(j);
      const double t = theta(r, c);
      const bool on = (mask >> b) & 1U;
      a.set(i, j, on);
      o.prob *= on ? t : 1.0 - t;
      if (dist.trainable(i, j)) o.score(r, c) = on ? 1.0 / t : -1.0 / (1.0 - t);
    }
    o.y = forward(model, x, a);
    out.push_back(std::move(o));
  }
  return out;
}

double kernel_value(const KernelSpec& k, const Matrix& a, const Matrix& b) {
  return kernels::eval(k, {a.data(), static_cast<std::size_t>(a.size())},
                       {b.data(), static_cast<std::size_t>(b.size())});
}

double point_loss(PointMetric metric, const Matrix& yhat, const Matrix& y) {
  const Matrix d = yhat - y;
  const double s = metric == PointMetric::mae ? d.cwiseAbs().sum() : d.squaredNorm();
  return s / static_cast<double>(y.size());
}

}  // namespace

OracleResult enumeration_oracle(const EdgeDistribution& dist, const PolyGnn& model,
                                const Matrix& x, const Matrix& y, const LossConfig& cfg) {
  cfg.validate();
  const auto outcomes = enumerate(dist, model, x);
  const auto nn = static_cast<Eigen::Index>(dist.size());
  const double len = static_cast<double>(y.size());
  OracleResult r;
  r.grad_theta = Matrix::Zero(nn, nn);

  switch (cfg.kind) {
    case LossKind::dist_mmd:
    case LossKind::dist_crps: {
      KernelSpec k = cfg.kernel;
      if (cfg.kind == LossKind::dist_crps) k.kind = KernelKind::energy;
      // d/dtheta sum_ab p_a p_b k_ab = 2 sum_a p_a s_a sum_b p_b k_ab
      for (const auto& a : outcomes) {
        double inner = 0.0;
        for (const auto& b : outcomes) inner += b.prob * kernel_value(k, a.y, b.y);
        const double cross = kernel_value(k, y, a.y);
        r.value += a.prob * (inner - 2.0 * cross);
        r.grad_theta += 2.0 * a.prob * (inner - cross) * a.score;
      }
      break;
    }
    case LossKind::point_mse: {
      Matrix mean = Matrix::Zero(y.rows(), y.cols());
      for (const auto& a : outcomes) mean += a.prob * a.y;
      const Matrix resid = mean - y;
      r.value = resid.squaredNorm() / len;
      for (const auto& a : outcomes) {
        r.grad_theta += (2.0 / len) * a.prob * (resid.array() * a.y.array()).sum() * a.score;
        r.variance_term += a.prob * (a.y - mean).squaredNorm() / len;
      }
      break;
    }
    case LossKind::lit1:
      for (const auto& a : outcomes) {
        const double l = point_loss(cfg.inner_metric, a.y, y);
        r.value += a.prob * l;
        r.grad_theta += a.prob * l * a.score;
      }
      break;
    case LossKind::lit2: {
      const double n = static_cast<double>(dist.size());
      for (const auto& a : outcomes) {
        r.value += a.prob * point_loss(cfg.inner_metric, a.y, y);
        for (Eigen::Index i = 0; i < nn; ++i) {
          const double node = point_loss(cfg.inner_metric, a.y.row(i), y.row(i));
          r.grad_theta.row(i) += a.prob * (node / n) * a.score.row(i);
        }
      }
      break;
    }
    case LossKind::elbo: {
      const double var = cfg.elbo_sigma * cfg.elbo_sigma;
      const double log_norm = 0.5 * std::log(2.0 * std::numbers::pi * var);
      for (const auto& a : outcomes) {
        const double nll = len * log_norm + (a.y - y).squaredNorm() / (2.0 * var);
        r.value += a.prob * nll;
        r.grad_theta += a.prob * nll * a.score;
      }
      r.value += kl_to(dist, *cfg.elbo_prior);
      r.grad_theta += kl_gradient(dist, *cfg.elbo_prior);
      break;
    }
  }
  return r;
}

OutcomeSet enumerate_outputs(const EdgeDistribution& dist, const PolyGnn& model,
                             const Matrix& x) {
  OutcomeSet set;
  for (auto& o : enumerate(dist, model, x)) {
    set.outputs.push_back(Eigen::Map<const Vector>(o.y.data(), o.y.size()));
    set.prob.push_back(o.prob);
  }
  return set;
}

namespace {

// Smallest support value whose cumulative probability reaches one half.
double weighted_median(std::vector<std::pair<double, double>> atoms) {
  std::sort(atoms.begin(), atoms.end());
  double cum = 0.0;
  for (const auto& [v, p] : atoms) {
    cum += p;
    if (cum >= 0.5 - 1e-12) return v;
  }
  return atoms.back().first;
}

}  // namespace

double population_point_loss(const OutcomeSet& model_out, const OutcomeSet& target,
                             PointMetric metric) {
  if (model_out.outputs.empty() || target.outputs.empty())
    throw InsufficientSamples("empty outcome set");
  const Eigen::Index len = model_out.outputs.front().size();
  Vector t(len);
  for (Eigen::Index e = 0; e < len; ++e) {
    if (metric == PointMetric::mse) {
      double m = 0.0;
      for (std::size_t a = 0; a < model_out.outputs.size(); ++a)
        m += model_out.prob[a] * model_out.outputs[a](e);
      t(e) = m;
    } else {
      std::vector<std::pair<double, double>> atoms;
      for (std::size_t a = 0; a < model_out.outputs.size(); ++a)
        atoms.emplace_back(model_out.outputs[a](e), model_out.prob[a]);
      t(e) = weighted_median(std::move(atoms));
    }
  }
  double loss = 0.0;
  for (std::size_t b = 0; b < target.outputs.size(); ++b) {
    const Vector d = target.outputs[b] - t;
    const double l = metric == PointMetric::mae ? d.cwiseAbs().sum() : d.squaredNorm();
    loss += target.prob[b] * l / static_cast<double>(len);
  }
  return loss;
}

double population_mmd2(const OutcomeSet& p, const OutcomeSet& q, const KernelSpec& kernel) {
  auto expect = [&](const OutcomeSet& a, const OutcomeSet& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.outputs.size(); ++i)
      for (std::size_t j = 0; j < b.outputs.size(); ++j)
        s += a.prob[i] * b.prob[j] *
             kernels::eval(kernel, {a.outputs[i].data(), static_cast<std::size_t>(a.outputs[i].size())},
                           {b.outputs[j].data(), static_cast<std::size_t>(b.outputs[j].size())});
    return s;
  };
  return expect(p, p) - 2.0 * expect(p, q) + expect(q, q);
}

}  // namespace lgc
