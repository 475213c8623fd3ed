#include "lgc/edge_dist.hpp"

#include "lgc/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace lgc {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

double xlogy_ratio(double p, double q) {
  // p * ln(p / q) with 0 ln 0 = 0
  return p == 0.0 ? 0.0 : p * std::log(p / q);
}

}  // namespace

EdgeDistribution::EdgeDistribution(Matrix theta, double epsilon)
    : EdgeDistribution(theta, BoolMatrix::Constant(theta.rows(), theta.cols(), true), epsilon) {}

EdgeDistribution::EdgeDistribution(Matrix theta, BoolMatrix mask, double epsilon)
    : theta_(std::move(theta)), mask_(std::move(mask)), epsilon_(epsilon) {
  validate();
  clamp_trainable();
}

EdgeDistribution EdgeDistribution::constant(std::size_t n, double value, double epsilon) {
  return EdgeDistribution(Matrix::Constant(idx(n), idx(n), value), epsilon);
}

void EdgeDistribution::validate() const {
  if (theta_.rows() != theta_.cols()) throw ShapeMismatch("theta must be square");
  if (mask_.rows() != theta_.rows() || mask_.cols() != theta_.cols())
    throw ShapeMismatch("mask shape differs from theta shape");
  if (!(epsilon_ > 0.0 && epsilon_ < 0.5)) throw ConfigError("epsilon must lie in (0, 0.5)");
  for (Eigen::Index i = 0; i < theta_.rows(); ++i)
    for (Eigen::Index j = 0; j < theta_.cols(); ++j) {
      const double t = theta_(i, j);
      if (!std::isfinite(t)) throw NumericalDivergence("non-finite edge probability");
      if (!mask_(i, j) && (t < 0.0 || t > 1.0))
        throw ConfigError("frozen edge probability outside [0, 1]");
    }
}

void EdgeDistribution::clamp_trainable() {
  const double lo = epsilon_;
  const double hi = 1.0 - epsilon_;
  for (Eigen::Index i = 0; i < theta_.rows(); ++i)
    for (Eigen::Index j = 0; j < theta_.cols(); ++j)
      if (mask_(i, j)) theta_(i, j) = std::clamp(theta_(i, j), lo, hi);
}

void EdgeDistribution::assign(const Matrix& theta) {
  if (theta.rows() != theta_.rows() || theta.cols() != theta_.cols())
    throw ShapeMismatch("theta update has wrong shape");
  for (Eigen::Index i = 0; i < theta_.rows(); ++i)
    for (Eigen::Index j = 0; j < theta_.cols(); ++j)
      if (mask_(i, j)) {
        if (!std::isfinite(theta(i, j))) throw NumericalDivergence("non-finite theta update");
        theta_(i, j) = theta(i, j);
      }
  clamp_trainable();
}

void EdgeDistribution::freeze(std::size_t i, std::size_t j, double value) {
  if (i >= size() || j >= size()) throw ShapeMismatch("frozen entry out of range");
  if (!(value >= 0.0 && value <= 1.0)) throw ConfigError("frozen edge probability outside [0, 1]");
  mask_(idx(i), idx(j)) = false;
  theta_(idx(i), idx(j)) = value;
}

EdgeSampler::EdgeSampler(const EdgeDistribution& dist)
    : n_(dist.size()), thresholds_(dist.size() * dist.size()) {
  const Matrix& theta = dist.theta();
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j)
      thresholds_[i * n_ + j] =
          static_cast<std::uint64_t>(std::llround(theta(idx(i), idx(j)) * 4294967296.0));
}

void EdgeSampler::sample(Rng& rng, AdjacencySample& out) const {
  if (out.size() != n_) out = AdjacencySample(n_);
  std::uint64_t bits = 0;
  bool have_half = false;
  for (std::size_t i = 0; i < n_; ++i) {
    auto row = out.row(i);
    std::fill(row.begin(), row.end(), 0);
    for (std::size_t j = 0; j < n_; ++j) {
      std::uint64_t u;
      if (have_half) {
        u = bits >> 32;
        have_half = false;
      } else {
        bits = rng();
        u = bits & 0xffffffffULL;
        have_half = true;
      }
      if (u < thresholds_[i * n_ + j]) row[j >> 6] |= std::uint64_t{1} << (j & 63);
    }
  }
}

AdjacencySample EdgeSampler::sample(Rng& rng) const {
  AdjacencySample out(n_);
  sample(rng, out);
  return out;
}

AdjacencySample sample(const EdgeDistribution& dist, Rng& rng) {
  return EdgeSampler(dist).sample(rng);
}

double log_likelihood(const EdgeDistribution& dist, const AdjacencySample& a) {
  if (a.size() != dist.size()) throw ShapeMismatch("adjacency size differs from distribution");
  const Matrix& theta = dist.theta();
  double total = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i)
    for (std::size_t j = 0; j < dist.size(); ++j) {
      const double t = theta(idx(i), idx(j));
      const bool on = a.get(i, j);
      if (on) {
        if (t == 0.0)
          throw ImpossibleSample("edge (" + std::to_string(i) + "," + std::to_string(j) +
                                 ") is present but has probability 0");
        total += std::log(t);
      } else {
        if (t == 1.0)
          throw ImpossibleSample("edge (" + std::to_string(i) + "," + std::to_string(j) +
                                 ") is absent but has probability 1");
        total += std::log1p(-t);
      }
    }
  return total;
}

Matrix score_gradient(const EdgeDistribution& dist, const AdjacencySample& a) {
  if (a.size() != dist.size()) throw ShapeMismatch("adjacency size differs from distribution");
  const std::size_t n = dist.size();
  Matrix g = Matrix::Zero(idx(n), idx(n));
  const Matrix& theta = dist.theta();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (!dist.trainable(i, j)) continue;
      const double t = theta(idx(i), idx(j));
      g(idx(i), idx(j)) = a.get(i, j) ? 1.0 / t : -1.0 / (1.0 - t);
    }
  return g;
}

double kl_to(const EdgeDistribution& dist, const EdgeDistribution& prior) {
  if (dist.size() != prior.size()) throw ShapeMismatch("KL between distributions of different size");
  const Matrix& p = dist.theta();
  const Matrix& q = prior.theta();
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (!(q(i, j) > 0.0 && q(i, j) < 1.0)) throw ConfigError("prior entries must lie in (0, 1)");
      total += xlogy_ratio(p(i, j), q(i, j)) + xlogy_ratio(1.0 - p(i, j), 1.0 - q(i, j));
    }
  return total;
}

Matrix kl_gradient(const EdgeDistribution& dist, const EdgeDistribution& prior) {
  if (dist.size() != prior.size()) throw ShapeMismatch("KL between distributions of different size");
  const std::size_t n = dist.size();
  Matrix g = Matrix::Zero(idx(n), idx(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (!dist.trainable(i, j)) continue;
      const double t = dist.theta()(idx(i), idx(j));
      const double q = prior.theta()(idx(i), idx(j));
      g(idx(i), idx(j)) = std::log(t / q) - std::log((1.0 - t) / (1.0 - q));
    }
  return g;
}

EdgeDistribution project(const EdgeDistribution& dist) {
  EdgeDistribution out = dist;
  out.clamp_trainable();
  return out;
}

ScoreAccumulator::ScoreAccumulator(std::size_t n)
    : n_(n), weighted_counts_(Matrix::Zero(idx(n), idx(n))), row_weight_(Vector::Zero(idx(n))) {}

void ScoreAccumulator::add(const AdjacencySample& a, double weight) {
  for (std::size_t i = 0; i < n_; ++i) {
    row_weight_(idx(i)) += weight;
    a.for_each_in_row(i, [&](std::size_t j) { weighted_counts_(idx(i), idx(j)) += weight; });
  }
}

void ScoreAccumulator::add_rows(const AdjacencySample& a, const double* row_weights) {
  for (std::size_t i = 0; i < n_; ++i) {
    const double w = row_weights[i];
    row_weight_(idx(i)) += w;
    a.for_each_in_row(i, [&](std::size_t j) { weighted_counts_(idx(i), idx(j)) += w; });
  }
}

void ScoreAccumulator::add_scaled(const ScoreAccumulator& other, double factor) {
  weighted_counts_ += factor * other.weighted_counts_;
  row_weight_ += factor * other.row_weight_;
}

void ScoreAccumulator::reset() {
  weighted_counts_.setZero();
  row_weight_.setZero();
}

Matrix ScoreAccumulator::gradient(const EdgeDistribution& dist) const {
  if (dist.size() != n_) throw ShapeMismatch("score accumulator size differs from distribution");
  Matrix g = Matrix::Zero(idx(n_), idx(n_));
  const Matrix& theta = dist.theta();
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) {
      if (!dist.trainable(i, j)) continue;
      const double t = theta(idx(i), idx(j));
      const double c = weighted_counts_(idx(i), idx(j));
      g(idx(i), idx(j)) = c / t - (row_weight_(idx(i)) - c) / (1.0 - t);
    }
  return g;
}

void to_json(nlohmann::json& j, const EdgeDistribution& d) {
  const std::size_t n = d.size();
  std::vector<double> theta;
  std::vector<bool> mask;
  theta.reserve(n * n);
  mask.reserve(n * n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      theta.push_back(d.theta()(idx(r), idx(c)));
      mask.push_back(d.trainable(r, c));
    }
  j = nlohmann::json{{"n", n}, {"epsilon", d.epsilon()}, {"theta", theta}, {"mask", mask}};
}

void from_json(const nlohmann::json& j, EdgeDistribution& d) {
  const auto n = j.at("n").get<std::size_t>();
  const auto theta = j.at("theta").get<std::vector<double>>();
  std::vector<bool> mask(n * n, true);
  if (j.contains("mask")) mask = j.at("mask").get<std::vector<bool>>();
  if (theta.size() != n * n || mask.size() != n * n)
    throw ShapeMismatch("edge distribution JSON arrays must hold n*n entries");
  Matrix t(idx(n), idx(n));
  BoolMatrix m(idx(n), idx(n));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      t(idx(r), idx(c)) = theta[r * n + c];
      m(idx(r), idx(c)) = mask[r * n + c];
    }
  d = EdgeDistribution(std::move(t), std::move(m),
                       j.value("epsilon", EdgeDistribution::kDefaultEpsilon));
}

}  // namespace lgc
