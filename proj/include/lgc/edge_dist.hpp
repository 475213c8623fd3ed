#pragma once

// Product-Bernoulli distribution over N x N adjacency matrices.

#include "lgc/binary_matrix.hpp"
#include "lgc/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace lgc {

class EdgeDistribution {
 public:
  static constexpr double kDefaultEpsilon = 1e-4;

  EdgeDistribution() = default;

  /// All entries trainable. Trainable entries are clamped into [eps, 1 - eps].
  explicit EdgeDistribution(Matrix theta, double epsilon = kDefaultEpsilon);

  /// mask(i, j) == true marks a trainable entry; other entries keep their
  /// value exactly and must lie in [0, 1].
  EdgeDistribution(Matrix theta, BoolMatrix mask, double epsilon = kDefaultEpsilon);

  static EdgeDistribution constant(std::size_t n, double value,
                                   double epsilon = kDefaultEpsilon);

  std::size_t size() const { return static_cast<std::size_t>(theta_.rows()); }
  double epsilon() const { return epsilon_; }
  const Matrix& theta() const { return theta_; }
  const BoolMatrix& mask() const { return mask_; }
  bool trainable(std::size_t i, std::size_t j) const {
    return mask_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  std::size_t trainable_count() const { return static_cast<std::size_t>(mask_.count()); }

  /// Copies trainable entries of `theta` and projects them; frozen entries
  /// are left untouched.
  void assign(const Matrix& theta);

  /// Freezes entry (i, j) at `value`.
  void freeze(std::size_t i, std::size_t j, double value);

 private:
  void validate() const;
  void clamp_trainable();

  Matrix theta_;
  BoolMatrix mask_;
  double epsilon_ = kDefaultEpsilon;

  friend EdgeDistribution project(const EdgeDistribution& dist);
};

/// Repeated sampling from a fixed distribution. Each entry consumes 32 random
/// bits; A_ij = 1 iff u < round(theta_ij * 2^32).
class EdgeSampler {
 public:
  explicit EdgeSampler(const EdgeDistribution& dist);
  void sample(Rng& rng, AdjacencySample& out) const;
  AdjacencySample sample(Rng& rng) const;
  std::size_t size() const { return n_; }

 private:
  std::size_t n_ = 0;
  std::vector<std::uint64_t> thresholds_;
};

AdjacencySample sample(const EdgeDistribution& dist, Rng& rng);

double log_likelihood(const EdgeDistribution& dist, const AdjacencySample& a);

/// d/d theta of log P(A): A/theta - (1 - A)/(1 - theta) on trainable entries,
/// zero on frozen ones.
Matrix score_gradient(const EdgeDistribution& dist, const AdjacencySample& a);

double kl_to(const EdgeDistribution& dist, const EdgeDistribution& prior);

/// Exact gradient of kl_to with respect to trainable theta entries.
Matrix kl_gradient(const EdgeDistribution& dist, const EdgeDistribution& prior);

EdgeDistribution project(const EdgeDistribution& dist);

/// Accumulates sum_k w_k * score_gradient(A_k) without materialising each
/// score: only weighted edge counts and per-row weight totals are stored.
class ScoreAccumulator {
 public:
  explicit ScoreAccumulator(std::size_t n = 0);

  void add(const AdjacencySample& a, double weight);
  /// Adds weight_i * (row i of score_gradient(A)) for every row i.
  void add_rows(const AdjacencySample& a, const double* row_weights);
  /// this += factor * other
  void add_scaled(const ScoreAccumulator& other, double factor);
  void reset();

  Matrix gradient(const EdgeDistribution& dist) const;

 private:
  std::size_t n_ = 0;
  Matrix weighted_counts_;
  Vector row_weight_;
};

void to_json(nlohmann::json& j, const EdgeDistribution& d);
void from_json(const nlohmann::json& j, EdgeDistribution& d);

}  // namespace lgc
