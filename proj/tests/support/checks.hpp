#pragma once
// Property checks shared by the unit tests and the acceptance binary.
#include "lgc/losses.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lgc::checks {

struct LossCase {
  LossKind kind;
  PointMetric metric;
  bool cv;
  std::string name() const;
};

/// Every estimator (lit1/lit2 with both inner metrics), with and without
/// control variates.
std::vector<LossCase> all_loss_cases();

struct UnbiasednessResult {
  Matrix mc_mean;
  Matrix exact;
  Matrix se;
  double value_mc = 0.0;
  double value_exact = 0.0;
  double value_se = 0.0;
  double max_z = 0.0;  // over gradient entries and the value
  double seconds = 0.0;
};

/// Monte-Carlo mean of the estimator on a fixed two-node problem against
/// exact enumeration, in standard errors.
UnbiasednessResult unbiasedness(const LossCase& c, std::size_t reps, std::uint64_t seed);

struct FdResult {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // stencil straddles a kink of MAE or the energy kernel
};

/// Analytic psi gradients against central differences of the value with the
/// adjacency draws replayed, on `instances` random small problems.
FdResult psi_gradient_fd(LossKind kind, PointMetric metric, int instances, std::uint64_t seed);

/// score_gradient against central differences of log_likelihood.
FdResult score_gradient_fd(int instances, std::uint64_t seed);

struct CounterexampleResult {
  std::vector<double> point_loss;  // median/MAE point loss at theta 0.6, 0.75, 0.9
  double best_theta = 0.0;         // argmin of the population MMD on the 0.01 grid
  bool unique_minimum = false;
};

/// One Bernoulli latent with truth 0.75 and f(x, 1) > f(x, 0).
CounterexampleResult counterexample();

}  // namespace lgc::checks
