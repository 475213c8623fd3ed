#pragma once

#include <span>

namespace lgc {

double mean(std::span<const double> v);
/// Unbiased (n - 1) standard deviation; 0 for fewer than two values.
double stddev(std::span<const double> v);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;  // two-sided
};

/// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of
/// freedom. Throws InsufficientSamples if either sample has fewer than two
/// values.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace lgc
