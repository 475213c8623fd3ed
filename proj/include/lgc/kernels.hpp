#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lgc {

enum class KernelKind { rational_quadratic, energy };

struct KernelSpec {
  KernelKind kind = KernelKind::rational_quadratic;
  double sigma = 0.04;
  double alpha = 0.5;

  void validate() const;
};

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

namespace kernels {

/// Kernel value and the scalar s such that grad_a k(a, b) = s * (a - b),
/// both as functions of the squared distance ||a - b||^2.
struct RadialValue {
  double value;
  double grad_scale;
};

RadialValue radial(const KernelSpec& k, double squared_distance);

double eval(const KernelSpec& k, std::span<const double> a, std::span<const double> b);
std::vector<double> grad_wrt_first(const KernelSpec& k, std::span<const double> a,
                                   std::span<const double> b);

double squared_distance(const double* a, const double* b, std::size_t len);

}  // namespace kernels
}  // namespace lgc
