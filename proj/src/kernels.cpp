#include "lgc/kernels.hpp"

#include "lgc/errors.hpp"

#include <cmath>

namespace lgc {

void KernelSpec::validate() const {
  if (!(sigma > 0.0)) throw ConfigError("kernel sigma must be positive");
  if (!(alpha > 0.0)) throw ConfigError("kernel alpha must be positive");
}

std::string to_string(KernelKind kind) {
  return kind == KernelKind::rational_quadratic ? "rational_quadratic" : "energy";
}

KernelKind kernel_kind_from_string(const std::string& name) {
  if (name == "rational_quadratic") return KernelKind::rational_quadratic;
  if (name == "energy") return KernelKind::energy;
  throw ConfigError("unknown kernel kind '" + name + "'");
}

namespace kernels {

RadialValue radial(const KernelSpec& k, double sq) {
  if (k.kind == KernelKind::energy) {
    if (sq <= 0.0) return {0.0, 0.0};
    const double dist = std::sqrt(sq);
    return {-dist, -1.0 / dist};
  }
  const double sigma2 = k.sigma * k.sigma;
  const double base = 1.0 + sq / (2.0 * k.alpha * sigma2);
  double value;
  double pow_minus_one;  // base^(-alpha - 1)
  if (k.alpha == 0.5) {
    value = 1.0 / std::sqrt(base);
    pow_minus_one = value / base;
  } else {
    value = std::pow(base, -k.alpha);
    pow_minus_one = value / base;
  }
  return {value, -pow_minus_one / sigma2};
}

double squared_distance(const double* a, const double* b, std::size_t len) {
  double s = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double eval(const KernelSpec& k, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeMismatch("kernel arguments differ in length");
  return radial(k, squared_distance(a.data(), b.data(), a.size())).value;
}

std::vector<double> grad_wrt_first(const KernelSpec& k, std::span<const double> a,
                                   std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeMismatch("kernel arguments differ in length");
  const auto r = radial(k, squared_distance(a.data(), b.data(), a.size()));
  std::vector<double> g(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) g[i] = r.grad_scale * (a[i] - b[i]);
  return g;
}

}  // namespace kernels
}  // namespace lgc
