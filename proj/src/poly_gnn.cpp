#include "lgc/poly_gnn.hpp"

#include "lgc/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

namespace lgc {

PolyGnn::PolyGnn(std::vector<Matrix> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw InvalidShape("PolyGnn needs at least one hop");
  for (const auto& l : layers_) {
    if (l.rows() != layers_.front().rows() || l.cols() != layers_.front().cols())
      throw InvalidShape("all PolyGnn layers must share one shape");
    if (l.size() == 0) throw InvalidShape("PolyGnn layers must be non-empty");
  }
}

PolyGnn PolyGnn::zeros(std::size_t hops, std::size_t d_in, std::size_t d_out) {
  return PolyGnn(std::vector<Matrix>(
      hops, Matrix::Zero(static_cast<Eigen::Index>(d_out), static_cast<Eigen::Index>(d_in))));
}

void PolyGnn::set_layer(std::size_t l, const Matrix& weights) {
  if (weights.rows() != layers_.at(l).rows() || weights.cols() != layers_.at(l).cols())
    throw ShapeMismatch("layer update has wrong shape");
  layers_[l] = weights;
}

void hop_matrices_into(const AdjacencySample& a, std::vector<BinaryMatrix>& out) {
  if (out.empty()) throw InvalidShape("hop count must be at least 1");
  out[0] = a;
  for (std::size_t l = 1; l < out.size(); ++l) out[l - 1].multiply_into(a, out[l]);
}

std::vector<BinaryMatrix> hop_matrices(const AdjacencySample& a, std::size_t hops) {
  if (hops == 0) throw InvalidShape("hop count must be at least 1");
  std::vector<BinaryMatrix> out(hops);
  hop_matrices_into(a, out);
  return out;
}

ProjectedInputs project_inputs(const PolyGnn& model, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != model.d_in())
    throw ShapeMismatch("input feature width differs from model d_in");
  ProjectedInputs p;
  p.per_hop.reserve(model.hops());
  for (const auto& psi : model.layers()) p.per_hop.push_back(x * psi.transpose());
  return p;
}

void forward_projected(const ProjectedInputs& proj, const std::vector<BinaryMatrix>& hops,
                       Matrix& y) {
  const Eigen::Index n = proj.per_hop.front().rows();
  const Eigen::Index d = proj.per_hop.front().cols();
  if (hops.size() != proj.per_hop.size()) throw ShapeMismatch("hop count mismatch");
  if (static_cast<Eigen::Index>(hops.front().size()) != n)
    throw ShapeMismatch("adjacency size differs from node count");
  y.setZero(n, d);
  for (std::size_t l = 0; l < hops.size(); ++l) {
    const Matrix& u = proj.per_hop[l];
    for (Eigen::Index i = 0; i < n; ++i)
      hops[l].for_each_in_row(static_cast<std::size_t>(i), [&](std::size_t j) {
        for (Eigen::Index c = 0; c < d; ++c) y(i, c) += u(static_cast<Eigen::Index>(j), c);
      });
  }
  y = y.array().tanh().matrix();
}

Matrix forward(const PolyGnn& model, const Matrix& x, const AdjacencySample& a) {
  if (static_cast<std::size_t>(x.rows()) != a.size())
    throw ShapeMismatch("node feature rows differ from adjacency size");
  std::vector<BinaryMatrix> hops(model.hops());
  hop_matrices_into(a, hops);
  Matrix y;
  forward_projected(project_inputs(model, x), hops, y);
  return y;
}

void accumulate_backward(const std::vector<BinaryMatrix>& hops, const Matrix& y,
                         const Matrix& dl_dy, std::vector<Matrix>& acc) {
  const Eigen::Index n = y.rows();
  const Eigen::Index d = y.cols();
  if (acc.size() != hops.size()) acc.assign(hops.size(), Matrix::Zero(n, d));
  for (std::size_t l = 0; l < hops.size(); ++l) {
    Matrix& a = acc[l];
    for (Eigen::Index i = 0; i < n; ++i) {
      // dz_i = dL/dy_i * (1 - y_i^2), scattered to every source j of row i
      hops[l].for_each_in_row(static_cast<std::size_t>(i), [&](std::size_t j) {
        for (Eigen::Index c = 0; c < d; ++c)
          a(static_cast<Eigen::Index>(j), c) += dl_dy(i, c) * (1.0 - y(i, c) * y(i, c));
      });
    }
  }
}

void finish_backward(const std::vector<Matrix>& acc, const Matrix& x, std::vector<Matrix>& grad) {
  for (std::size_t l = 0; l < acc.size(); ++l) grad[l].noalias() += acc[l].transpose() * x;
}

std::vector<Matrix> backward(const PolyGnn& model, const Matrix& x, const AdjacencySample& a,
                             const Matrix& dl_dy) {
  if (static_cast<std::size_t>(x.rows()) != a.size() || dl_dy.rows() != x.rows() ||
      static_cast<std::size_t>(dl_dy.cols()) != model.d_out() ||
      static_cast<std::size_t>(x.cols()) != model.d_in())
    throw ShapeMismatch("backward: inconsistent shapes");
  std::vector<BinaryMatrix> hops(model.hops());
  hop_matrices_into(a, hops);
  Matrix y;
  forward_projected(project_inputs(model, x), hops, y);
  std::vector<Matrix> acc(model.hops(), Matrix::Zero(y.rows(), y.cols()));
  accumulate_backward(hops, y, dl_dy, acc);
  std::vector<Matrix> grad(model.hops(), Matrix::Zero(model.layer(0).rows(), model.layer(0).cols()));
  finish_backward(acc, x, grad);
  return grad;
}

PolyGnn perturb(const PolyGnn& model, double max_pert, Rng& rng) {
  if (!(max_pert >= 0.0)) throw ConfigError("maximum perturbation must be non-negative");
  std::vector<Matrix> layers = model.layers();
  std::uniform_real_distribution<double> delta(-max_pert, max_pert);
  for (auto& psi : layers)
    for (Eigen::Index r = 0; r < psi.rows(); ++r)
      for (Eigen::Index c = 0; c < psi.cols(); ++c) psi(r, c) *= 1.0 + (max_pert > 0.0 ? delta(rng) : 0.0);
  return PolyGnn(std::move(layers));
}

void to_json(nlohmann::json& j, const PolyGnn& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& psi : m.layers()) {
    std::vector<double> flat;
    for (Eigen::Index r = 0; r < psi.rows(); ++r)
      for (Eigen::Index c = 0; c < psi.cols(); ++c) flat.push_back(psi(r, c));
    layers.push_back(flat);
  }
  j = nlohmann::json{{"L", m.hops()}, {"d_in", m.d_in()}, {"d_out", m.d_out()}, {"layers", layers}};
}

void from_json(const nlohmann::json& j, PolyGnn& m) {
  const auto hops = j.at("L").get<std::size_t>();
  const auto d_in = j.at("d_in").get<Eigen::Index>();
  const auto d_out = j.at("d_out").get<Eigen::Index>();
  const auto& layers = j.at("layers");
  if (layers.size() != hops) throw ShapeMismatch("model JSON: layer count differs from L");
  std::vector<Matrix> out;
  for (const auto& l : layers) {
    const auto flat = l.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat.size()) != d_in * d_out)
      throw ShapeMismatch("model JSON: layer has wrong number of entries");
    Matrix psi(d_out, d_in);
    for (Eigen::Index r = 0; r < d_out; ++r)
      for (Eigen::Index c = 0; c < d_in; ++c) psi(r, c) = flat[static_cast<std::size_t>(r * d_in + c)];
    out.push_back(std::move(psi));
  }
  m = PolyGnn(std::move(out));
}

}  // namespace lgc
