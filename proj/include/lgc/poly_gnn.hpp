#pragma once

// Hop-polynomial graph predictor: y = tanh(sum_l 1[A^l != 0] x psi_l^T).

#include "lgc/binary_matrix.hpp"
#include "lgc/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <vector>

namespace lgc {

class PolyGnn {
 public:
  PolyGnn() = default;
  /// Each layer is d_out x d_in; at least one layer, all of equal shape.
  explicit PolyGnn(std::vector<Matrix> layers);

  static PolyGnn zeros(std::size_t hops, std::size_t d_in, std::size_t d_out);

  std::size_t hops() const { return layers_.size(); }
  std::size_t d_in() const { return static_cast<std::size_t>(layers_.front().cols()); }
  std::size_t d_out() const { return static_cast<std::size_t>(layers_.front().rows()); }
  std::size_t parameter_count() const { return hops() * d_in() * d_out(); }

  const std::vector<Matrix>& layers() const { return layers_; }
  const Matrix& layer(std::size_t l) const { return layers_[l]; }
  /// Replaces the weights of layer l; the shape must not change.
  void set_layer(std::size_t l, const Matrix& weights);

  friend bool operator==(const PolyGnn& a, const PolyGnn& b) { return a.layers_ == b.layers_; }

 private:
  std::vector<Matrix> layers_;
};

/// Element l-1 is the reachability matrix of walks of exactly l steps.
std::vector<BinaryMatrix> hop_matrices(const AdjacencySample& a, std::size_t hops);
void hop_matrices_into(const AdjacencySample& a, std::vector<BinaryMatrix>& out);

Matrix forward(const PolyGnn& model, const Matrix& x, const AdjacencySample& a);

/// Gradients of a scalar loss with respect to every psi_l, given dL/dy.
std::vector<Matrix> backward(const PolyGnn& model, const Matrix& x, const AdjacencySample& a,
                             const Matrix& dl_dy);

/// psi_i -> (1 + delta_i) psi_i with delta_i ~ U[-max_pert, max_pert].
PolyGnn perturb(const PolyGnn& model, double max_pert, Rng& rng);

// Split evaluation for Monte-Carlo loops that reuse one input x across many
// adjacency samples: x psi_l^T does not depend on A and is computed once.
struct ProjectedInputs {
  std::vector<Matrix> per_hop;  // x psi_l^T, N x d_out
};

ProjectedInputs project_inputs(const PolyGnn& model, const Matrix& x);
void forward_projected(const ProjectedInputs& proj, const std::vector<BinaryMatrix>& hops,
                       Matrix& y);

/// acc_l += H_l^T (dl_dy .* (1 - y^2)); y is the forward output.
void accumulate_backward(const std::vector<BinaryMatrix>& hops, const Matrix& y,
                         const Matrix& dl_dy, std::vector<Matrix>& acc);
/// grad_l += acc_l^T x
void finish_backward(const std::vector<Matrix>& acc, const Matrix& x, std::vector<Matrix>& grad);

void to_json(nlohmann::json& j, const PolyGnn& m);
void from_json(const nlohmann::json& j, PolyGnn& m);

}  // namespace lgc
