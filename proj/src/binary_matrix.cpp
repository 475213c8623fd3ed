#include "lgc/binary_matrix.hpp"

#include "lgc/errors.hpp"

#include <algorithm>

namespace lgc {

BinaryMatrix::BinaryMatrix(std::size_t n)
    : n_(n), words_((n + 63) / 64), bits_(n * ((n + 63) / 64), 0) {}

std::size_t BinaryMatrix::count() const {
  std::size_t total = 0;
  for (auto w : bits_) total += static_cast<std::size_t>(std::popcount(w));
  return total;
}

bool BinaryMatrix::any() const {
  return std::any_of(bits_.begin(), bits_.end(), [](std::uint64_t w) { return w != 0; });
}

void BinaryMatrix::clear() { std::fill(bits_.begin(), bits_.end(), 0); }

BinaryMatrix BinaryMatrix::multiply(const BinaryMatrix& rhs) const {
  BinaryMatrix out(n_);
  multiply_into(rhs, out);
  return out;
}

void BinaryMatrix::multiply_into(const BinaryMatrix& rhs, BinaryMatrix& out) const {
  if (rhs.n_ != n_) throw ShapeMismatch("boolean product of matrices with different sizes");
  if (out.n_ != n_) out = BinaryMatrix(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    std::uint64_t* dst = out.bits_.data() + i * words_;
    std::fill(dst, dst + words_, 0);
    for_each_in_row(i, [&](std::size_t k) {
      const std::uint64_t* src = rhs.bits_.data() + k * words_;
      for (std::size_t w = 0; w < words_; ++w) dst[w] |= src[w];
    });
  }
}

Matrix BinaryMatrix::to_dense() const {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i)
    for_each_in_row(i, [&](std::size_t j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
    });
  return m;
}

BinaryMatrix BinaryMatrix::from_dense(const Matrix& m) {
  if (m.rows() != m.cols()) throw ShapeMismatch("adjacency must be square");
  BinaryMatrix out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (m(i, j) != 0.0) out.set(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  return out;
}

}  // namespace lgc
