#pragma once

#include "lgc/types.hpp"

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lgc {

/// Square 0/1 matrix stored as packed row bitsets.
class BinaryMatrix {
 public:
  BinaryMatrix() = default;
  explicit BinaryMatrix(std::size_t n);

  std::size_t size() const { return n_; }
  std::size_t words_per_row() const { return words_; }

  bool get(std::size_t i, std::size_t j) const {
    return (bits_[i * words_ + (j >> 6)] >> (j & 63)) & 1U;
  }
  void set(std::size_t i, std::size_t j, bool value = true) {
    auto& w = bits_[i * words_ + (j >> 6)];
    const std::uint64_t mask = std::uint64_t{1} << (j & 63);
    w = value ? (w | mask) : (w & ~mask);
  }

  std::span<const std::uint64_t> row(std::size_t i) const {
    return {bits_.data() + i * words_, words_};
  }
  std::span<std::uint64_t> row(std::size_t i) { return {bits_.data() + i * words_, words_}; }

  /// Calls f(j) for every set column j of row i, in increasing order.
  template <typename F>
  void for_each_in_row(std::size_t i, F&& f) const {
    const std::uint64_t* r = bits_.data() + i * words_;
    for (std::size_t w = 0; w < words_; ++w) {
      std::uint64_t word = r[w];
      while (word != 0) {
        const int bit = std::countr_zero(word);
        f(w * 64 + static_cast<std::size_t>(bit));
        word &= word - 1;
      }
    }
  }

  std::size_t count() const;
  bool any() const;
  void clear();

  /// Boolean product: (this * rhs)_ij = OR_k this_ik AND rhs_kj.
  BinaryMatrix multiply(const BinaryMatrix& rhs) const;
  void multiply_into(const BinaryMatrix& rhs, BinaryMatrix& out) const;

  Matrix to_dense() const;
  static BinaryMatrix from_dense(const Matrix& m);

  friend bool operator==(const BinaryMatrix&, const BinaryMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> bits_;
};

using AdjacencySample = BinaryMatrix;

}  // namespace lgc
