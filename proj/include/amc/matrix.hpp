#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "amc/errors.hpp"

namespace amc {

// Dense row-major square matrix. Only what the chain code needs.
template <typename T>
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, T fill = T{}) : n_(n), data_(n * n, fill) {}

  SquareMatrix(std::initializer_list<std::initializer_list<T>> rows) : n_(rows.size()), data_() {
    data_.reserve(n_ * n_);
    for (const auto& row : rows) {
      if (row.size() != n_) throw InvariantError("matrix literal is not square");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static SquareMatrix identity(std::size_t n) {
    SquareMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  std::size_t size() const noexcept { return n_; }

  T& operator()(std::size_t i, std::size_t j) noexcept {
    assert(i < n_ && j < n_);
    return data_[i * n_ + j];
  }
  const T& operator()(std::size_t i, std::size_t j) const noexcept {
    assert(i < n_ && j < n_);
    return data_[i * n_ + j];
  }

  std::span<T> row(std::size_t i) noexcept { return {data_.data() + i * n_, n_}; }
  std::span<const T> row(std::size_t i) const noexcept { return {data_.data() + i * n_, n_}; }

  std::vector<T> column(std::size_t j) const {
    std::vector<T> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = (*this)(i, j);
    return out;
  }

  std::vector<std::vector<T>> to_rows() const {
    std::vector<std::vector<T>> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i].assign(row(i).begin(), row(i).end());
    return out;
  }

  static SquareMatrix from_rows(const std::vector<std::vector<T>>& rows) {
    SquareMatrix m(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) {
        throw InvariantError("row " + std::to_string(i) + " has " +
                             std::to_string(rows[i].size()) + " entries, expected " +
                             std::to_string(rows.size()));
      }
      std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
  }

  friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<T> data_;
};

using Matrix = SquareMatrix<double>;

template <typename T>
SquareMatrix<T> multiply(const SquareMatrix<T>& a, const SquareMatrix<T>& b) {
  const std::size_t n = a.size();
  assert(b.size() == n);
  SquareMatrix<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < n; ++k) {
      const T aik = a(i, k);
      if (aik == T{}) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < n; ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

template <typename T>
T max_abs_diff(const SquareMatrix<T>& a, const SquareMatrix<T>& b) {
  assert(a.size() == b.size());
  T worst{};
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) {
      const T d = a(i, j) > b(i, j) ? a(i, j) - b(i, j) : b(i, j) - a(i, j);
      worst = std::max(worst, d);
    }
  return worst;
}

}  // namespace amc
