// Copyright 2026 The enmf Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace enmf {

/// Dense row-major matrix of 64-bit floats. Shapes are at least 1x1 and
/// every construction path that accepts outside data rejects NaN/Inf.
class DenseMatrix {
 public:
  DenseMatrix() = default;

  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), v_(checked_size(rows, cols), fill) {
    if (!std::isfinite(fill)) {
      throw std::invalid_argument("DenseMatrix: fill value must be finite");
    }
  }

  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), v_(std::move(values)) {
    if (v_.size() != checked_size(rows, cols)) {
      throw std::invalid_argument("DenseMatrix: values length does not match rows*cols");
    }
    for (double x : v_) {
      if (!std::isfinite(x)) {
        throw std::invalid_argument("DenseMatrix: values must be finite");
      }
    }
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return v_.size(); }
  bool empty() const { return v_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return v_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return v_[i * cols_ + j]; }

  double* row(std::size_t i) { return v_.data() + i * cols_; }
  const double* row(std::size_t i) const { return v_.data() + i * cols_; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  bool same_shape(const DenseMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  DenseMatrix transposed() const {
    DenseMatrix t(cols_, rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
      const double* src = row(i);
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = src[j];
    }
    return t;
  }

  double max_abs() const {
    double m = 0.0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
  }

  double min_value() const {
    double m = std::numeric_limits<double>::infinity();
    for (double x : v_) m = std::min(m, x);
    return m;
  }

  bool all_finite() const {
    for (double x : v_) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  bool all_nonnegative() const {
    for (double x : v_) {
      if (!(x >= 0.0)) return false;
    }
    return true;
  }

  /// In-place projection onto the nonnegative orthant.
  void clamp_nonnegative() {
    for (double& x : v_) x = x > 0.0 ? x : 0.0;
  }

 private:
  static std::size_t checked_size(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) {
      throw std::invalid_argument("DenseMatrix: rows and cols must be >= 1");
    }
    if (cols > std::numeric_limits<std::size_t>::max() / rows) {
      throw std::invalid_argument("DenseMatrix: shape overflows size_t");
    }
    return rows * cols;
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> v_;
};

inline bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.data()[i] != b.data()[i]) return false;
  }
  return true;
}

inline DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("matrix difference: shape mismatch");
  }
  DenseMatrix out(a.rows(), a.cols(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
  return out;
}

/// Row-compressed sparse matrix. Column indices are strictly increasing
/// within each row; explicit zeros are allowed but discouraged.
class SparseMatrix {
 public:
  struct Entry {
    std::size_t row;
    std::size_t col;
    double value;
  };

  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> offsets,
               std::vector<std::size_t> col_indices, std::vector<double> values)
      : rows_(rows), cols_(cols), offsets_(std::move(offsets)),
        cols_idx_(std::move(col_indices)), vals_(std::move(values)) {
    validate();
  }

  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Entry> entries) {
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    for (std::size_t i = 1; i < entries.size(); ++i) {
      if (entries[i].row == entries[i - 1].row && entries[i].col == entries[i - 1].col) {
        throw std::invalid_argument("SparseMatrix: duplicate entry at (" +
                                    std::to_string(entries[i].row) + ", " +
                                    std::to_string(entries[i].col) + ")");
      }
    }
    std::vector<std::size_t> offsets(rows + 1, 0);
    std::vector<std::size_t> cidx(entries.size());
    std::vector<double> vals(entries.size());
    for (const Entry& e : entries) {
      if (e.row >= rows || e.col >= cols) {
        throw std::invalid_argument("SparseMatrix: entry index out of bounds");
      }
      ++offsets[e.row + 1];
    }
    for (std::size_t i = 0; i < rows; ++i) offsets[i + 1] += offsets[i];
    for (std::size_t i = 0; i < entries.size(); ++i) {
      cidx[i] = entries[i].col;
      vals[i] = entries[i].value;
    }
    return SparseMatrix(rows, cols, std::move(offsets), std::move(cidx), std::move(vals));
  }

  static SparseMatrix from_dense(const DenseMatrix& d) {
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < d.rows(); ++i) {
      for (std::size_t j = 0; j < d.cols(); ++j) {
        if (d(i, j) != 0.0) entries.push_back({i, j, d(i, j)});
      }
    }
    return from_triplets(d.rows(), d.cols(), std::move(entries));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return vals_.size(); }

  const std::vector<std::size_t>& offsets() const { return offsets_; }
  const std::vector<std::size_t>& col_indices() const { return cols_idx_; }
  const std::vector<double>& values() const { return vals_; }

  DenseMatrix to_dense() const {
    DenseMatrix d(rows_, cols_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p) {
        d(i, cols_idx_[p]) = vals_[p];
      }
    }
    return d;
  }

 private:
  void validate() const {
    if (rows_ == 0 || cols_ == 0) {
      throw std::invalid_argument("SparseMatrix: rows and cols must be >= 1");
    }
    if (offsets_.size() != rows_ + 1 || offsets_.front() != 0 ||
        offsets_.back() != vals_.size() || cols_idx_.size() != vals_.size()) {
      throw std::invalid_argument("SparseMatrix: inconsistent compressed storage");
    }
    for (std::size_t i = 0; i < rows_; ++i) {
      if (offsets_[i] > offsets_[i + 1]) {
        throw std::invalid_argument("SparseMatrix: offsets must be non-decreasing");
      }
      for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p) {
        if (cols_idx_[p] >= cols_) {
          throw std::invalid_argument("SparseMatrix: column index out of range");
        }
        if (p > offsets_[i] && cols_idx_[p] <= cols_idx_[p - 1]) {
          throw std::invalid_argument(
              "SparseMatrix: column indices must be strictly increasing within a row");
        }
        if (!std::isfinite(vals_[p])) {
          throw std::invalid_argument("SparseMatrix: values must be finite");
        }
      }
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> cols_idx_;
  std::vector<double> vals_;
};

}  // namespace enmf
