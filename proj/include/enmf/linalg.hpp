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

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "enmf/matrix.hpp"

namespace enmf {

/// Neumaier-compensated accumulator. Used wherever cancellation between
/// large terms of opposite sign would otherwise eat the result.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      c_ += (sum_ - t) + v;
    } else {
      c_ += (v - t) + sum_;
    }
    sum_ = t;
  }

  double value() const { return sum_ + c_; }

 private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

/// A^T A for a dense m x r matrix. Only the upper triangle is accumulated;
/// the lower triangle is mirrored from it, so the result is symmetric to
/// the last bit.
inline DenseMatrix gram(const DenseMatrix& a) {
  const std::size_t m = a.rows(), r = a.cols();
  DenseMatrix g(r, r, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a.row(i);
    for (std::size_t k = 0; k < r; ++k) {
      const double aik = ai[k];
      double* gk = g.row(k);
      for (std::size_t j = k; j < r; ++j) gk[j] += aik * ai[j];
    }
  }
  for (std::size_t k = 0; k < r; ++k) {
    for (std::size_t j = k + 1; j < r; ++j) g(j, k) = g(k, j);
  }
  return g;
}

/// W^T X for dense W (m x r) and dense X (m x n); result is r x n.
inline DenseMatrix cross_wx(const DenseMatrix& w, const DenseMatrix& x) {
  if (w.rows() != x.rows()) {
    throw std::invalid_argument("cross_wx: row count mismatch");
  }
  const std::size_t m = w.rows(), r = w.cols(), n = x.cols();
  DenseMatrix out(r, n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* wi = w.row(i);
    const double* xi = x.row(i);
    for (std::size_t k = 0; k < r; ++k) {
      const double wik = wi[k];
      double* ok = out.row(k);
      for (std::size_t j = 0; j < n; ++j) ok[j] += wik * xi[j];
    }
  }
  return out;
}

/// W^T X for sparse X; touches each stored entry of X exactly once.
inline DenseMatrix cross_wx(const DenseMatrix& w, const SparseMatrix& x) {
  if (w.rows() != x.rows()) {
    throw std::invalid_argument("cross_wx: row count mismatch");
  }
  const std::size_t m = w.rows(), r = w.cols(), n = x.cols();
  DenseMatrix out(r, n, 0.0);
  const auto& off = x.offsets();
  const auto& cidx = x.col_indices();
  const auto& vals = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    const double* wi = w.row(i);
    for (std::size_t p = off[i]; p < off[i + 1]; ++p) {
      const std::size_t j = cidx[p];
      const double v = vals[p];
      for (std::size_t k = 0; k < r; ++k) out(k, j) += wi[k] * v;
    }
  }
  return out;
}

/// X H^T for dense X (m x n) and H (r x n); result is m x r.
inline DenseMatrix cross_xht(const DenseMatrix& x, const DenseMatrix& h) {
  if (x.cols() != h.cols()) {
    throw std::invalid_argument("cross_xht: column count mismatch");
  }
  const std::size_t m = x.rows(), n = x.cols(), r = h.rows();
  DenseMatrix out(m, r, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = x.row(i);
    double* oi = out.row(i);
    for (std::size_t k = 0; k < r; ++k) {
      const double* hk = h.row(k);
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += xi[j] * hk[j];
      oi[k] = s;
    }
  }
  return out;
}

/// X H^T for sparse X.
inline DenseMatrix cross_xht(const SparseMatrix& x, const DenseMatrix& h) {
  if (x.cols() != h.cols()) {
    throw std::invalid_argument("cross_xht: column count mismatch");
  }
  const std::size_t m = x.rows(), n = x.cols(), r = h.rows();
  (void)n;
  DenseMatrix out(m, r, 0.0);
  const auto& off = x.offsets();
  const auto& cidx = x.col_indices();
  const auto& vals = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    double* oi = out.row(i);
    for (std::size_t p = off[i]; p < off[i + 1]; ++p) {
      const std::size_t j = cidx[p];
      const double v = vals[p];
      for (std::size_t k = 0; k < r; ++k) oi[k] += v * h(k, j);
    }
  }
  return out;
}

/// Frobenius inner product <A, B>, compensated.
inline double frob_inner(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("frob_inner: shape mismatch");
  }
  CompensatedSum s;
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) s.add(pa[i] * pb[i]);
  return s.value();
}

inline double frob_norm_sq(const DenseMatrix& x) {
  CompensatedSum s;
  const double* p = x.data();
  for (std::size_t i = 0; i < x.size(); ++i) s.add(p[i] * p[i]);
  return s.value();
}

inline double frob_norm_sq(const SparseMatrix& x) {
  CompensatedSum s;
  for (double v : x.values()) s.add(v * v);
  return s.value();
}

/// Plain dense product A (m x k) times B (k x n).
inline DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("multiply: inner dimension mismatch");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  DenseMatrix out(m, n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* oi = out.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      const double* bp = b.row(p);
      for (std::size_t j = 0; j < n; ++j) oi[j] += aip * bp[j];
    }
  }
  return out;
}

/// Inner product of a sparse matrix with a dense one of the same shape.
inline double frob_inner(const SparseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("frob_inner: shape mismatch");
  }
  CompensatedSum s;
  const auto& off = a.offsets();
  const auto& cidx = a.col_indices();
  const auto& vals = a.values();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* bi = b.row(i);
    for (std::size_t p = off[i]; p < off[i + 1]; ++p) s.add(vals[p] * bi[cidx[p]]);
  }
  return s.value();
}

/// Products carried over from the factor update that produced a given H:
/// X H^T (m x r) and H H^T (r x r), tagged with a stamp so stale caches are
/// detected instead of silently reused.
struct GramCache {
  DenseMatrix gram;   // H H^T
  DenseMatrix cross;  // X H^T
  std::uint64_t stamp = 0;
};

}  // namespace enmf
