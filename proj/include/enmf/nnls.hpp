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
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "enmf/linalg.hpp"
#include "enmf/matrix.hpp"

namespace enmf {

/// A multi-right-hand-side nonnegative least squares instance in normal
/// equation form: minimize ||X - W H||_F^2 over H >= 0, presented through
/// gram = W^T W (r x r), cross = W^T X (r x n) and scale = ||X||_F^2.
struct NnlsProblem {
  DenseMatrix gram;
  DenseMatrix cross;
  double scale = 0.0;

  std::size_t rank() const { return gram.rows(); }
  std::size_t rhs_count() const { return cross.cols(); }

  /// ||X - W H||_F^2 expressed through the cached products.
  double objective(const DenseMatrix& h) const {
    const DenseMatrix gh = multiply(gram, h);
    CompensatedSum s;
    s.add(scale);
    s.add(-2.0 * frob_inner(cross, h));
    s.add(frob_inner(h, gh));
    return s.value();
  }
};

/// Thrown when a Gram diagonal is too small for a coordinate update to be
/// meaningful; carries the offending index so callers can reinitialize.
class DegenerateColumn : public std::runtime_error {
 public:
  explicit DegenerateColumn(std::size_t index)
      : std::runtime_error("near-zero Gram diagonal at index " + std::to_string(index)),
        index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class NoConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stopping policy for the inexact (coordinate sweep) solver. max_sweeps
/// defaults to 1 + floor(ratio * rho) where rho is the cost of forming the
/// subproblem divided by the cost of one sweep, so the inner loop never
/// spends more than about `ratio` of the setup cost on refinement.
struct InnerLoopPolicy {
  std::size_t max_sweeps = 1;
  double sweep_budget_ratio = 0.5;
  double stall_fraction = 0.01;

  static InnerLoopPolicy derive(double setup_flops, double sweep_flops,
                                double ratio = 0.5, double stall = 0.01) {
    InnerLoopPolicy p;
    p.sweep_budget_ratio = ratio;
    p.stall_fraction = stall;
    const double rho = sweep_flops > 0.0 ? setup_flops / sweep_flops : 0.0;
    p.max_sweeps = 1 + static_cast<std::size_t>(std::floor(ratio * rho));
    return p;
  }

  void validate() const {
    if (max_sweeps < 1) throw std::invalid_argument("InnerLoopPolicy: max_sweeps must be >= 1");
    if (!(sweep_budget_ratio > 0.0) || !(stall_fraction > 0.0) || stall_fraction >= 1.0) {
      throw std::invalid_argument("InnerLoopPolicy: invalid ratio or stall fraction");
    }
  }
};

namespace detail {

inline double max_diagonal(const DenseMatrix& g) {
  double m = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i) m = std::max(m, g(i, i));
  return m;
}

/// One Gauss-Seidel update of row k of H:
///   H(k,:) <- max(0, (cross(k,:) - sum_{j != k} gram(k,j) H(j,:)) / gram(k,k)).
/// Returns the exact objective decrease contributed by the row, which is
///   gram(k,k) * (||h_old - t||^2 - ||h_new - t||^2)
/// with t the unconstrained row optimum. Negative only when the row came in
/// infeasible.
inline double hals_row_update_impl(const NnlsProblem& p, DenseMatrix& h, std::size_t k,
                                   double degenerate_floor, std::vector<double>& scratch) {
  const std::size_t r = p.rank(), n = p.rhs_count();
  const double gkk = p.gram(k, k);
  if (!(gkk > degenerate_floor)) throw DegenerateColumn(k);
  scratch.assign(p.cross.row(k), p.cross.row(k) + n);
  for (std::size_t j = 0; j < r; ++j) {
    if (j == k) continue;
    const double gkj = p.gram(k, j);
    if (gkj == 0.0) continue;
    const double* hj = h.row(j);
    double* b = scratch.data();
    for (std::size_t t = 0; t < n; ++t) b[t] -= gkj * hj[t];
  }
  double* hk = h.row(k);
  double gain = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double target = scratch[t] / gkk;
    const double next = target > 0.0 ? target : 0.0;
    const double d_old = hk[t] - target;
    const double d_new = next - target;
    gain += d_old * d_old - d_new * d_new;
    hk[t] = next;
  }
  return gkk * gain;
}

}  // namespace detail

/// Single-row HALS update, exposed for tests and custom loops.
inline double hals_row_update(const NnlsProblem& p, DenseMatrix& h, std::size_t k) {
  if (h.rows() != p.rank() || h.cols() != p.rhs_count() || k >= p.rank()) {
    throw std::invalid_argument("hals_row_update: shape or index mismatch");
  }
  std::vector<double> scratch;
  const double floor = 1e-16 * detail::max_diagonal(p.gram);
  return detail::hals_row_update_impl(p, h, k, floor, scratch);
}

/// Inexact NNLS by cyclic coordinate sweeps over rows, warm started at h0
/// (used as-is, negative entries included). Stops at max_sweeps, or once a
/// sweep improves the objective by no more than stall_fraction times the
/// first sweep's improvement.
inline DenseMatrix hals_solve(const NnlsProblem& p, const DenseMatrix& h0,
                              const InnerLoopPolicy& policy) {
  policy.validate();
  if (h0.rows() != p.rank() || h0.cols() != p.rhs_count()) {
    throw std::invalid_argument("hals_solve: warm start shape mismatch");
  }
  if (!h0.all_finite()) throw std::invalid_argument("hals_solve: warm start must be finite");
  const std::size_t r = p.rank();
  const double floor = 1e-16 * detail::max_diagonal(p.gram);
  DenseMatrix h = h0;
  std::vector<double> scratch;
  double first_gain = 0.0;
  for (std::size_t sweep = 1;; ++sweep) {
    double gain = 0.0;
    for (std::size_t k = 0; k < r; ++k) {
      gain += detail::hals_row_update_impl(p, h, k, floor, scratch);
    }
    if (sweep == 1) first_gain = gain;
    if (sweep >= policy.max_sweeps) break;
    if (gain <= policy.stall_fraction * std::max(first_gain, 0.0)) break;
  }
  return h;
}

/// First-order optimality summary for an NNLS iterate. The gradient of the
/// objective is g = 2 (gram H - cross); the factor 2 is dropped here since
/// only signs and relative magnitudes matter.
struct KktReport {
  double primal_feasibility = 0.0;  // min entry of H
  double stationarity = 0.0;        // max |g| over entries with H > 0
  double complementarity = 0.0;     // max(0, -g) over entries with H == 0
  double tolerance = 0.0;           // scale the caller should compare against
};

inline KktReport kkt_report(const NnlsProblem& p, const DenseMatrix& h) {
  if (h.rows() != p.rank() || h.cols() != p.rhs_count()) {
    throw std::invalid_argument("kkt_report: shape mismatch");
  }
  DenseMatrix g = multiply(p.gram, h);
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] -= p.cross.data()[i];
  KktReport rep;
  rep.primal_feasibility = h.min_value();
  rep.tolerance = 1e-10 * (1.0 + p.cross.max_abs());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double hi = h.data()[i];
    const double gi = g.data()[i];
    if (hi > 0.0) {
      rep.stationarity = std::max(rep.stationarity, std::abs(gi));
    } else if (hi == 0.0) {
      rep.complementarity = std::max(rep.complementarity, -gi);
    }
  }
  rep.complementarity = std::max(rep.complementarity, 0.0);
  return rep;
}

namespace detail {

/// In-place Cholesky of a symmetric positive definite f x f matrix stored
/// row-major (lower triangle is written). Returns f on success, or the
/// index of the first pivot whose squared value does not exceed pivot_floor.
inline std::size_t cholesky(std::vector<double>& a, std::size_t f, double pivot_floor) {
  for (std::size_t j = 0; j < f; ++j) {
    double d = a[j * f + j];
    for (std::size_t p = 0; p < j; ++p) d -= a[j * f + p] * a[j * f + p];
    if (!(d > pivot_floor)) return j;
    const double ljj = std::sqrt(d);
    a[j * f + j] = ljj;
    for (std::size_t i = j + 1; i < f; ++i) {
      double s = a[i * f + j];
      for (std::size_t p = 0; p < j; ++p) s -= a[i * f + p] * a[j * f + p];
      a[i * f + j] = s / ljj;
    }
  }
  return f;
}

/// Solves L L^T x = b in place given the factor from cholesky().
inline void cholesky_solve(const std::vector<double>& l, std::size_t f, double* b) {
  for (std::size_t i = 0; i < f; ++i) {
    double s = b[i];
    for (std::size_t p = 0; p < i; ++p) s -= l[i * f + p] * b[p];
    b[i] = s / l[i * f + i];
  }
  for (std::size_t ii = f; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t p = ii + 1; p < f; ++p) s -= l[p * f + ii] * b[p];
    b[ii] = s / l[ii * f + ii];
  }
}

}  // namespace detail

/// Exact NNLS by block principal pivoting. Each column keeps a passive set
/// F; the unconstrained solution on F and the gradient on the complement
/// decide which variables are infeasible. All infeasible variables are
/// exchanged at once while that count keeps shrinking; after three
/// consecutive rounds without improvement the column falls back to moving
/// only the infeasible variable of largest index, which cannot cycle.
/// Columns sharing a passive set share one Cholesky factorization.
///
/// The warm start seeds the passive sets: entries of max(0, h0) that are
/// positive start passive. Rank-deficient passive blocks are handled by
/// dropping the variable whose pivot collapses and keeping it out of the
/// passive set for the remainder of the solve.
inline DenseMatrix active_set_solve(const NnlsProblem& p, const DenseMatrix& h0) {
  const std::size_t r = p.rank(), n = p.rhs_count();
  if (h0.rows() != r || h0.cols() != n) {
    throw std::invalid_argument("active_set_solve: warm start shape mismatch");
  }
  if (!h0.all_finite()) {
    throw std::invalid_argument("active_set_solve: warm start must be finite");
  }
  if (p.gram.rows() != p.gram.cols() || p.cross.rows() != r) {
    throw std::invalid_argument("active_set_solve: inconsistent problem shapes");
  }

  const double feas_tol = 1e-12 * (1.0 + p.cross.max_abs());
  const double pivot_floor = 1e-12 * detail::max_diagonal(p.gram);

  DenseMatrix h(r, n, 0.0);
  std::vector<std::uint8_t> passive(n * r, 0), banned(n * r, 0), done(n, 0);
  std::vector<int> best_inf(n, std::numeric_limits<int>::max());
  std::vector<int> backup(n, 3);
  for (std::size_t col = 0; col < n; ++col) {
    for (std::size_t i = 0; i < r; ++i) passive[col * r + i] = h0(i, col) > 0.0 ? 1 : 0;
  }

  std::size_t pending = n;
  std::size_t exchanges = 0;
  const std::size_t exchange_limit = 3 * r * n;

  std::vector<std::size_t> order, fidx;
  std::vector<double> cff, lfac, df, xf, resid, corr;
  std::vector<std::size_t> infeasible;

  while (pending > 0) {
    order.clear();
    for (std::size_t col = 0; col < n; ++col) {
      if (!done[col]) order.push_back(col);
    }
    // Group columns whose passive sets coincide so they share a factorization.
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const std::uint8_t* pa = passive.data() + a * r;
      const std::uint8_t* pb = passive.data() + b * r;
      for (std::size_t i = 0; i < r; ++i) {
        if (pa[i] != pb[i]) return pa[i] < pb[i];
      }
      return a < b;
    });

    std::size_t g0 = 0;
    while (g0 < order.size()) {
      const std::size_t lead = order[g0];
      std::size_t g1 = g0 + 1;
      while (g1 < order.size() &&
             std::equal(passive.begin() + order[g1] * r, passive.begin() + order[g1] * r + r,
                        passive.begin() + lead * r)) {
        ++g1;
      }

      fidx.clear();
      for (std::size_t i = 0; i < r; ++i) {
        if (passive[lead * r + i]) fidx.push_back(i);
      }

      // Factor the shared passive block, dropping variables whose pivot
      // collapses (the block is singular without them).
      std::size_t f = fidx.size();
      for (;;) {
        if (f == 0) break;
        cff.assign(f * f, 0.0);
        for (std::size_t a = 0; a < f; ++a) {
          for (std::size_t b = 0; b < f; ++b) cff[a * f + b] = p.gram(fidx[a], fidx[b]);
        }
        lfac = cff;
        const std::size_t bad = detail::cholesky(lfac, f, pivot_floor);
        if (bad == f) break;
        const std::size_t var = fidx[bad];
        for (std::size_t gi = g0; gi < g1; ++gi) {
          passive[order[gi] * r + var] = 0;
          banned[order[gi] * r + var] = 1;
        }
        fidx.erase(fidx.begin() + static_cast<std::ptrdiff_t>(bad));
        f = fidx.size();
      }

      for (std::size_t gi = g0; gi < g1; ++gi) {
        const std::size_t col = order[gi];
        df.resize(f);
        xf.resize(f);
        for (std::size_t a = 0; a < f; ++a) df[a] = p.cross(fidx[a], col);
        xf = df;
        if (f > 0) {
          detail::cholesky_solve(lfac, f, xf.data());
          // One step of iterative refinement keeps the subproblem solve well
          // inside the feasibility tolerance even for ill-conditioned blocks.
          resid.resize(f);
          for (std::size_t a = 0; a < f; ++a) {
            double s = df[a];
            for (std::size_t b = 0; b < f; ++b) s -= cff[a * f + b] * xf[b];
            resid[a] = s;
          }
          corr = resid;
          detail::cholesky_solve(lfac, f, corr.data());
          for (std::size_t a = 0; a < f; ++a) xf[a] += corr[a];
        }

        infeasible.clear();
        for (std::size_t a = 0; a < f; ++a) {
          if (xf[a] < -feas_tol) infeasible.push_back(fidx[a]);
        }
        const std::uint8_t* pmask = passive.data() + col * r;
        const std::uint8_t* bmask = banned.data() + col * r;
        for (std::size_t i = 0; i < r; ++i) {
          if (pmask[i] || bmask[i]) continue;
          double y = -p.cross(i, col);
          for (std::size_t a = 0; a < f; ++a) y += p.gram(i, fidx[a]) * xf[a];
          if (y < -feas_tol) infeasible.push_back(i);
        }

        if (infeasible.empty()) {
          done[col] = 1;
          --pending;
          for (std::size_t a = 0; a < f; ++a) {
            h(fidx[a], col) = xf[a] > 0.0 ? xf[a] : 0.0;
          }
          continue;
        }

        if (++exchanges > exchange_limit) {
          throw NoConvergence("active_set_solve: exchange limit of " +
                              std::to_string(exchange_limit) + " rounds exceeded");
        }
        const int count = static_cast<int>(infeasible.size());
        std::uint8_t* mask = passive.data() + col * r;
        if (count < best_inf[col]) {
          best_inf[col] = count;
          backup[col] = 3;
          for (std::size_t v : infeasible) mask[v] ^= 1;
        } else if (backup[col] > 0) {
          --backup[col];
          for (std::size_t v : infeasible) mask[v] ^= 1;
        } else {
          const std::size_t v = *std::max_element(infeasible.begin(), infeasible.end());
          mask[v] ^= 1;
        }
      }
      g0 = g1;
    }
  }
  return h;
}

}  // namespace enmf
