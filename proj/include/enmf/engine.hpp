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

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "enmf/linalg.hpp"
#include "enmf/matrix.hpp"
#include "enmf/nnls.hpp"
#include "enmf/rng.hpp"

namespace enmf {

// Alternating nonnegative least squares with extrapolation. Each outer
// iteration updates H against an extrapolated W_y, updates W against the
// new H (or an extrapolated version of it, depending on the variant), then
// pushes the auxiliary pair (W_y, H_y) beyond the new iterates by a
// momentum weight beta that adapts to whether the residual fell or rose.
// A rise also restarts the auxiliary pair from the last accepted factors,
// so the accepted sequence cannot diverge.

class CacheStale : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ZeroDirection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteIterate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class InnerSolver { exact, hals };

enum class TimingMode { wall, none };

/// Momentum weight state. beta is the weight applied this iteration,
/// beta_bar its current ceiling, beta_prev the weight used one iteration
/// ago. Growth factors satisfy 1 < gamma_bar < gamma < eta.
struct BetaSchedule {
  double beta = 0.5;
  double beta_bar = 1.0;
  double beta_prev = 0.5;
  double gamma = 1.1;
  double gamma_bar = 1.05;
  double eta = 1.5;

  void validate() const {
    if (!(beta >= 0.0) || !(beta_bar <= 1.0) || !(beta <= beta_bar)) {
      throw std::invalid_argument("BetaSchedule: need 0 <= beta <= beta_bar <= 1");
    }
    if (!(beta_prev >= 0.0) || !(beta_prev <= 1.0)) {
      throw std::invalid_argument("BetaSchedule: beta_prev out of [0, 1]");
    }
    if (!(1.0 < gamma_bar) || !(gamma_bar < gamma) || !(gamma < eta)) {
      throw std::invalid_argument("BetaSchedule: need 1 < gamma_bar < gamma < eta");
    }
  }
};

/// One scheduler transition. On a non-increasing error the weight grows
/// toward its ceiling and the ceiling creeps toward 1; on an increase the
/// weight is cut by eta and the ceiling falls back to the last weight that
/// did work.
inline BetaSchedule update_beta(BetaSchedule s, bool error_decreased) {
  const double used = s.beta;
  if (error_decreased) {
    s.beta = std::min(s.beta_bar, s.gamma * s.beta);
    s.beta_bar = std::min(1.0, s.gamma_bar * s.beta_bar);
  } else {
    s.beta = s.beta / s.eta;
    s.beta_bar = s.beta_prev;
  }
  s.beta_prev = used;
  return s;
}

/// y + beta * (y - y_prev), entrywise.
inline DenseMatrix extrapolate(const DenseMatrix& next, const DenseMatrix& prev, double beta) {
  if (!next.same_shape(prev)) {
    throw std::invalid_argument("extrapolate: shape mismatch");
  }
  if (!(beta >= 0.0)) throw std::invalid_argument("extrapolate: beta must be >= 0");
  DenseMatrix out(next.rows(), next.cols(), 0.0);
  const double* pn = next.data();
  const double* pp = prev.data();
  double* po = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] = pn[i] + beta * (pn[i] - pp[i]);
  return out;
}

/// Residual norm ||X - W H||_F via the expansion
///   ||X||^2 - 2 <W, X H^T> + <W^T W, H H^T>,
/// which reuses the X H^T and H H^T products that the W update already
/// formed. Costs O(m r^2) instead of O(m n r). The three terms nearly
/// cancel close to a perfect fit, so they are accumulated jointly with
/// compensation and the result is clamped at zero before the square root.
inline double fast_error(double norm_x_sq, const DenseMatrix& w, const DenseMatrix& xht,
                         const DenseMatrix& hht) {
  if (!w.same_shape(xht) || hht.rows() != w.cols() || hht.cols() != w.cols()) {
    throw std::invalid_argument("fast_error: shape mismatch");
  }
  CompensatedSum acc;
  acc.add(norm_x_sq);
  const double* pw = w.data();
  const double* px = xht.data();
  for (std::size_t i = 0; i < w.size(); ++i) acc.add(-2.0 * pw[i] * px[i]);
  const DenseMatrix wtw = gram(w);
  const double* pg = wtw.data();
  const double* ph = hht.data();
  for (std::size_t i = 0; i < wtw.size(); ++i) acc.add(pg[i] * ph[i]);
  return std::sqrt(std::max(0.0, acc.value()));
}

/// Cache-checked variant: refuses to compute from products whose stamp does
/// not match the H the caller claims they were built from.
inline double fast_error(double norm_x_sq, const DenseMatrix& w, const GramCache& cache,
                         std::uint64_t expected_stamp) {
  if (cache.stamp != expected_stamp) {
    throw CacheStale("fast_error: cached products have stamp " + std::to_string(cache.stamp) +
                     ", expected " + std::to_string(expected_stamp));
  }
  return fast_error(norm_x_sq, w, cache.cross, cache.gram);
}

struct SolverConfig {
  InnerSolver inner_h = InnerSolver::exact;
  InnerSolver inner_w = InnerSolver::exact;
  // Placement of the H extrapolation: 1 = after the W update, 2 = right
  // after the H update, 3 = like 2 but projected onto the nonnegative
  // orthant.
  int hp = 1;
  double beta0 = 0.5;
  double gamma = 1.1;
  double gamma_bar = 1.05;
  double eta = 1.5;
  std::size_t max_outer_iterations = 500;
  double max_seconds = std::numeric_limits<double>::infinity();
  bool extrapolation_enabled = true;
  // With hp = 1 the W update and the reported error use the fresh H update;
  // the extrapolated H_y only seeds the next H update. Setting this flag
  // makes the W update consume the stale H_y carried over from the previous
  // iteration instead (the other sequencing consistent with placing the H
  // extrapolation last), at the cost of an extra O(m n r) product per
  // iteration for the error.
  bool literal_hp1_order = false;
  double inner_sweep_ratio = 0.5;
  double inner_stall_fraction = 0.01;
  std::optional<std::size_t> inner_max_sweeps;
  std::uint64_t reinit_seed = 0;

  void validate() const {
    if (hp != 1 && hp != 2 && hp != 3) throw std::invalid_argument("SolverConfig: hp must be 1, 2 or 3");
    if (!(beta0 >= 0.0) || !(beta0 < 1.0)) {
      throw std::invalid_argument("SolverConfig: beta0 must lie in [0, 1)");
    }
    if (extrapolation_enabled && beta0 > 0.0) {
      BetaSchedule s;
      s.beta = beta0;
      s.beta_prev = beta0;
      s.gamma = gamma;
      s.gamma_bar = gamma_bar;
      s.eta = eta;
      s.validate();
    }
    if (!(max_seconds > 0.0)) throw std::invalid_argument("SolverConfig: max_seconds must be > 0");
    if (!(inner_sweep_ratio > 0.0)) {
      throw std::invalid_argument("SolverConfig: inner_sweep_ratio must be > 0");
    }
    if (!(inner_stall_fraction > 0.0) || inner_stall_fraction >= 1.0) {
      throw std::invalid_argument("SolverConfig: inner_stall_fraction must lie in (0, 1)");
    }
    if (inner_max_sweeps && *inner_max_sweeps < 1) {
      throw std::invalid_argument("SolverConfig: inner_max_sweeps must be >= 1");
    }
  }
};

/// Everything the outer loop carries between iterations: the accepted
/// factors (w, h), the auxiliary extrapolated pair (w_y, h_y), the most
/// recent subproblem solutions (w_n, h_n), the previous error, and the
/// momentum schedule.
struct ExtrapolationState {
  DenseMatrix w, h;
  DenseMatrix w_y, h_y;
  DenseMatrix w_n, h_n;
  double err_prev = 0.0;
  BetaSchedule schedule;
  bool restarted = false;
  std::uint64_t next_stamp = 1;
};

struct IterationRecord {
  std::size_t iteration = 0;
  double elapsed_seconds = 0.0;
  double error = 0.0;           // ||X - W H||_F at the end of the iteration
  double relative_error = 0.0;  // error / ||X||_F
  double beta = 0.0;            // momentum weight used by this iteration
  bool restarted = false;
};

struct FactorPair {
  DenseMatrix w;
  DenseMatrix h;
};

struct RunRecord {
  std::vector<IterationRecord> iterations;  // entry 0 describes the initial pair
  FactorPair factors;
  double norm_x = 0.0;

  double final_relative_error() const {
    return iterations.empty() ? 0.0 : iterations.back().relative_error;
  }
};

namespace detail {

inline double setup_flop_estimate(const DenseMatrix& x, std::size_t r) {
  return static_cast<double>(x.rows()) * static_cast<double>(x.cols()) * static_cast<double>(r);
}

inline double setup_flop_estimate(const SparseMatrix& x, std::size_t r) {
  return static_cast<double>(x.nnz()) * static_cast<double>(r);
}

inline InnerLoopPolicy inner_policy(const SolverConfig& cfg, double setup_flops,
                                    std::size_t rhs, std::size_t r) {
  if (cfg.inner_max_sweeps) {
    InnerLoopPolicy p;
    p.max_sweeps = *cfg.inner_max_sweeps;
    p.sweep_budget_ratio = cfg.inner_sweep_ratio;
    p.stall_fraction = cfg.inner_stall_fraction;
    return p;
  }
  const double sweep_flops =
      static_cast<double>(rhs) * static_cast<double>(r) * static_cast<double>(r);
  return InnerLoopPolicy::derive(setup_flops, sweep_flops, cfg.inner_sweep_ratio,
                                 cfg.inner_stall_fraction);
}

/// Redraws the listed columns of a factor from uniform [0, 1). Used when a
/// factor column collapses to (near) zero and its Gram diagonal can no
/// longer support an update.
inline void reinit_columns(DenseMatrix& a, const std::vector<std::size_t>& cols,
                           std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  for (std::size_t c : cols) {
    for (std::size_t i = 0; i < a.rows(); ++i) a(i, c) = uniform_unit(gen);
  }
}

/// Builds gram(a) and redraws any columns of `a` whose Gram diagonal falls
/// below 1e-16 times the largest diagonal, retrying until clean. Sets
/// *modified when a column was redrawn.
inline DenseMatrix gram_with_reinit(DenseMatrix& a, std::uint64_t reinit_seed,
                                    std::uint64_t salt, bool* modified = nullptr) {
  std::vector<std::size_t> bad;
  for (std::size_t attempt = 0;; ++attempt) {
    DenseMatrix g = gram(a);
    const double floor = 1e-16 * max_diagonal(g);
    bad.clear();
    for (std::size_t k = 0; k < g.rows(); ++k) {
      if (!(g(k, k) > floor)) bad.push_back(k);
    }
    if (bad.empty()) return g;
    if (attempt > a.cols() + 2) {
      throw NoConvergence("degenerate factor column persists after reinitialization");
    }
    reinit_columns(a, bad, mix_seed(reinit_seed, salt, attempt));
    if (modified) *modified = true;
  }
}

template <class MatrixX>
double inner_with_x(const MatrixX& x, const DenseMatrix& d) {
  return frob_inner(x, d);
}

}  // namespace detail

/// One outer iteration. `iteration` is the 1-based index used to salt the
/// deterministic column-reinitialization stream; `norm_x_sq` is ||X||_F^2.
/// On return the state holds the new accepted pair and err_prev equals the
/// reported error.
template <class MatrixX>
IterationRecord step(const MatrixX& x, double norm_x_sq, ExtrapolationState& st,
                     const SolverConfig& cfg, std::size_t iteration) {
  const std::size_t r = st.w.cols();
  const std::size_t m = st.w.rows();
  const std::size_t n = st.h.cols();
  const double beta = cfg.extrapolation_enabled ? st.schedule.beta : 0.0;
  const double setup_flops = detail::setup_flop_estimate(x, r);

  IterationRecord rec;
  rec.iteration = iteration;
  rec.beta = beta;

  // H update: minimize ||X - W_y H|| over H >= 0, warm started at H_y.
  {
    NnlsProblem ph;
    ph.gram = detail::gram_with_reinit(st.w_y, cfg.reinit_seed, 2 * iteration);
    ph.cross = cross_wx(st.w_y, x);
    ph.scale = norm_x_sq;
    if (cfg.inner_h == InnerSolver::exact) {
      st.h_n = active_set_solve(ph, st.h_y);
    } else {
      st.h_n = hals_solve(ph, st.h_y, detail::inner_policy(cfg, setup_flops, n, r));
    }
  }
  if (!st.h_n.all_finite()) {
    throw NonFiniteIterate("H update produced a non-finite value at iteration " +
                           std::to_string(iteration));
  }

  // Early H extrapolation for the hp = 2 and hp = 3 placements.
  if (cfg.hp >= 2) {
    if (cfg.extrapolation_enabled) {
      st.h_y = extrapolate(st.h_n, st.h, beta);
      if (cfg.hp == 3) st.h_y.clamp_nonnegative();
    } else {
      st.h_y = st.h_n;
    }
  }
  const bool w_target_is_hy = cfg.hp >= 2 || (cfg.literal_hp1_order && cfg.extrapolation_enabled);

  // W update: minimize ||X - W T|| over W >= 0 with T the chosen H iterate,
  // solved in transposed form. The X T^T and T T^T products are kept for the
  // error evaluation below.
  GramCache wcache;
  std::uint64_t target_stamp;
  {
    DenseMatrix& target = w_target_is_hy ? st.h_y : st.h_n;
    DenseMatrix target_t = target.transposed();
    bool redrawn = false;
    DenseMatrix gram_t =
        detail::gram_with_reinit(target_t, cfg.reinit_seed, 2 * iteration + 1, &redrawn);
    if (redrawn) target = target_t.transposed();
    wcache.cross = cross_xht(x, target);
    wcache.gram = gram_t;
    wcache.stamp = st.next_stamp++;
    target_stamp = wcache.stamp;

    NnlsProblem pw;
    pw.gram = gram_t;
    pw.cross = wcache.cross.transposed();
    pw.scale = norm_x_sq;
    const DenseMatrix wy_t = st.w_y.transposed();
    DenseMatrix wn_t;
    if (cfg.inner_w == InnerSolver::exact) {
      wn_t = active_set_solve(pw, wy_t);
    } else {
      wn_t = hals_solve(pw, wy_t, detail::inner_policy(cfg, setup_flops, m, r));
    }
    st.w_n = wn_t.transposed();
  }
  if (!st.w_n.all_finite()) {
    throw NonFiniteIterate("W update produced a non-finite value at iteration " +
                           std::to_string(iteration));
  }

  // W extrapolation, and the late H extrapolation of the hp = 1 placement.
  if (cfg.extrapolation_enabled) {
    st.w_y = extrapolate(st.w_n, st.w, beta);
  } else {
    st.w_y = st.w_n;
  }
  if (cfg.hp == 1) {
    if (cfg.extrapolation_enabled) {
      st.h_y = extrapolate(st.h_n, st.h, beta);
    } else {
      st.h_y = st.h_n;
    }
  }

  // Error of the new pair, from the products cached by the W update. Under
  // the literal hp = 1 sequencing the error is taken against the freshly
  // extrapolated H_y instead, which needs its own products.
  double err;
  if (cfg.hp == 1 && cfg.literal_hp1_order && cfg.extrapolation_enabled) {
    GramCache lit;
    DenseMatrix hy_t = st.h_y.transposed();
    lit.gram = gram(hy_t);
    lit.cross = cross_xht(x, st.h_y);
    lit.stamp = st.next_stamp++;
    err = fast_error(norm_x_sq, st.w_n, lit, lit.stamp);
  } else {
    err = fast_error(norm_x_sq, st.w_n, wcache, target_stamp);
  }
  if (!std::isfinite(err)) {
    throw NonFiniteIterate("error evaluation produced a non-finite value at iteration " +
                           std::to_string(iteration));
  }

  // Restart on an error increase: the auxiliary pair falls back to the last
  // accepted factors and the new candidates are discarded.
  if (err > st.err_prev) {
    st.w_y = st.w;
    st.h_y = st.h;
    st.restarted = true;
  } else {
    st.w = st.w_n;
    st.h = st.h_n;
    st.restarted = false;
  }
  rec.restarted = st.restarted;

  if (cfg.extrapolation_enabled) {
    st.schedule = update_beta(st.schedule, err <= st.err_prev);
  }
  st.err_prev = err;

  rec.error = err;
  const double norm_x = std::sqrt(norm_x_sq);
  rec.relative_error = norm_x > 0.0 ? err / norm_x : 0.0;
  return rec;
}

/// Full solve. Starts from (w0, h0), which must be nonnegative and finite,
/// and iterates until the iteration or wall-clock budget is exhausted.
/// Entry 0 of the returned record describes the initial pair. With
/// TimingMode::none all elapsed fields are written as zero and the output
/// depends only on the inputs; a finite max_seconds forces wall timing.
template <class MatrixX>
RunRecord run(const MatrixX& x, const DenseMatrix& w0, const DenseMatrix& h0,
              const SolverConfig& cfg, TimingMode timing = TimingMode::wall) {
  cfg.validate();
  if (w0.cols() != h0.rows()) {
    throw std::invalid_argument("run: factor inner dimensions disagree");
  }
  if (w0.rows() != x.rows() || h0.cols() != x.cols()) {
    throw std::invalid_argument("run: factor shapes do not match the data matrix");
  }
  if (!w0.all_finite() || !h0.all_finite() || !w0.all_nonnegative() || !h0.all_nonnegative()) {
    throw std::invalid_argument("run: initial factors must be finite and nonnegative");
  }

  const bool wall = timing == TimingMode::wall || std::isfinite(cfg.max_seconds);
  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&]() -> double {
    if (!wall) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  const double norm_x_sq = frob_norm_sq(x);
  const double norm_x = std::sqrt(norm_x_sq);

  ExtrapolationState st;
  st.w = w0;
  st.h = h0;
  st.w_y = w0;
  st.h_y = h0;
  st.schedule.beta = cfg.beta0;
  st.schedule.beta_bar = 1.0;
  st.schedule.beta_prev = cfg.beta0;
  st.schedule.gamma = cfg.gamma;
  st.schedule.gamma_bar = cfg.gamma_bar;
  st.schedule.eta = cfg.eta;

  RunRecord out;
  out.norm_x = norm_x;

  // Error of the initial pair, from freshly built products.
  {
    GramCache init;
    DenseMatrix h0t = h0.transposed();
    init.gram = gram(h0t);
    init.cross = cross_xht(x, h0);
    init.stamp = 0;
    const double e0 = fast_error(norm_x_sq, w0, init, 0);
    st.err_prev = e0;
    IterationRecord rec0;
    rec0.iteration = 0;
    rec0.elapsed_seconds = elapsed();
    rec0.error = e0;
    rec0.relative_error = norm_x > 0.0 ? e0 / norm_x : 0.0;
    rec0.beta = cfg.extrapolation_enabled ? cfg.beta0 : 0.0;
    rec0.restarted = false;
    out.iterations.push_back(rec0);
  }

  for (std::size_t k = 1; k <= cfg.max_outer_iterations; ++k) {
    if (wall && elapsed() >= cfg.max_seconds) break;
    IterationRecord rec = step(x, norm_x_sq, st, cfg, k);
    rec.elapsed_seconds = elapsed();
    if (wall && rec.elapsed_seconds <= out.iterations.back().elapsed_seconds) {
      // Clock granularity can make two fast iterations share a tick; keep
      // the recorded timeline strictly increasing anyway.
      rec.elapsed_seconds = std::nextafter(out.iterations.back().elapsed_seconds,
                                           std::numeric_limits<double>::infinity());
    }
    out.iterations.push_back(rec);
  }

  out.factors.w = st.w;
  out.factors.h = st.h;
  return out;
}

/// Momentum weight that would minimize the residual along the direction the
/// W update just moved, with the H iterate held fixed:
///   beta* = <X - W_n H, (W_n - W) H> / ||(W_n - W) H||_F^2.
/// Diagnostic only; throws ZeroDirection when the step direction vanishes.
template <class MatrixX>
double optimal_beta_linesearch(const MatrixX& x, const DenseMatrix& w_n, const DenseMatrix& w,
                               const DenseMatrix& h_y) {
  const DenseMatrix diff = w_n - w;
  const DenseMatrix dh = multiply(diff, h_y);
  const double denom = frob_norm_sq(dh);
  if (!(denom > 1e-30 * frob_norm_sq(x))) {
    throw ZeroDirection("optimal_beta_linesearch: direction (W_n - W) H has negligible norm");
  }
  const double xdh = detail::inner_with_x(x, dh);
  const DenseMatrix wh = multiply(w_n, h_y);
  const double whdh = frob_inner(wh, dh);
  return (xdh - whdh) / denom;
}

}  // namespace enmf
