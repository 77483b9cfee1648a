// Copyright 2026 The enmf Authors. All Rights Reserved.
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

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include <catch2/catch_amalgamated.hpp>
#include <enmf/linalg.hpp>
#include <enmf/matrix.hpp>
#include <enmf/rng.hpp>

#include "oracles.hpp"

using enmf::DenseMatrix;
using enmf::SparseMatrix;

namespace {

// Worst relative entry disagreement between two equally shaped matrices.
double max_rel_diff(const DenseMatrix& a, const DenseMatrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double scale = std::max(1.0, std::fabs(b(i, j)));
      worst = std::max(worst, std::fabs(a(i, j) - b(i, j)) / scale);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("dense matrix basics", "[matrix]") {
  DenseMatrix a(2, 3, 0.0);
  a(0, 0) = 1.0;
  a(1, 2) = -4.5;
  CHECK(a.rows() == 2);
  CHECK(a.cols() == 3);
  CHECK(a(0, 0) == 1.0);
  CHECK(a(1, 2) == -4.5);
  // Row-major layout: row pointers stride by the column count.
  CHECK(a.row(1) == a.data() + 3);
  CHECK(a.row(1)[2] == -4.5);

  const DenseMatrix t = a.transposed();
  CHECK(t.rows() == 3);
  CHECK(t.cols() == 2);
  CHECK(t(2, 1) == -4.5);

  CHECK(a.max_abs() == 4.5);
  CHECK(a.min_value() == -4.5);
  CHECK(a.all_finite());
  CHECK_FALSE(a.all_nonnegative());
  a.clamp_nonnegative();
  CHECK(a.all_nonnegative());
  CHECK(a(1, 2) == 0.0);
}

TEST_CASE("dense matrix rejects degenerate shapes and values", "[matrix]") {
  CHECK_THROWS_AS(DenseMatrix(0, 3), std::invalid_argument);
  CHECK_THROWS_AS(DenseMatrix(3, 0), std::invalid_argument);
  CHECK_THROWS_AS(
      DenseMatrix(2, 2, std::numeric_limits<double>::quiet_NaN()),
      std::invalid_argument);
  CHECK_THROWS_AS(
      DenseMatrix(2, 2, {1.0, 2.0, std::numeric_limits<double>::infinity(),
                         4.0}),
      std::invalid_argument);
  CHECK_THROWS_AS(DenseMatrix(2, 2, {1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("dense matrix equality and subtraction", "[matrix]") {
  const DenseMatrix a(2, 2, {1.0, 2.0, 3.0, 4.0});
  const DenseMatrix b(2, 2, {1.0, 2.0, 3.0, 4.0});
  const DenseMatrix c(2, 2, {1.0, 2.0, 3.0, 5.0});
  CHECK(a == b);
  CHECK_FALSE(a == c);
  const DenseMatrix d = c - a;
  CHECK(d(0, 0) == 0.0);
  CHECK(d(1, 1) == 1.0);
}

TEST_CASE("identity matrix", "[matrix]") {
  const DenseMatrix eye = enmf::DenseMatrix::identity(3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(eye(i, j) == (i == j ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("sparse matrix from triplets sorts and validates", "[matrix]") {
  // Triplets given out of order; construction must sort them into CSR.
  const SparseMatrix s = SparseMatrix::from_triplets(
      3, 4, {{2, 1, 5.0}, {0, 3, 1.5}, {0, 0, 2.0}, {1, 2, -3.0}});
  CHECK(s.rows() == 3);
  CHECK(s.cols() == 4);
  CHECK(s.nnz() == 4);
  const DenseMatrix d = s.to_dense();
  CHECK(d(0, 0) == 2.0);
  CHECK(d(0, 3) == 1.5);
  CHECK(d(1, 2) == -3.0);
  CHECK(d(2, 1) == 5.0);
  CHECK(d(2, 0) == 0.0);

  CHECK_THROWS_AS(
      SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}}),
      std::invalid_argument);
  CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{2, 0, 1.0}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      SparseMatrix::from_triplets(
          2, 2, {{0, 0, std::numeric_limits<double>::quiet_NaN()}}),
      std::invalid_argument);
}

TEST_CASE("sparse round-trips through dense and drops exact zeros",
          "[matrix]") {
  std::mt19937_64 gen(7);
  DenseMatrix d = oracle::random_matrix(gen, 6, 9, -1.0, 1.0);
  // Punch a pattern of holes.
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 9; ++j) {
      if ((i + j) % 3 == 0) d(i, j) = 0.0;
    }
  }
  const SparseMatrix s = SparseMatrix::from_dense(d);
  std::size_t expected_nnz = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 9; ++j) {
      if (d(i, j) != 0.0) ++expected_nnz;
    }
  }
  CHECK(s.nnz() == expected_nnz);
  CHECK(s.to_dense() == d);
}

TEST_CASE("compensated summation survives catastrophic cancellation",
          "[linalg]") {
  enmf::CompensatedSum sum;
  sum.add(1e16);
  sum.add(1.0);
  sum.add(-1e16);
  CHECK(sum.value() == 1.0);

  // Many small terms after a large one: plain accumulation would lose them.
  enmf::CompensatedSum sum2;
  sum2.add(1e16);
  for (int i = 0; i < 1000; ++i) sum2.add(0.5);
  sum2.add(-1e16);
  CHECK(sum2.value() == 500.0);
}

TEST_CASE("gram matches naive reference and is exactly symmetric",
          "[linalg]") {
  std::mt19937_64 gen(11);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t m = 1 + gen() % 40;
    const std::size_t r = 1 + gen() % 12;
    const DenseMatrix w = oracle::random_matrix(gen, m, r, -2.0, 2.0);
    const DenseMatrix g = enmf::gram(w);
    CHECK(max_rel_diff(g, oracle::gram(w)) < 1e-12);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        CHECK(g(i, j) == g(j, i));  // bitwise, not merely approximate
      }
    }
  }
}

TEST_CASE("cross products match naive reference", "[linalg]") {
  std::mt19937_64 gen(13);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t m = 1 + gen() % 30;
    const std::size_t n = 1 + gen() % 30;
    const std::size_t r = 1 + gen() % 8;
    const DenseMatrix w = oracle::random_matrix(gen, m, r, -1.0, 1.0);
    const DenseMatrix h = oracle::random_matrix(gen, r, n, -1.0, 1.0);
    const DenseMatrix x = oracle::random_matrix(gen, m, n, -1.0, 1.0);
    CHECK(max_rel_diff(enmf::cross_wx(w, x),
                       oracle::matmul(w.transposed(), x)) < 1e-12);
    CHECK(max_rel_diff(enmf::cross_xht(x, h),
                       oracle::matmul(x, h.transposed())) < 1e-12);
    CHECK(max_rel_diff(enmf::multiply(w, h), oracle::matmul(w, h)) < 1e-12);
  }
}

TEST_CASE("sparse kernels agree with their dense counterparts", "[linalg]") {
  std::mt19937_64 gen(17);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t m = 5 + gen() % 20;
    const std::size_t n = 5 + gen() % 20;
    const std::size_t r = 1 + gen() % 6;
    DenseMatrix xd = oracle::random_matrix(gen, m, n);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if ((i * 31 + j * 7) % 4 != 0) xd(i, j) = 0.0;  // ~75% sparse
      }
    }
    const SparseMatrix xs = SparseMatrix::from_dense(xd);
    const DenseMatrix w = oracle::random_matrix(gen, m, r);
    const DenseMatrix h = oracle::random_matrix(gen, r, n);
    CHECK(max_rel_diff(enmf::cross_wx(w, xs), enmf::cross_wx(w, xd)) < 1e-13);
    CHECK(max_rel_diff(enmf::cross_xht(xs, h), enmf::cross_xht(xd, h)) <
          1e-13);
    CHECK(enmf::frob_norm_sq(xs) ==
          Catch::Approx(enmf::frob_norm_sq(xd)).epsilon(1e-13));
    const DenseMatrix y = oracle::random_matrix(gen, m, n, -1.0, 1.0);
    CHECK(enmf::frob_inner(xs, y) ==
          Catch::Approx(enmf::frob_inner(xd, y)).epsilon(1e-13).margin(1e-13));
  }
}

TEST_CASE("frobenius inner product and norm match naive reference",
          "[linalg]") {
  std::mt19937_64 gen(19);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t m = 1 + gen() % 25;
    const std::size_t n = 1 + gen() % 25;
    const DenseMatrix a = oracle::random_matrix(gen, m, n, -3.0, 3.0);
    const DenseMatrix b = oracle::random_matrix(gen, m, n, -3.0, 3.0);
    CHECK(enmf::frob_inner(a, b) ==
          Catch::Approx(oracle::frob_inner(a, b)).epsilon(1e-12).margin(
              1e-12));
    CHECK(enmf::frob_norm_sq(a) ==
          Catch::Approx(oracle::frob_inner(a, a)).epsilon(1e-12));
  }
}

TEST_CASE("seeded fills are deterministic and lie in the unit interval",
          "[rng]") {
  const DenseMatrix a = enmf::uniform_matrix(8, 5, 1234);
  const DenseMatrix b = enmf::uniform_matrix(8, 5, 1234);
  const DenseMatrix c = enmf::uniform_matrix(8, 5, 1235);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      CHECK(a(i, j) >= 0.0);
      CHECK(a(i, j) < 1.0);
    }
  }
}

TEST_CASE("fill order is row-major from a single stream", "[rng]") {
  std::mt19937_64 gen(42);
  DenseMatrix manual(3, 4);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      manual(i, j) = enmf::uniform_unit(gen);
    }
  }
  CHECK(manual == enmf::uniform_matrix(3, 4, 42));
}

TEST_CASE("seed mixing separates nearby coordinates", "[rng]") {
  CHECK(enmf::mix_seed(1, 0, 0) != enmf::mix_seed(1, 0, 1));
  CHECK(enmf::mix_seed(1, 0, 0) != enmf::mix_seed(1, 1, 0));
  CHECK(enmf::mix_seed(1, 2, 3) != enmf::mix_seed(2, 2, 3));
  CHECK(enmf::mix_seed(5, 7, 9) == enmf::mix_seed(5, 7, 9));
  // Sequential bases must not produce sequential streams.
  const DenseMatrix a = enmf::uniform_matrix(4, 4, enmf::mix_seed(100, 0, 0));
  const DenseMatrix b = enmf::uniform_matrix(4, 4, enmf::mix_seed(101, 0, 0));
  CHECK_FALSE(a == b);
}

TEST_CASE("gram cache stamps detect reuse after invalidation", "[linalg]") {
  std::mt19937_64 gen(23);
  const DenseMatrix w = oracle::random_matrix(gen, 6, 3);
  const DenseMatrix x = oracle::random_matrix(gen, 6, 7);
  enmf::GramCache cache;
  cache.gram = enmf::gram(w);
  cache.cross = enmf::cross_wx(w, x);
  cache.stamp = 4;
  CHECK(cache.stamp == 4);
  cache.stamp = 5;  // caller invalidated; consumers must notice
  CHECK(cache.stamp != 4);
}
