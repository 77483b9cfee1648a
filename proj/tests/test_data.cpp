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

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <catch2/catch_amalgamated.hpp>
#include <enmf/data.hpp>
#include <enmf/engine.hpp>
#include <enmf/matrix.hpp>
#include <enmf/rng.hpp>

#include "oracles.hpp"

using enmf::DenseMatrix;
using enmf::SparseMatrix;

namespace {

// Unique scratch file path under the system temp directory.
std::string scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "enmf-data-tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("low-rank generator draws both factors from one stream", "[gen]") {
  const std::size_t m = 7, n = 6, r = 3;
  const auto [w, h] = enmf::lowrank_factors(m, n, r, 321);
  std::mt19937_64 gen(321);
  DenseMatrix w_ref(m, r), h_ref(r, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < r; ++j) w_ref(i, j) = enmf::uniform_unit(gen);
  }
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < n; ++j) h_ref(i, j) = enmf::uniform_unit(gen);
  }
  CHECK(w == w_ref);
  CHECK(h == h_ref);
  const DenseMatrix x = enmf::gen_lowrank(m, n, r, 321);
  CHECK(x == enmf::multiply(w, h));
  CHECK(x == enmf::gen_lowrank(m, n, r, 321));
}

TEST_CASE("full-rank generator is a plain seeded fill", "[gen]") {
  const DenseMatrix x = enmf::gen_fullrank(5, 9, 77);
  CHECK(x == enmf::uniform_matrix(5, 9, 77));
  CHECK_FALSE(x == enmf::gen_fullrank(5, 9, 78));
}

TEST_CASE("initial factor pairs are deterministic and in range", "[gen]") {
  const auto [w, h] = enmf::random_init(11, 9, 4, 55);
  CHECK(w.rows() == 11);
  CHECK(w.cols() == 4);
  CHECK(h.rows() == 4);
  CHECK(h.cols() == 9);
  CHECK(w.all_nonnegative());
  CHECK(h.all_nonnegative());
  CHECK(w.max_abs() < 1.0);
  CHECK(h.max_abs() < 1.0);
  const auto [w2, h2] = enmf::random_init(11, 9, 4, 55);
  CHECK(w == w2);
  CHECK(h == h2);
}

TEST_CASE("number formatting round-trips every double", "[format]") {
  const auto reparse = [](const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    REQUIRE(res.ec == std::errc());
    REQUIRE(res.ptr == s.data() + s.size());
    return v;
  };
  std::mt19937_64 gen(141);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const double tricky[] = {0.1,    1.0 / 3.0, 1e-300, 1e300,
                           123456789.123456789, 0.0,  5e-324};
  for (const double v : tricky) {
    CHECK(reparse(enmf::format_double(v)) == v);
  }
  for (int rep = 0; rep < 1000; ++rep) {
    const double v = std::ldexp(dist(gen), static_cast<int>(gen() % 64) - 32);
    CHECK(reparse(enmf::format_double(v)) == v);
  }
}

TEST_CASE("sparse files round-trip losslessly", "[matrixmarket]") {
  std::mt19937_64 gen(149);
  for (int rep = 0; rep < 5; ++rep) {
    const std::size_t m = 3 + gen() % 12;
    const std::size_t n = 3 + gen() % 12;
    DenseMatrix d = oracle::random_matrix(gen, m, n, -2.0, 2.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if ((gen() & 3) != 0) d(i, j) = 0.0;
      }
    }
    const SparseMatrix s = SparseMatrix::from_dense(d);
    const std::string path = scratch("roundtrip.mtx");
    enmf::write_matrix_market(path, s);
    const SparseMatrix back = enmf::read_matrix_market(path);
    CHECK(back.to_dense() == d);
  }
}

TEST_CASE("sparse reader accepts the standard layout", "[matrixmarket]") {
  const std::string path = scratch("wellformed.mtx");
  write_text(path,
             "%%MatrixMarket matrix coordinate real general\n"
             "% a comment between banner and size\n"
             "\n"
             "3 4 3\n"
             "1 1 2.5\n"
             "3 2 -1.25e-1\n"
             "2 4 7\n");
  const SparseMatrix s = enmf::read_matrix_market(path);
  const DenseMatrix d = s.to_dense();
  CHECK(d.rows() == 3);
  CHECK(d.cols() == 4);
  CHECK(d(0, 0) == 2.5);
  CHECK(d(2, 1) == -0.125);
  CHECK(d(1, 3) == 7.0);
  CHECK(s.nnz() == 3);
}

TEST_CASE("integer-valued sparse files are accepted", "[matrixmarket]") {
  const std::string path = scratch("integer.mtx");
  write_text(path,
             "%%MatrixMarket matrix coordinate integer general\n"
             "2 2 2\n"
             "1 1 3\n"
             "2 2 -4\n");
  const SparseMatrix s = enmf::read_matrix_market(path);
  CHECK(s.to_dense()(0, 0) == 3.0);
  CHECK(s.to_dense()(1, 1) == -4.0);
}

TEST_CASE("unsupported sparse variants are rejected up front",
          "[matrixmarket]") {
  const std::string p1 = scratch("pattern.mtx");
  write_text(p1,
             "%%MatrixMarket matrix coordinate pattern general\n"
             "2 2 1\n"
             "1 1\n");
  CHECK_THROWS_AS(enmf::read_matrix_market(p1), enmf::UnsupportedFormat);

  const std::string p2 = scratch("array.mtx");
  write_text(p2,
             "%%MatrixMarket matrix array real general\n"
             "2 2\n"
             "1.0\n1.0\n1.0\n1.0\n");
  CHECK_THROWS_AS(enmf::read_matrix_market(p2), enmf::UnsupportedFormat);

  const std::string p3 = scratch("symmetric.mtx");
  write_text(p3,
             "%%MatrixMarket matrix coordinate real symmetric\n"
             "2 2 1\n"
             "2 1 1.0\n");
  CHECK_THROWS_AS(enmf::read_matrix_market(p3), enmf::UnsupportedFormat);
}

TEST_CASE("malformed sparse entries report their line number",
          "[matrixmarket]") {
  const std::string path = scratch("badentry.mtx");
  write_text(path,
             "%%MatrixMarket matrix coordinate real general\n"
             "2 2 2\n"
             "1 1 1.0\n"
             "5 1 2.0\n");
  try {
    enmf::read_matrix_market(path);
    FAIL("expected a parse error");
  } catch (const enmf::ParseError& e) {
    CHECK(e.line() == 4);
  }

  const std::string dup = scratch("dup.mtx");
  write_text(dup,
             "%%MatrixMarket matrix coordinate real general\n"
             "2 2 2\n"
             "1 1 1.0\n"
             "1 1 2.0\n");
  CHECK_THROWS_AS(enmf::read_matrix_market(dup), enmf::ParseError);

  const std::string trailing = scratch("trailing.mtx");
  write_text(trailing,
             "%%MatrixMarket matrix coordinate real general\n"
             "1 1 1\n"
             "1 1 1.0\n"
             "1 1 extra junk\n");
  CHECK_THROWS_AS(enmf::read_matrix_market(trailing), enmf::ParseError);

  CHECK_THROWS_AS(enmf::read_matrix_market(scratch("does-not-exist.mtx")),
                  enmf::IoError);
}

TEST_CASE("dense csv round-trips losslessly", "[csv]") {
  std::mt19937_64 gen(151);
  for (int rep = 0; rep < 5; ++rep) {
    const DenseMatrix d =
        oracle::random_matrix(gen, 2 + gen() % 8, 2 + gen() % 8, -3.0, 3.0);
    const std::string path = scratch("roundtrip.csv");
    enmf::write_dense_csv(path, d);
    CHECK(enmf::read_dense_csv(path) == d);
  }
}

TEST_CASE("dense csv accepts windows line endings", "[csv]") {
  const std::string path = scratch("crlf.csv");
  write_text(path, "1.5,2\r\n-0.25,4\r\n");
  const DenseMatrix d = enmf::read_dense_csv(path);
  CHECK(d(0, 0) == 1.5);
  CHECK(d(0, 1) == 2.0);
  CHECK(d(1, 0) == -0.25);
  CHECK(d(1, 1) == 4.0);
}

TEST_CASE("ragged or empty csv cells are rejected with line numbers",
          "[csv]") {
  const std::string ragged = scratch("ragged.csv");
  write_text(ragged, "1,2,3\n4,5\n");
  try {
    enmf::read_dense_csv(ragged);
    FAIL("expected a parse error");
  } catch (const enmf::ParseError& e) {
    CHECK(e.line() == 2);
  }

  const std::string empty_cell = scratch("empty-cell.csv");
  write_text(empty_cell, "1,,3\n");
  CHECK_THROWS_AS(enmf::read_dense_csv(empty_cell), enmf::ParseError);

  const std::string empty = scratch("empty.csv");
  write_text(empty, "");
  CHECK_THROWS_AS(enmf::read_dense_csv(empty), enmf::ParseError);
}

TEST_CASE("iteration traces use the documented schema", "[runcsv]") {
  enmf::RunRecord rec;
  rec.norm_x = 10.0;
  enmf::IterationRecord r0;
  r0.iteration = 0;
  r0.error = 5.0;
  r0.relative_error = 0.5;
  r0.beta = 0.5;
  enmf::IterationRecord r1;
  r1.iteration = 1;
  r1.elapsed_seconds = 0.25;
  r1.error = 2.0;
  r1.relative_error = 0.2;
  r1.beta = 0.55;
  r1.restarted = true;
  rec.iterations = {r0, r1};

  const std::string path = scratch("trace.csv");
  enmf::write_run_csv(path, rec, /*e_min=*/0.05);
  const std::string text = read_text(path);
  std::istringstream lines(text);
  std::string line;
  REQUIRE(std::getline(lines, line));
  CHECK(line == "iter,elapsed_s,rel_err,E,beta,restarted");
  REQUIRE(std::getline(lines, line));
  CHECK(line == "0,0,0.5,0.45,0.5,0");
  REQUIRE(std::getline(lines, line));
  CHECK(line == "1,0.25,0.2,0.15000000000000002,0.55,1");
  CHECK_FALSE(std::getline(lines, line));

  // Re-emitting produces identical bytes.
  const std::string again = scratch("trace2.csv");
  enmf::write_run_csv(again, rec, 0.05);
  CHECK(read_text(again) == text);
}
