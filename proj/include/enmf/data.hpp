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

#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "enmf/engine.hpp"
#include "enmf/matrix.hpp"
#include "enmf/rng.hpp"

namespace enmf {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class UnsupportedFormat : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Synthetic problem generators. Each consumes one mt19937_64 stream seeded
// directly with `seed`; matrices are filled row-major, and where several are
// produced, in the order documented on the function.

/// Factors of an exactly rank-r nonnegative matrix: W (m x r) then H (r x n),
/// all entries uniform [0, 1).
inline std::pair<DenseMatrix, DenseMatrix> lowrank_factors(std::size_t m, std::size_t n,
                                                           std::size_t r, std::uint64_t seed) {
  if (r == 0 || r > std::min(m, n)) {
    throw std::invalid_argument("lowrank_factors: need 1 <= r <= min(m, n)");
  }
  std::mt19937_64 gen(seed);
  DenseMatrix w(m, r, 0.0), h(r, n, 0.0);
  fill_uniform(w, gen);
  fill_uniform(h, gen);
  return {std::move(w), std::move(h)};
}

/// X = W H for uniform random W, H; the product of nonnegative factors, so
/// an exact nonnegative rank-r factorization exists.
inline DenseMatrix gen_lowrank(std::size_t m, std::size_t n, std::size_t r,
                               std::uint64_t seed) {
  auto [w, h] = lowrank_factors(m, n, r, seed);
  return multiply(w, h);
}

/// Dense matrix with i.i.d. uniform [0, 1) entries; almost surely of full
/// rank, so no nonnegative factorization of lower rank is exact.
inline DenseMatrix gen_fullrank(std::size_t m, std::size_t n, std::uint64_t seed) {
  return uniform_matrix(m, n, seed);
}

/// Initial factor pair for a solver run: W (m x r) then H (r x n) from one
/// stream, entries uniform [0, 1).
inline std::pair<DenseMatrix, DenseMatrix> random_init(std::size_t m, std::size_t n,
                                                       std::size_t r, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  DenseMatrix w(m, r, 0.0), h(r, n, 0.0);
  fill_uniform(w, gen);
  fill_uniform(h, gen);
  return {std::move(w), std::move(h)};
}

// ---------------------------------------------------------------------------
// Number formatting and parsing. Values are written with the shortest
// decimal form that parses back to the same bits, so write/read round trips
// are exact.

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline bool next_token(std::string_view& s, std::string_view& tok) {
  std::size_t i = 0;
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  if (i == s.size()) return false;
  std::size_t j = i;
  while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
  tok = s.substr(i, j - i);
  s.remove_prefix(j);
  return true;
}

inline double parse_double(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw ParseError("malformed number '" + std::string(tok) + "'", line);
  }
  return v;
}

inline std::size_t parse_index(std::string_view tok, std::size_t line) {
  std::size_t v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw ParseError("malformed integer '" + std::string(tok) + "'", line);
  }
  return v;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Matrix Market exchange format, coordinate real general only. Indices are
// 1-based in the file and 0-based in memory.

inline SparseMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(in, line)) throw ParseError("empty file", 0);
  ++lineno;
  {
    std::string_view rest(line);
    std::string_view banner, object, format, field, symmetry;
    if (!detail::next_token(rest, banner) || detail::lower(banner) != "%%matrixmarket") {
      throw ParseError("missing %%MatrixMarket banner", lineno);
    }
    if (!detail::next_token(rest, object) || !detail::next_token(rest, format) ||
        !detail::next_token(rest, field) || !detail::next_token(rest, symmetry)) {
      throw ParseError("banner needs object, format, field and symmetry", lineno);
    }
    const std::string obj = detail::lower(object), fmt = detail::lower(format),
                      fld = detail::lower(field), sym = detail::lower(symmetry);
    if (obj != "matrix") throw UnsupportedFormat("unsupported object '" + obj + "'");
    if (fmt != "coordinate") throw UnsupportedFormat("unsupported format '" + fmt + "'");
    if (fld != "real" && fld != "integer") {
      throw UnsupportedFormat("unsupported field '" + fld + "'");
    }
    if (sym != "general") throw UnsupportedFormat("unsupported symmetry '" + sym + "'");
  }

  // Size line: first non-comment, non-blank line after the banner.
  std::size_t rows = 0, cols = 0, nnz = 0;
  for (;;) {
    if (!std::getline(in, line)) throw ParseError("missing size line", lineno);
    ++lineno;
    const std::string_view t = detail::trim(line);
    if (t.empty() || t.front() == '%') continue;
    std::string_view rest(line), tok;
    if (!detail::next_token(rest, tok)) throw ParseError("missing row count", lineno);
    rows = detail::parse_index(tok, lineno);
    if (!detail::next_token(rest, tok)) throw ParseError("missing column count", lineno);
    cols = detail::parse_index(tok, lineno);
    if (!detail::next_token(rest, tok)) throw ParseError("missing entry count", lineno);
    nnz = detail::parse_index(tok, lineno);
    if (detail::next_token(rest, tok)) throw ParseError("trailing tokens on size line", lineno);
    break;
  }
  if (rows == 0 || cols == 0) throw ParseError("matrix dimensions must be positive", lineno);

  std::vector<SparseMatrix::Entry> entries;
  entries.reserve(nnz);
  while (entries.size() < nnz) {
    if (!std::getline(in, line)) {
      throw ParseError("expected " + std::to_string(nnz) + " entries, found " +
                           std::to_string(entries.size()),
                       lineno);
    }
    ++lineno;
    const std::string_view t = detail::trim(line);
    if (t.empty()) continue;
    std::string_view rest(line), tok;
    detail::next_token(rest, tok);
    const std::size_t i = detail::parse_index(tok, lineno);
    if (!detail::next_token(rest, tok)) throw ParseError("entry missing column index", lineno);
    const std::size_t j = detail::parse_index(tok, lineno);
    if (!detail::next_token(rest, tok)) throw ParseError("entry missing value", lineno);
    const double v = detail::parse_double(tok, lineno);
    if (detail::next_token(rest, tok)) throw ParseError("trailing tokens on entry line", lineno);
    if (i < 1 || i > rows || j < 1 || j > cols) {
      throw ParseError("entry index (" + std::to_string(i) + ", " + std::to_string(j) +
                           ") out of bounds",
                       lineno);
    }
    entries.push_back({i - 1, j - 1, v});
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (!detail::trim(line).empty()) throw ParseError("unexpected content after last entry", lineno);
  }
  try {
    return SparseMatrix::from_triplets(rows, cols, std::move(entries));
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), 0);
  }
}

inline void write_matrix_market(const std::string& path, const SparseMatrix& x) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << x.rows() << ' ' << x.cols() << ' ' << x.nnz() << '\n';
  const auto& off = x.offsets();
  const auto& cidx = x.col_indices();
  const auto& vals = x.values();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t p = off[i]; p < off[i + 1]; ++p) {
      out << (i + 1) << ' ' << (cidx[p] + 1) << ' ' << format_double(vals[p]) << '\n';
    }
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Headerless CSV for dense matrices: one row per line, comma separated.

inline DenseMatrix read_dense_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, lineno = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv(line);
    if (!sv.empty() && sv.back() == '\r') sv.remove_suffix(1);
    std::size_t count = 0;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = sv.find(',', start);
      const std::string_view cell =
          detail::trim(sv.substr(start, comma == std::string_view::npos ? comma : comma - start));
      if (cell.empty()) throw ParseError("empty cell", lineno);
      values.push_back(detail::parse_double(cell, lineno));
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw ParseError("row has " + std::to_string(count) + " values, expected " +
                           std::to_string(cols),
                       lineno);
    }
    ++rows;
  }
  if (rows == 0) throw ParseError("empty file", 0);
  return DenseMatrix(rows, cols, std::move(values));
}

inline void write_dense_csv(const std::string& path, const DenseMatrix& x) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double* row = x.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(row[j]);
    }
    out << '\n';
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Per-run trace CSV. One row per outer iteration (row 0 is the initial
// pair); E is the relative error shifted by the best value the comparison
// pool reached, so log plots bottom out at the true floor.

inline void write_run_csv(const std::string& path, const RunRecord& record, double e_min = 0.0) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "iter,elapsed_s,rel_err,E,beta,restarted\n";
  for (const IterationRecord& it : record.iterations) {
    out << it.iteration << ',' << format_double(it.elapsed_seconds) << ','
        << format_double(it.relative_error) << ',' << format_double(it.relative_error - e_min)
        << ',' << format_double(it.beta) << ',' << (it.restarted ? '1' : '0') << '\n';
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace enmf
