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
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "enmf/data.hpp"
#include "enmf/engine.hpp"

namespace enmf {

// Benchmark harness: runs a grid of (dataset, initialization, algorithm)
// solves with shared initial factors per (dataset, initialization) pair,
// aggregates error curves and final-error rankings, and writes CSV/JSON
// artifacts. All orders are canonical (dataset-major, then init, then
// algorithm) so reruns produce byte-identical files.

class MixedDatasets : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class MissingRun : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DatasetKind { lowrank, fullrank, file };

inline const char* to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::lowrank: return "lowrank";
    case DatasetKind::fullrank: return "fullrank";
    case DatasetKind::file: return "file";
  }
  return "?";
}

struct DatasetSpec {
  DatasetKind kind = DatasetKind::lowrank;
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t r = 0;  // factorization rank used by every run on this dataset
  std::uint64_t seed = 0;
  std::string path;  // kind == file only
  std::string name;  // optional label override for output files

  void validate() const {
    if (r == 0) throw std::invalid_argument("DatasetSpec: rank must be >= 1");
    if (kind == DatasetKind::file) {
      if (path.empty()) throw std::invalid_argument("DatasetSpec: file dataset needs a path");
      return;
    }
    if (m == 0 || n == 0) throw std::invalid_argument("DatasetSpec: dimensions must be >= 1");
    if (r > std::min(m, n)) {
      throw std::invalid_argument("DatasetSpec: rank exceeds min(m, n)");
    }
  }
};

inline std::string sanitize_label(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '_';
    out.push_back(ok ? c : '-');
  }
  return out;
}

inline std::string dataset_label(const DatasetSpec& d, std::size_t index) {
  if (!d.name.empty()) return sanitize_label(d.name);
  return std::string(to_string(d.kind)) + std::to_string(index);
}

struct AlgorithmSpec {
  std::string name;
  SolverConfig config;
};

/// Named solver presets. The extrapolated exact variants grow the momentum
/// weight aggressively; the coordinate-sweep variants, whose per-iteration
/// error is noisier, grow it gently.
inline SolverConfig algorithm_config(const std::string& name) {
  SolverConfig c;
  if (name == "anls") {
    c.inner_h = c.inner_w = InnerSolver::exact;
    c.extrapolation_enabled = false;
  } else if (name == "e-anls-hp1" || name == "e-anls-hp3") {
    c.inner_h = c.inner_w = InnerSolver::exact;
    c.hp = name == "e-anls-hp1" ? 1 : 3;
    c.beta0 = 0.5;
    c.gamma = 1.1;
    c.gamma_bar = 1.05;
    c.eta = 1.5;
  } else if (name == "ahals") {
    c.inner_h = c.inner_w = InnerSolver::hals;
    c.hp = 3;
    c.extrapolation_enabled = false;
  } else if (name == "e-ahals-hp1" || name == "e-ahals-hp3") {
    c.inner_h = c.inner_w = InnerSolver::hals;
    c.hp = name == "e-ahals-hp1" ? 1 : 3;
    c.beta0 = 0.5;
    c.gamma = 1.01;
    c.gamma_bar = 1.005;
    c.eta = 1.5;
  } else {
    throw std::invalid_argument("unknown algorithm '" + name + "'");
  }
  return c;
}

inline AlgorithmSpec make_algorithm(const std::string& name) {
  return {name, algorithm_config(name)};
}

inline const std::vector<std::string>& default_algorithms() {
  static const std::vector<std::string> names = {"anls",  "e-anls-hp1",  "e-anls-hp3",
                                                 "ahals", "e-ahals-hp1", "e-ahals-hp3"};
  return names;
}

struct Budget {
  std::size_t max_iterations = 100;
  double max_seconds = std::numeric_limits<double>::infinity();
};

struct SuiteSpec {
  std::vector<DatasetSpec> datasets;
  std::vector<AlgorithmSpec> algorithms;
  std::size_t inits_per_dataset = 10;
  Budget budget;
  std::uint64_t base_seed = 1;
  std::size_t threads = 1;  // 0 = hardware concurrency
  // With wall timing off (and no seconds budget) elapsed fields are zero
  // and suite outputs are bit-reproducible across reruns.
  bool wall_timing = false;

  void validate() const {
    if (datasets.empty()) throw std::invalid_argument("SuiteSpec: need at least one dataset");
    if (algorithms.empty()) throw std::invalid_argument("SuiteSpec: need at least one algorithm");
    if (inits_per_dataset == 0) {
      throw std::invalid_argument("SuiteSpec: inits_per_dataset must be >= 1");
    }
    if (!(budget.max_seconds > 0.0)) {
      throw std::invalid_argument("SuiteSpec: max_seconds must be > 0");
    }
    for (const DatasetSpec& d : datasets) d.validate();
  }
};

struct RunResult {
  std::size_t dataset_index = 0;
  std::size_t init_index = 0;
  std::size_t algorithm_index = 0;
  RunRecord record;
  bool failed = false;
  std::string failure;
};

struct SuiteResults {
  SuiteSpec spec;
  std::vector<RunResult> runs;  // canonical (dataset, init, algorithm) order

  std::size_t failed_count() const {
    std::size_t c = 0;
    for (const RunResult& r : runs) c += r.failed ? 1 : 0;
    return c;
  }
};

using DataMatrix = std::variant<DenseMatrix, SparseMatrix>;

inline std::size_t data_rows(const DataMatrix& x) {
  return std::visit([](const auto& m) { return m.rows(); }, x);
}

inline std::size_t data_cols(const DataMatrix& x) {
  return std::visit([](const auto& m) { return m.cols(); }, x);
}

inline DataMatrix load_dataset(const DatasetSpec& d) {
  d.validate();
  switch (d.kind) {
    case DatasetKind::lowrank:
      return gen_lowrank(d.m, d.n, d.r, d.seed);
    case DatasetKind::fullrank:
      return gen_fullrank(d.m, d.n, d.seed);
    case DatasetKind::file: {
      const std::string ext = std::filesystem::path(d.path).extension().string();
      DataMatrix x = [&]() -> DataMatrix {
        if (ext == ".mtx" || ext == ".mm") return read_matrix_market(d.path);
        if (ext == ".csv") return read_dense_csv(d.path);
        throw UnsupportedFormat("cannot infer format of '" + d.path +
                                "' (expected .mtx, .mm or .csv)");
      }();
      if (d.r > std::min(data_rows(x), data_cols(x))) {
        throw std::invalid_argument("DatasetSpec: rank exceeds min dimension of '" + d.path + "'");
      }
      return x;
    }
  }
  throw std::logic_error("unreachable dataset kind");
}

/// Runs the full grid. Every (dataset, init) pair gets one initial factor
/// pair, derived from mix_seed(base_seed, dataset index, init index) and
/// shared by all algorithms. Failures are captured per run, not thrown.
inline SuiteResults run_suite(const SuiteSpec& spec) {
  spec.validate();
  std::vector<DataMatrix> data;
  data.reserve(spec.datasets.size());
  for (const DatasetSpec& d : spec.datasets) data.push_back(load_dataset(d));

  const bool wall = spec.wall_timing || std::isfinite(spec.budget.max_seconds);
  const TimingMode tm = wall ? TimingMode::wall : TimingMode::none;

  const std::size_t nd = spec.datasets.size();
  const std::size_t ni = spec.inits_per_dataset;
  const std::size_t na = spec.algorithms.size();
  const std::size_t total = nd * ni * na;

  SuiteResults out;
  out.spec = spec;
  out.runs.resize(total);

  const auto task = [&](std::size_t t) {
    const std::size_t a = t % na;
    const std::size_t i = (t / na) % ni;
    const std::size_t d = t / (na * ni);
    RunResult& rr = out.runs[t];
    rr.dataset_index = d;
    rr.init_index = i;
    rr.algorithm_index = a;
    try {
      auto [w0, h0] = random_init(data_rows(data[d]), data_cols(data[d]), spec.datasets[d].r,
                                  mix_seed(spec.base_seed, d, i));
      SolverConfig cfg = spec.algorithms[a].config;
      cfg.max_outer_iterations = spec.budget.max_iterations;
      cfg.max_seconds = spec.budget.max_seconds;
      rr.record =
          std::visit([&](const auto& xm) { return run(xm, w0, h0, cfg, tm); }, data[d]);
    } catch (const std::exception& e) {
      rr.failed = true;
      rr.failure = e.what();
    }
  };

  std::size_t nthreads = spec.threads != 0
                             ? spec.threads
                             : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  nthreads = std::min(nthreads, total);
  if (nthreads <= 1) {
    for (std::size_t t = 0; t < total; ++t) task(t);
  } else {
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
      for (;;) {
        const std::size_t t = next.fetch_add(1);
        if (t >= total) return;
        task(t);
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k + 1 < nthreads; ++k) pool.emplace_back(worker);
    worker();
    for (std::thread& th : pool) th.join();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Error curves. E(k) is the relative error minus an error floor e_min:
// zero where an exact factorization is known to exist, otherwise the best
// final relative error any run in the pool reached.

enum class EminPolicy { zero, shared_best };

struct CurvePoint {
  std::size_t iteration = 0;
  double elapsed_seconds = 0.0;
  double e = 0.0;
};

struct RunCurve {
  std::size_t dataset_index = 0;
  std::size_t init_index = 0;
  std::size_t algorithm_index = 0;
  std::vector<CurvePoint> points;
};

struct AlgorithmCurve {
  std::size_t algorithm_index = 0;
  std::vector<CurvePoint> points;
};

struct CurveSet {
  double e_min = 0.0;
  std::vector<RunCurve> per_run;
  std::vector<AlgorithmCurve> per_algorithm;
};

/// Builds per-run and per-algorithm mean curves for the given runs (failed
/// ones are skipped). Under the shared_best policy all runs must come from
/// one dataset; mixing datasets there would average incompatible floors.
/// Shorter runs are padded with their final value before averaging.
inline CurveSet compute_curves(const std::vector<const RunResult*>& selected,
                               EminPolicy policy) {
  CurveSet cs;
  std::vector<const RunResult*> ok;
  for (const RunResult* r : selected) {
    if (r != nullptr && !r->failed && !r->record.iterations.empty()) ok.push_back(r);
  }
  if (policy == EminPolicy::shared_best) {
    for (const RunResult* r : ok) {
      if (r->dataset_index != ok.front()->dataset_index) {
        throw MixedDatasets("compute_curves: shared_best floor across different datasets");
      }
    }
    cs.e_min = std::numeric_limits<double>::infinity();
    for (const RunResult* r : ok) {
      cs.e_min = std::min(cs.e_min, r->record.final_relative_error());
    }
    if (!std::isfinite(cs.e_min)) cs.e_min = 0.0;
  }

  for (const RunResult* r : ok) {
    RunCurve rc;
    rc.dataset_index = r->dataset_index;
    rc.init_index = r->init_index;
    rc.algorithm_index = r->algorithm_index;
    rc.points.reserve(r->record.iterations.size());
    for (const IterationRecord& it : r->record.iterations) {
      rc.points.push_back({it.iteration, it.elapsed_seconds, it.relative_error - cs.e_min});
    }
    cs.per_run.push_back(std::move(rc));
  }

  std::vector<std::size_t> algos;
  for (const RunCurve& rc : cs.per_run) algos.push_back(rc.algorithm_index);
  std::sort(algos.begin(), algos.end());
  algos.erase(std::unique(algos.begin(), algos.end()), algos.end());

  for (std::size_t a : algos) {
    std::vector<const RunCurve*> group;
    std::size_t len = 0;
    for (const RunCurve& rc : cs.per_run) {
      if (rc.algorithm_index == a) {
        group.push_back(&rc);
        len = std::max(len, rc.points.size());
      }
    }
    AlgorithmCurve ac;
    ac.algorithm_index = a;
    ac.points.resize(len);
    for (std::size_t p = 0; p < len; ++p) {
      double esum = 0.0, tsum = 0.0;
      for (const RunCurve* rc : group) {
        const CurvePoint& cp = p < rc->points.size() ? rc->points[p] : rc->points.back();
        esum += cp.e;
        tsum += cp.elapsed_seconds;
      }
      ac.points[p].iteration = p;
      ac.points[p].e = esum / static_cast<double>(group.size());
      ac.points[p].elapsed_seconds = tsum / static_cast<double>(group.size());
    }
    cs.per_algorithm.push_back(std::move(ac));
  }
  return cs;
}

/// Curves for one dataset of a finished suite, with the floor implied by
/// the dataset kind: zero for exact low-rank synthetics, shared best final
/// error otherwise.
inline CurveSet compute_curves_for_dataset(const SuiteResults& res, std::size_t dataset_index) {
  std::vector<const RunResult*> sel;
  for (const RunResult& r : res.runs) {
    if (r.dataset_index == dataset_index) sel.push_back(&r);
  }
  const EminPolicy policy = res.spec.datasets.at(dataset_index).kind == DatasetKind::lowrank
                                ? EminPolicy::zero
                                : EminPolicy::shared_best;
  return compute_curves(sel, policy);
}

// ---------------------------------------------------------------------------
// Final-error ranking across algorithms.

struct RankingRow {
  std::string algorithm;
  double mean_final_rel_err = 0.0;
  double std_final_rel_err = 0.0;
  // ranking[i] = number of (dataset, init) groups where this algorithm had
  // the (i+1)-th smallest final relative error.
  std::vector<std::size_t> ranking;
};

struct RankingTable {
  std::vector<RankingRow> rows;  // same order as the suite's algorithm list
  std::size_t group_count = 0;
  std::size_t tie_groups = 0;  // groups where a tie was broken by list order
};

inline RankingTable rank_final_errors(const SuiteResults& res) {
  const std::size_t na = res.spec.algorithms.size();
  const std::size_t ni = res.spec.inits_per_dataset;
  const std::size_t nd = res.spec.datasets.size();

  RankingTable table;
  table.rows.resize(na);
  for (std::size_t a = 0; a < na; ++a) {
    table.rows[a].algorithm = res.spec.algorithms[a].name;
    table.rows[a].ranking.assign(na, 0);
  }

  std::vector<std::vector<double>> finals(na);
  std::vector<double> errs(na);
  std::vector<std::size_t> order(na);
  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t i = 0; i < ni; ++i) {
      for (std::size_t a = 0; a < na; ++a) {
        const RunResult& rr = res.runs[(d * ni + i) * na + a];
        if (rr.failed || rr.record.iterations.empty()) {
          throw MissingRun("rank_final_errors: no result for dataset " + std::to_string(d) +
                           ", init " + std::to_string(i) + ", algorithm '" +
                           res.spec.algorithms[a].name + "'" +
                           (rr.failed ? ": " + rr.failure : ""));
        }
        errs[a] = rr.record.final_relative_error();
        finals[a].push_back(errs[a]);
      }
      for (std::size_t a = 0; a < na; ++a) order[a] = a;
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t x, std::size_t y) { return errs[x] < errs[y]; });
      bool tied = false;
      for (std::size_t pos = 0; pos < na; ++pos) {
        ++table.rows[order[pos]].ranking[pos];
        if (pos > 0 && errs[order[pos]] == errs[order[pos - 1]]) tied = true;
      }
      if (tied) ++table.tie_groups;
      ++table.group_count;
    }
  }

  for (std::size_t a = 0; a < na; ++a) {
    const std::vector<double>& v = finals[a];
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    table.rows[a].mean_final_rel_err = mean;
    table.rows[a].std_final_rel_err =
        v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
  }
  return table;
}

// ---------------------------------------------------------------------------
// Artifact emission.

struct EmitOptions {
  bool run_csv = true;
  bool curve_csv = true;
  bool summary_json = true;
};

/// Error floor per dataset, as used for the emitted E columns.
inline std::vector<double> dataset_error_floors(const SuiteResults& res) {
  std::vector<double> floors(res.spec.datasets.size(), 0.0);
  for (std::size_t d = 0; d < floors.size(); ++d) {
    if (res.spec.datasets[d].kind == DatasetKind::lowrank) continue;
    double best = std::numeric_limits<double>::infinity();
    for (const RunResult& r : res.runs) {
      if (r.dataset_index == d && !r.failed && !r.record.iterations.empty()) {
        best = std::min(best, r.record.final_relative_error());
      }
    }
    floors[d] = std::isfinite(best) ? best : 0.0;
  }
  return floors;
}

/// Writes per-run CSV traces, per-algorithm mean curve CSVs and a summary
/// JSON into out_dir (created if missing). Returns the paths written, in
/// order. File contents depend only on the results, so a rerun of the same
/// deterministic suite reproduces them byte for byte.
inline std::vector<std::string> emit(const SuiteResults& res, const std::string& out_dir,
                                     const EmitOptions& opts = {}) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir + "': " + ec.message());

  std::vector<std::string> written;
  const std::vector<double> floors = dataset_error_floors(res);

  if (opts.run_csv) {
    for (const RunResult& r : res.runs) {
      if (r.failed) continue;
      const std::string path =
          (fs::path(out_dir) /
           ("run_" + dataset_label(res.spec.datasets[r.dataset_index], r.dataset_index) + "_" +
            sanitize_label(res.spec.algorithms[r.algorithm_index].name) + "_" +
            std::to_string(r.init_index) + ".csv"))
              .string();
      write_run_csv(path, r.record, floors[r.dataset_index]);
      written.push_back(path);
    }
  }

  if (opts.curve_csv) {
    for (std::size_t d = 0; d < res.spec.datasets.size(); ++d) {
      const CurveSet cs = compute_curves_for_dataset(res, d);
      for (const AlgorithmCurve& ac : cs.per_algorithm) {
        const std::string path =
            (fs::path(out_dir) /
             ("curve_" + dataset_label(res.spec.datasets[d], d) + "_" +
              sanitize_label(res.spec.algorithms[ac.algorithm_index].name) + ".csv"))
                .string();
        std::ofstream out(path);
        if (!out) throw IoError("cannot open '" + path + "' for writing");
        out << "iter,elapsed_s,E_mean\n";
        for (const CurvePoint& cp : ac.points) {
          out << cp.iteration << ',' << format_double(cp.elapsed_seconds) << ','
              << format_double(cp.e) << '\n';
        }
        if (!out) throw IoError("write to '" + path + "' failed");
        written.push_back(path);
      }
    }
  }

  if (opts.summary_json) {
    nlohmann::ordered_json j;
    j["base_seed"] = res.spec.base_seed;
    j["inits_per_dataset"] = res.spec.inits_per_dataset;
    j["budget"]["max_iterations"] = res.spec.budget.max_iterations;
    if (std::isfinite(res.spec.budget.max_seconds)) {
      j["budget"]["max_seconds"] = res.spec.budget.max_seconds;
    } else {
      j["budget"]["max_seconds"] = nullptr;
    }
    j["datasets"] = nlohmann::ordered_json::array();
    for (std::size_t d = 0; d < res.spec.datasets.size(); ++d) {
      const DatasetSpec& ds = res.spec.datasets[d];
      nlohmann::ordered_json jd;
      jd["label"] = dataset_label(ds, d);
      jd["kind"] = to_string(ds.kind);
      if (ds.kind == DatasetKind::file) {
        jd["path"] = ds.path;
      } else {
        jd["m"] = ds.m;
        jd["n"] = ds.n;
        jd["seed"] = ds.seed;
      }
      jd["rank"] = ds.r;
      jd["e_min"] = floors[d];
      j["datasets"].push_back(jd);
    }
    j["algorithms"] = nlohmann::ordered_json::array();
    for (const AlgorithmSpec& a : res.spec.algorithms) {
      nlohmann::ordered_json ja;
      ja["name"] = a.name;
      ja["inner_h"] = a.config.inner_h == InnerSolver::exact ? "exact" : "hals";
      ja["inner_w"] = a.config.inner_w == InnerSolver::exact ? "exact" : "hals";
      ja["extrapolation"] = a.config.extrapolation_enabled;
      if (a.config.extrapolation_enabled) {
        ja["hp"] = a.config.hp;
        ja["beta0"] = a.config.beta0;
        ja["gamma"] = a.config.gamma;
        ja["gamma_bar"] = a.config.gamma_bar;
        ja["eta"] = a.config.eta;
      }
      j["algorithms"].push_back(ja);
    }
    j["runs"] = nlohmann::ordered_json::array();
    for (const RunResult& r : res.runs) {
      nlohmann::ordered_json jr;
      jr["dataset"] = dataset_label(res.spec.datasets[r.dataset_index], r.dataset_index);
      jr["init"] = r.init_index;
      jr["algorithm"] = res.spec.algorithms[r.algorithm_index].name;
      if (r.failed) {
        jr["failed"] = true;
        jr["error"] = r.failure;
      } else {
        jr["failed"] = false;
        jr["iterations"] = r.record.iterations.empty() ? 0 : r.record.iterations.back().iteration;
        jr["final_rel_err"] = r.record.final_relative_error();
        std::size_t restarts = 0;
        for (const IterationRecord& it : r.record.iterations) restarts += it.restarted ? 1 : 0;
        jr["restarts"] = restarts;
      }
      j["runs"].push_back(jr);
    }
    if (res.failed_count() == 0) {
      const RankingTable table = rank_final_errors(res);
      j["ranking"] = nlohmann::ordered_json::array();
      for (const RankingRow& row : table.rows) {
        nlohmann::ordered_json jr;
        jr["algorithm"] = row.algorithm;
        jr["mean_final_rel_err"] = row.mean_final_rel_err;
        jr["std_final_rel_err"] = row.std_final_rel_err;
        jr["ranking"] = row.ranking;
        j["ranking"].push_back(jr);
      }
      j["group_count"] = table.group_count;
      j["tie_groups"] = table.tie_groups;
    } else {
      j["ranking"] = nullptr;
      j["failed_runs"] = res.failed_count();
    }

    const std::string path = (fs::path(out_dir) / "summary.json").string();
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write to '" + path + "' failed");
    written.push_back(path);
  }
  return written;
}

}  // namespace enmf
