// Copyright 2026 The admmq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Batch commands behind the admmq executable: gen, solve, compare, oracle.
//
// Reports are JSON Lines. Every line carries "schema" and "record"; the
// record kinds are layer, trace, compare, median, oracle and oracle_ratio.
// wall_time_s is the only field that may differ between identical runs.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "admmq/error.hpp"
#include "admmq/grid.hpp"
#include "admmq/io.hpp"
#include "admmq/oracle.hpp"
#include "admmq/problem.hpp"
#include "admmq/solution.hpp"
#include "admmq/solvers.hpp"

namespace admmq {

inline constexpr const char* kReportSchema = "admmq.report/1";
inline const std::vector<std::string> kSolverNames = {"rtn", "gptq", "admmq"};

struct RunConfig {
  std::string solver = "all";  // rtn | gptq | admmq | all
  AdmmConfig admm;             // grid spec, fitting, local search live here
  double damp_factor = kDefaultDampFactor;
  DampingConvention damping = DampingConvention::kTrace;
  double lambda = 0.0;
  std::string baseline = "gptq";
  bool trace = false;
  std::size_t jobs = 1;
  OracleBudget budget;
  std::string report_path = "-";
  std::string table_path;      // empty: no TSV export
  std::string solutions_dir;   // empty: solutions are not written

  std::vector<std::string> solvers() const {
    if (solver == "all") return kSolverNames;
    return {solver};
  }

  void validate() const {
    auto known = [](const std::string& s) {
      return std::find(kSolverNames.begin(), kSolverNames.end(), s) !=
             kSolverNames.end();
    };
    if (solver != "all" && !known(solver)) {
      throw InvalidArgument("unknown solver '" + solver + "'");
    }
    if (!known(baseline)) {
      throw InvalidArgument("unknown baseline solver '" + baseline + "'");
    }
    if (!(damp_factor >= 0.0) || !(lambda >= 0.0)) {
      throw InvalidArgument("damping and lambda must be >= 0");
    }
    if (jobs == 0) throw InvalidArgument("jobs must be >= 1");
    admm.validate();
  }
};

struct SolverRun {
  QuantizedSolution solution;
  std::optional<ConvergenceTrace> trace;
  double wall_time_s = 0.0;
};

inline SolverRun run_solver(const std::string& name,
                            const LayerProblem& problem,
                            const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  SolverRun out;
  if (name == "rtn") {
    out.solution = solve_rtn(problem, config.admm.grid, config.admm.fitting);
  } else if (name == "gptq") {
    out.solution = solve_gptq(problem, config.admm.grid, config.admm.fitting);
  } else if (name == "admmq") {
    AdmmResult r = solve_admmq(problem, config.admm);
    out.solution = std::move(r.solution);
    if (config.trace) out.trace = std::move(r.trace);
  } else {
    throw InvalidArgument("unknown solver '" + name + "'");
  }
  out.wall_time_s = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start)
                        .count();
  return out;
}

struct LayerResult {
  std::string layer;
  std::vector<SolverRun> runs;
  double baseline_objective = 0.0;
};

inline std::string layer_id(const std::filesystem::path& path) {
  return path.stem().string();
}

inline LayerProblem load_problem(const std::filesystem::path& path,
                                 const RunConfig& config) {
  return to_layer_problem(read_problem_file(path), config.lambda,
                          config.damp_factor, config.damping);
}

inline LayerResult solve_layer(const std::filesystem::path& path,
                               const RunConfig& config) {
  LayerResult out;
  out.layer = layer_id(path);
  const LayerProblem problem = load_problem(path, config);
  std::optional<double> baseline;
  for (const auto& name : config.solvers()) {
    out.runs.push_back(run_solver(name, problem, config));
    if (name == config.baseline) baseline = out.runs.back().solution.objective;
  }
  out.baseline_objective =
      baseline ? *baseline
               : run_solver(config.baseline, problem, config).solution.objective;
  return out;
}

/// Runs `work(i)` for every index on up to `jobs` threads. Failures are
/// reported for the lowest failing index, tagged with its layer id.
template <typename Result, typename Work>
std::vector<Result> run_parallel(const std::vector<std::filesystem::path>& files,
                                 std::size_t jobs, Work work) {
  std::vector<std::optional<Result>> slots(files.size());
  std::vector<std::exception_ptr> errors(files.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) {
      try {
        slots[i] = work(files[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(jobs, files.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw Error("layer " + layer_id(files[i]) + ": " + e.what());
    }
  }
  std::vector<Result> out;
  out.reserve(files.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ---------------------------------------------------------------------------
// Report records

using Record = nlohmann::ordered_json;

inline Record record_header(const char* kind) {
  Record r;
  r["schema"] = kReportSchema;
  r["record"] = kind;
  return r;
}

inline Record nullable(double v) {
  return std::isfinite(v) ? Record(v) : Record(nullptr);
}

inline Record ratio_or_null(double numerator, double denominator) {
  return denominator > 0.0 ? Record(numerator / denominator) : Record(nullptr);
}

inline Record layer_record(const std::string& layer, const SolverRun& run,
                           const RunConfig& config, double baseline_objective) {
  const GridSpec& spec = run.solution.grid().spec();
  Record r = record_header("layer");
  r["layer"] = layer;
  r["solver"] = run.solution.solver;
  r["bits"] = spec.bits;
  r["granularity"] = to_string(spec.granularity);
  r["objective"] = run.solution.objective;
  r["baseline"] = config.baseline;
  r["relative_error"] = ratio_or_null(run.solution.objective, baseline_objective);
  r["iterations"] = run.solution.iterations;
  r["refresh_accepted"] = run.solution.refresh_accepted;
  r["wall_time_s"] = run.wall_time_s;
  return r;
}

inline Record trace_record(const std::string& layer, const IterationRecord& it) {
  Record r = record_header("trace");
  r["layer"] = layer;
  r["solver"] = "admmq";
  r["t"] = it.t;
  r["rho"] = it.rho;
  r["primal"] = it.primal;
  r["d_change"] = it.d_change;
  r["objective"] = it.objective;
  r["refresh_attempted"] = it.refresh_attempted;
  r["refresh_accepted"] = it.refresh_accepted;
  r["refresh_old_distance"] = nullable(it.refresh_old_distance);
  r["refresh_new_distance"] = nullable(it.refresh_new_distance);
  return r;
}

/// One report line with wall_time_s removed, for determinism comparisons.
inline std::string without_timing(const std::string& line) {
  Record r = Record::parse(line);
  r.erase("wall_time_s");
  return r.dump();
}

inline void write_lines(std::ostream& out, const std::vector<Record>& records) {
  for (const auto& r : records) out << r.dump() << '\n';
}

inline std::string format_double(double v, int precision = 10) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

inline std::string format_percent(double v) {
  if (!std::isfinite(v)) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << v << '%';
  return s.str();
}

inline double median(std::vector<double> v) {
  std::erase_if(v, [](double x) { return !std::isfinite(x); });
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// ---------------------------------------------------------------------------
// gen

struct GenOptions {
  SyntheticOptions synthetic;
  Payload payload = Payload::kActivations;
  ElementType element = ElementType::kFloat64;
};

inline ProblemFile make_problem_file(const GenOptions& opt) {
  SyntheticLayer layer = generate_layer(opt.synthetic);
  ProblemFile f;
  f.payload = opt.payload;
  f.element = opt.element;
  f.samples = static_cast<std::uint32_t>(opt.synthetic.samples);
  f.w_hat = std::move(layer.w_hat);
  f.data = opt.payload == Payload::kActivations
               ? std::move(layer.activations)
               : matmul_tn(layer.activations, layer.activations);
  if (opt.element == ElementType::kFloat32) {
    // Round once here so the stored file is what later reads see.
    for (double& v : f.w_hat.values()) v = static_cast<float>(v);
    for (double& v : f.data.values()) v = static_cast<float>(v);
  }
  return f;
}

inline void run_gen(const GenOptions& opt, const std::filesystem::path& out) {
  write_problem_file(out, make_problem_file(opt));
}

// ---------------------------------------------------------------------------
// solve

struct SolveOutput {
  std::vector<LayerResult> layers;
  std::vector<Record> records;
};

inline void write_solutions(const LayerResult& layer, const RunConfig& config) {
  if (config.solutions_dir.empty()) return;
  const std::filesystem::path dir(config.solutions_dir);
  std::filesystem::create_directories(dir);
  for (const auto& run : layer.runs) {
    detail::write_all(dir / (layer.layer + "." + run.solution.solver + ".qsls"),
                      encode_solution(run.solution));
  }
}

inline std::string tsv_header() {
  return "layer\tsolver\tbits\tgranularity\tobjective\trelative_error\t"
         "iterations\trefresh_accepted\twall_time_s\n";
}

inline void write_tsv(std::ostream& out, const std::vector<Record>& records) {
  out << tsv_header();
  for (const auto& r : records) {
    if (r["record"] != "layer") continue;
    out << r["layer"].get<std::string>() << '\t'
        << r["solver"].get<std::string>() << '\t' << r["bits"].get<int>()
        << '\t' << r["granularity"].get<std::string>() << '\t'
        << format_double(r["objective"].get<double>(), 17) << '\t'
        << (r["relative_error"].is_null()
                ? std::string("null")
                : format_double(r["relative_error"].get<double>(), 17))
        << '\t' << r["iterations"].get<int>() << '\t'
        << (r["refresh_accepted"].get<bool>() ? 1 : 0) << '\t'
        << format_double(r["wall_time_s"].get<double>(), 6) << '\n';
  }
}

inline SolveOutput run_solve(const RunConfig& config,
                             const std::vector<std::filesystem::path>& files) {
  config.validate();
  if (files.empty()) throw InvalidArgument("no layer files given");
  SolveOutput out;
  out.layers = run_parallel<LayerResult>(
      files, config.jobs,
      [&](const std::filesystem::path& f) { return solve_layer(f, config); });
  for (const auto& layer : out.layers) {
    write_solutions(layer, config);
    for (const auto& run : layer.runs) {
      out.records.push_back(
          layer_record(layer.layer, run, config, layer.baseline_objective));
      if (run.trace) {
        for (const auto& it : run.trace->records) {
          out.records.push_back(trace_record(layer.layer, it));
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// compare

struct CompareOutput {
  std::vector<std::string> solvers;
  std::vector<std::string> layers;
  // percent[solver][layer index]; NaN when the baseline objective is 0
  std::map<std::string, std::vector<double>> percent;
  std::map<std::string, double> median_percent;
  std::vector<Record> records;
};

inline CompareOutput run_compare(
    RunConfig config, const std::vector<std::filesystem::path>& files) {
  config.trace = false;
  const SolveOutput solved = run_solve(config, files);
  CompareOutput out;
  out.solvers = config.solvers();
  for (const auto& layer : solved.layers) {
    out.layers.push_back(layer.layer);
    for (const auto& run : layer.runs) {
      const double pct =
          layer.baseline_objective > 0.0
              ? 100.0 * run.solution.objective / layer.baseline_objective
              : std::numeric_limits<double>::quiet_NaN();
      out.percent[run.solution.solver].push_back(pct);
    }
  }
  out.records = solved.records;
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    for (const auto& s : out.solvers) {
      Record r = record_header("compare");
      r["layer"] = out.layers[l];
      r["solver"] = s;
      r["baseline"] = config.baseline;
      r["relative_error_pct"] = nullable(out.percent[s][l]);
      out.records.push_back(std::move(r));
    }
  }
  for (const auto& s : out.solvers) {
    out.median_percent[s] = median(out.percent[s]);
    Record r = record_header("median");
    r["solver"] = s;
    r["baseline"] = config.baseline;
    r["median_pct"] = nullable(out.median_percent[s]);
    out.records.push_back(std::move(r));
  }
  return out;
}

inline void print_compare_table(std::ostream& out, const CompareOutput& c,
                                const std::string& baseline) {
  out << "relative error vs " << baseline << '\n' << std::left
      << std::setw(20) << "layer";
  for (const auto& s : c.solvers) out << std::right << std::setw(10) << s;
  out << '\n';
  for (std::size_t l = 0; l < c.layers.size(); ++l) {
    out << std::left << std::setw(20) << c.layers[l];
    for (const auto& s : c.solvers) {
      out << std::right << std::setw(10) << format_percent(c.percent.at(s)[l]);
    }
    out << '\n';
  }
  out << std::left << std::setw(20) << "median";
  for (const auto& s : c.solvers) {
    out << std::right << std::setw(10) << format_percent(c.median_percent.at(s));
  }
  out << '\n';
}

// ---------------------------------------------------------------------------
// oracle

struct OracleLayer {
  std::string layer;
  std::uint64_t assignments = 0;
  QuantizedSolution oracle;
  std::vector<SolverRun> runs;
};

struct OracleOutput {
  std::vector<OracleLayer> layers;
  std::vector<Record> records;
};

/// Oracle on the grid the solvers start from, i.e. fitted on Ŵ.
inline OracleLayer oracle_layer(const std::filesystem::path& path,
                                const RunConfig& config) {
  OracleLayer out;
  out.layer = layer_id(path);
  const LayerProblem problem = load_problem(path, config);
  const QuantGrid grid =
      fit_grid(problem.w_hat, config.admm.grid, config.admm.fitting);
  out.assignments = oracle_assignments(problem.n(), problem.p(),
                                       config.admm.grid.levels());
  out.oracle = brute_force_optimal(problem, grid, config.budget);
  for (const auto& name : config.solvers()) {
    out.runs.push_back(run_solver(name, problem, config));
  }
  return out;
}

inline bool same_grid(const QuantGrid& a, const QuantGrid& b) {
  return a.scales() == b.scales() && a.zeros() == b.zeros();
}

inline OracleOutput run_oracle(const RunConfig& config,
                               const std::vector<std::filesystem::path>& files) {
  config.validate();
  if (files.empty()) throw InvalidArgument("no layer files given");
  OracleOutput out;
  out.layers = run_parallel<OracleLayer>(
      files, config.jobs,
      [&](const std::filesystem::path& f) { return oracle_layer(f, config); });
  for (const auto& l : out.layers) {
    Record r = record_header("oracle");
    r["layer"] = l.layer;
    r["assignments"] = l.assignments;
    r["oracle_objective"] = l.oracle.objective;
    out.records.push_back(std::move(r));
    for (const auto& run : l.runs) {
      Record s = record_header("oracle_ratio");
      s["layer"] = l.layer;
      s["solver"] = run.solution.solver;
      s["objective"] = run.solution.objective;
      s["oracle_objective"] = l.oracle.objective;
      s["ratio"] = ratio_or_null(run.solution.objective, l.oracle.objective);
      s["same_grid"] = same_grid(run.solution.grid(), l.oracle.grid());
      s["wall_time_s"] = run.wall_time_s;
      out.records.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace admmq
