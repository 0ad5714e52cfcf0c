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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "admmq/cli.hpp"
#include "support.hpp"

namespace admmq {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("admmq_cli_test_" +
            std::string(::testing::UnitTest::GetInstance()
                            ->current_test_info()
                            ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path gen(const std::string& name, std::uint64_t seed, std::size_t n = 16,
               std::size_t p = 4) {
    GenOptions g;
    g.synthetic.n = n;
    g.synthetic.p = p;
    g.synthetic.samples = 4 * n;
    g.synthetic.outlier_factor = 1.0;
    g.synthetic.seed = seed;
    const fs::path out = dir_ / (name + ".qslp");
    run_gen(g, out);
    return out;
  }

  static RunConfig config(int bits = 3) {
    RunConfig c;
    c.admm.grid.bits = bits;
    return c;
  }

  static std::vector<std::string> lines(const std::vector<Record>& records) {
    std::ostringstream s;
    write_lines(s, records);
    std::vector<std::string> out;
    std::istringstream in(s.str());
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
  }

  static std::vector<Record> of_kind(const std::vector<Record>& records,
                                     const std::string& kind) {
    std::vector<Record> out;
    for (const auto& r : records)
      if (r["record"] == kind) out.push_back(r);
    return out;
  }

  fs::path dir_;
};

TEST_F(CliTest, GenIsDeterministic) {
  const auto a = gen("a", 5);
  const auto b = gen("b", 5);
  EXPECT_EQ(detail::read_all(a), detail::read_all(b));
  const auto c = gen("c", 6);
  EXPECT_NE(detail::read_all(a), detail::read_all(c));
}

TEST_F(CliTest, GenOutliersPrecondition) {
  GenOptions g;
  g.synthetic.n = 32;
  g.synthetic.p = 2;
  g.synthetic.samples = 128;
  g.synthetic.outlier_factor = 100.0;
  run_gen(g, dir_ / "o.qslp");
  const LayerProblem pr = load_problem(dir_ / "o.qslp", config());
  const auto pc = precondition(pr);
  for (std::size_t i = 0; i < 32; ++i) {
    EXPECT_NEAR(pc.scaled.hessian(i, i), 1.0, 1e-8);
  }
}

TEST_F(CliTest, GenFloat32AndHessianPayload) {
  GenOptions g;
  g.synthetic.n = 8;
  g.synthetic.p = 2;
  g.synthetic.samples = 32;
  g.element = ElementType::kFloat32;
  g.payload = Payload::kHessian;
  run_gen(g, dir_ / "h.qslp");
  const ProblemFile f = read_problem_file(dir_ / "h.qslp");
  EXPECT_EQ(f.payload, Payload::kHessian);
  EXPECT_EQ(f.data.rows(), 8u);
  EXPECT_EQ(encode_problem(f), detail::read_all(dir_ / "h.qslp"));
}

TEST_F(CliTest, SolveAllEmitsThreeRecordsPerLayer) {
  const auto f = gen("layer0", 1);
  const auto out = run_solve(config(), {f});
  const auto layers = of_kind(out.records, "layer");
  ASSERT_EQ(layers.size(), 3u);
  EXPECT_EQ(layers[0]["solver"], "rtn");
  EXPECT_EQ(layers[1]["solver"], "gptq");
  EXPECT_EQ(layers[2]["solver"], "admmq");
  for (const auto& r : layers) {
    EXPECT_EQ(r["schema"], kReportSchema);
    EXPECT_EQ(r["layer"], "layer0");
    EXPECT_EQ(r["bits"], 3);
    EXPECT_EQ(r["granularity"], "per-channel");
    EXPECT_TRUE(r.contains("wall_time_s"));
  }
  EXPECT_DOUBLE_EQ(layers[1]["relative_error"].get<double>(), 1.0);
  EXPECT_TRUE(of_kind(out.records, "trace").empty());
}

TEST_F(CliTest, TraceRowsMatchIterations) {
  const auto f = gen("t", 2);
  RunConfig c = config();
  c.solver = "admmq";
  c.trace = true;
  const auto out = run_solve(c, {f});
  const auto layer = of_kind(out.records, "layer");
  ASSERT_EQ(layer.size(), 1u);
  const auto trace = of_kind(out.records, "trace");
  EXPECT_EQ(static_cast<int>(trace.size()), layer[0]["iterations"].get<int>());
  for (std::size_t k = 0; k < trace.size(); ++k) {
    EXPECT_EQ(trace[k]["t"], static_cast<int>(k));
  }
}

TEST_F(CliTest, ReportObjectivesMatchSavedSolutions) {
  const auto f = gen("s", 3);
  RunConfig c = config();
  c.solutions_dir = (dir_ / "sol").string();
  const auto out = run_solve(c, {f});
  const LayerProblem pr = load_problem(f, c);
  for (const auto& r : of_kind(out.records, "layer")) {
    const auto s = decode_solution(detail::read_all(
        dir_ / "sol" / ("s." + r["solver"].get<std::string>() + ".qsls")));
    EXPECT_LE(testing::rel_diff(r["objective"].get<double>(),
                                objective(pr, s.codes.decode())),
              1e-10);
  }
}

TEST_F(CliTest, RerunIsIdenticalModuloTiming) {
  const std::vector<fs::path> files{gen("a", 10), gen("b", 11), gen("c", 12)};
  RunConfig c = config();
  c.trace = true;
  const auto first = lines(run_solve(c, files).records);
  c.jobs = 3;
  const auto second = lines(run_solve(c, files).records);
  ASSERT_EQ(first.size(), second.size());
  for (std::size_t k = 0; k < first.size(); ++k) {
    EXPECT_EQ(without_timing(first[k]), without_timing(second[k]));
  }
}

TEST_F(CliTest, RelativeErrorNullForZeroBaseline) {
  ProblemFile f;
  f.payload = Payload::kHessian;
  f.w_hat = Matrix{{0, 3}, {1, 2}, {2, 1}, {3, 0}};
  f.data = Matrix::identity(4);
  write_problem_file(dir_ / "exact.qslp", f);
  RunConfig c = config(2);
  c.admm.fitting = FitMode::kMinMax;
  const auto out = run_solve(c, {dir_ / "exact.qslp"});
  for (const auto& r : of_kind(out.records, "layer")) {
    EXPECT_EQ(r["objective"], 0.0);
    EXPECT_TRUE(r["relative_error"].is_null());
  }
}

TEST_F(CliTest, CompareBaselineAgainstItself) {
  const std::vector<fs::path> files{gen("a", 20), gen("b", 21)};
  RunConfig c = config();
  c.solver = "gptq";
  const auto out = run_compare(c, files);
  for (double pct : out.percent.at("gptq")) EXPECT_DOUBLE_EQ(pct, 100.0);
  EXPECT_DOUBLE_EQ(out.median_percent.at("gptq"), 100.0);
  const auto medians = of_kind(out.records, "median");
  ASSERT_EQ(medians.size(), 1u);
  std::ostringstream table;
  print_compare_table(table, out, "gptq");
  EXPECT_NE(table.str().find("100.0%"), std::string::npos);
}

TEST_F(CliTest, CompareEmitsPerLayerPercentages) {
  const std::vector<fs::path> files{gen("a", 30), gen("b", 31), gen("c", 32)};
  const auto out = run_compare(config(), files);
  EXPECT_EQ(out.layers.size(), 3u);
  EXPECT_EQ(of_kind(out.records, "compare").size(), 9u);
  EXPECT_EQ(of_kind(out.records, "median").size(), 3u);
  for (const auto& s : kSolverNames) EXPECT_EQ(out.percent.at(s).size(), 3u);
}

TEST_F(CliTest, OracleIdentityHessianMatchesAllSolvers) {
  ProblemFile f;
  f.payload = Payload::kHessian;
  std::mt19937_64 rng(4);
  f.w_hat = testing::gaussian(6, 2, rng);
  f.data = Matrix::identity(6);
  write_problem_file(dir_ / "id.qslp", f);
  RunConfig c = config(2);
  c.damp_factor = 0.0;
  const auto out = run_oracle(c, {dir_ / "id.qslp"});
  const auto ratios = of_kind(out.records, "oracle_ratio");
  ASSERT_EQ(ratios.size(), 3u);
  const double best = out.layers[0].oracle.objective;
  for (const auto& r : ratios) {
    EXPECT_LE(std::abs(r["objective"].get<double>() - best), 1e-9)
        << r["solver"];
  }
}

TEST_F(CliTest, OracleRefusesOversizedInstance) {
  const auto f = gen("big", 5, 16, 4);
  try {
    run_oracle(config(2), {f});
    FAIL() << "expected refusal";
  } catch (const Error& e) {
    const std::string count = std::to_string(4ull << 32);  // (2^2)^16 · 4
    EXPECT_NE(std::string(e.what()).find(count), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("big"), std::string::npos);
  }
}

TEST_F(CliTest, FailuresNameTheLayer) {
  std::ofstream(dir_ / "broken.qslp") << "not a layer";
  try {
    run_solve(config(), {gen("fine", 1), dir_ / "broken.qslp"});
    FAIL() << "expected failure";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("layer broken"), std::string::npos);
  }
}

TEST_F(CliTest, ConfigValidation) {
  RunConfig c = config();
  c.solver = "bogus";
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = config();
  c.jobs = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = config();
  EXPECT_EQ(c.admm.iterations, 300);
  EXPECT_EQ(c.admm.rho0, 0.1);
  EXPECT_EQ(c.admm.gamma, 1.1);
  EXPECT_EQ(c.damp_factor, 0.01);
  EXPECT_EQ(c.damping, DampingConvention::kTrace);
  EXPECT_EQ(c.admm.fitting, FitMode::kMseClip);
  EXPECT_EQ(c.admm.local_search.rounds, 5);
}

TEST_F(CliTest, TsvExport) {
  const auto out = run_solve(config(), {gen("x", 8)});
  std::ostringstream s;
  write_tsv(s, out.records);
  std::istringstream in(s.str());
  std::string header, row;
  std::getline(in, header);
  EXPECT_EQ(header + "\n", tsv_header());
  int rows = 0;
  while (std::getline(in, row)) ++rows;
  EXPECT_EQ(rows, 3);
}

}  // namespace
}  // namespace admmq
