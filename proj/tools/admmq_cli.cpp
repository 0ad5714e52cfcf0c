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

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "admmq/cli.hpp"

namespace {

using admmq::DampingConvention;
using admmq::ElementType;
using admmq::FitMode;
using admmq::Granularity;
using admmq::Payload;
using admmq::RunConfig;

void add_run_options(CLI::App& cmd, RunConfig& c) {
  auto& a = c.admm;
  cmd.add_option("--solver", c.solver, "rtn | gptq | admmq | all")
      ->check(CLI::IsMember({"rtn", "gptq", "admmq", "all"}))
      ->capture_default_str();
  cmd.add_option("--bits", a.grid.bits, "bit width b")
      ->check(CLI::Range(2, 8))
      ->capture_default_str();
  cmd.add_flag("--symmetric", a.grid.symmetric, "symmetric grid");
  cmd.add_option("--granularity", a.grid.granularity,
                 "per-tensor | per-channel | group")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, Granularity>{
              {"per-tensor", Granularity::kPerTensor},
              {"per-channel", Granularity::kPerChannel},
              {"group", Granularity::kGroup}},
          CLI::ignore_case))
      ->default_str("per-channel");
  cmd.add_option("--group-size", a.grid.group_size,
                 "rows per group; must divide n");
  cmd.add_option("--fitting", a.fitting, "minmax | mse_clip")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, FitMode>{{"minmax", FitMode::kMinMax},
                                         {"mse_clip", FitMode::kMseClip}},
          CLI::ignore_case))
      ->default_str("mse_clip");
  cmd.add_option("--iterations", a.iterations, "ADMM iterations T")
      ->capture_default_str();
  cmd.add_option("--rho0", a.rho0, "initial penalty")->capture_default_str();
  cmd.add_option("--gamma", a.gamma, "penalty growth factor")
      ->capture_default_str();
  cmd.add_flag("!--no-refresh", a.refresh, "disable grid refresh");
  cmd.add_option("--refresh-iteration", a.refresh_iteration,
                 "refresh iteration (default T/2 or first convergence)");
  cmd.add_option("--tolerance", a.primal_tolerance,
                 "early-stop tolerance on ||W-D||_F/sqrt(np)")
      ->capture_default_str();
  cmd.add_flag("!--no-precondition", a.precondition,
               "disable diagonal preconditioning");
  cmd.add_option("--ls-rounds", a.local_search.rounds,
                 "pair-swap rounds (0..5)")
      ->check(CLI::Range(0, admmq::kMaxLocalSearchRounds))
      ->capture_default_str();
  cmd.add_option("--ls-batch", a.local_search.batch_size,
                 "row pairs sampled per round")
      ->capture_default_str();
  cmd.add_option("--seed", a.local_search.seed, "local-search seed")
      ->capture_default_str();
  cmd.add_option("--damp", c.damp_factor, "damping factor")
      ->capture_default_str();
  cmd.add_option("--damp-convention", c.damping, "trace | mean-diagonal")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, DampingConvention>{
              {"trace", DampingConvention::kTrace},
              {"mean-diagonal", DampingConvention::kMeanDiagonal}},
          CLI::ignore_case))
      ->default_str("trace");
  cmd.add_option("--lambda", c.lambda, "ridge term lambda")
      ->capture_default_str();
  cmd.add_option("--baseline", c.baseline, "baseline solver for ratios")
      ->check(CLI::IsMember({"rtn", "gptq", "admmq"}))
      ->capture_default_str();
  cmd.add_option("-j,--jobs", c.jobs, "concurrent layer solves")
      ->capture_default_str();
  cmd.add_option("--report", c.report_path, "JSON Lines report ('-' = stdout)")
      ->capture_default_str();
  cmd.add_option("--table", c.table_path, "TSV export path");
  cmd.add_option("--solutions", c.solutions_dir,
                 "directory for .qsls solution files");
}

void emit_report(const RunConfig& c,
                 const std::vector<admmq::Record>& records) {
  if (c.report_path.empty()) return;
  if (c.report_path == "-") {
    admmq::write_lines(std::cout, records);
    return;
  }
  std::ofstream out(c.report_path, std::ios::trunc);
  if (!out) throw admmq::Error("cannot write " + c.report_path);
  admmq::write_lines(out, records);
}

void emit_table(const RunConfig& c, const std::vector<admmq::Record>& records) {
  if (c.table_path.empty()) return;
  std::ofstream out(c.table_path, std::ios::trunc);
  if (!out) throw admmq::Error("cannot write " + c.table_path);
  admmq::write_tsv(out, records);
}

std::vector<std::filesystem::path> as_paths(
    const std::vector<std::string>& files) {
  return {files.begin(), files.end()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layer-wise weight quantization with ADMM-Q, GPTQ and RTN"};
  app.require_subcommand(1);

  admmq::GenOptions gen;
  std::string gen_out;
  std::size_t gen_count = 1;
  auto* gen_cmd = app.add_subcommand("gen", "write a synthetic layer problem");
  auto& syn = gen.synthetic;
  gen_cmd->add_option("-n", syn.n, "input dimension")->capture_default_str();
  gen_cmd->add_option("-p", syn.p, "output channels")->capture_default_str();
  gen_cmd->add_option("-N,--samples", syn.samples, "calibration samples")
      ->capture_default_str();
  gen_cmd->add_option("--outlier-fraction", syn.outlier_fraction)
      ->capture_default_str();
  gen_cmd->add_option("--outlier-factor", syn.outlier_factor)
      ->capture_default_str();
  gen_cmd->add_option("--condition", syn.condition_target,
                      "target condition number of E[X^T X] (0 = none)")
      ->capture_default_str();
  gen_cmd->add_option("--seed", syn.seed)->capture_default_str();
  gen_cmd->add_option("--element", gen.element, "f32 | f64")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, ElementType>{{"f32", ElementType::kFloat32},
                                             {"f64", ElementType::kFloat64}}))
      ->default_str("f64");
  gen_cmd->add_option("--payload", gen.payload, "activations | hessian")
      ->transform(CLI::CheckedTransformer(std::map<std::string, Payload>{
          {"activations", Payload::kActivations},
          {"hessian", Payload::kHessian}}))
      ->default_str("activations");
  gen_cmd->add_option("--count", gen_count,
                      "number of layers; seeds seed..seed+count-1, --out is "
                      "then a directory")
      ->capture_default_str();
  gen_cmd->add_option("-o,--out", gen_out, "output path")->required();

  RunConfig solve_cfg;
  std::vector<std::string> solve_files;
  auto* solve_cmd = app.add_subcommand("solve", "quantize layer problems");
  add_run_options(*solve_cmd, solve_cfg);
  solve_cmd->add_flag("--trace", solve_cfg.trace, "emit per-iteration rows");
  solve_cmd->add_option("files", solve_files, "layer problem files")
      ->required()
      ->check(CLI::ExistingFile);

  RunConfig cmp_cfg;
  std::vector<std::string> cmp_files;
  auto* cmp_cmd =
      app.add_subcommand("compare", "relative error of each solver vs baseline");
  add_run_options(*cmp_cmd, cmp_cfg);
  cmp_cfg.report_path.clear();
  cmp_cmd->add_option("files", cmp_files, "layer problem files")
      ->required()
      ->check(CLI::ExistingFile);

  RunConfig orc_cfg;
  std::vector<std::string> orc_files;
  auto* orc_cmd =
      app.add_subcommand("oracle", "brute-force optimum on the initial grid");
  add_run_options(*orc_cmd, orc_cfg);
  orc_cmd->add_option("--budget", orc_cfg.budget.max_assignments,
                      "maximum enumerated assignments")
      ->capture_default_str();
  orc_cmd->add_option("files", orc_files, "layer problem files")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_cmd->parsed()) {
      if (gen_count <= 1) {
        admmq::run_gen(gen, gen_out);
      } else {
        std::filesystem::create_directories(gen_out);
        const auto base = syn.seed;
        for (std::size_t k = 0; k < gen_count; ++k) {
          syn.seed = base + k;
          char name[32];
          std::snprintf(name, sizeof name, "layer_%03zu.qslp", k);
          admmq::run_gen(gen, std::filesystem::path(gen_out) / name);
        }
      }
    } else if (solve_cmd->parsed()) {
      const auto out = admmq::run_solve(solve_cfg, as_paths(solve_files));
      emit_report(solve_cfg, out.records);
      emit_table(solve_cfg, out.records);
    } else if (cmp_cmd->parsed()) {
      const auto out = admmq::run_compare(cmp_cfg, as_paths(cmp_files));
      admmq::print_compare_table(std::cout, out, cmp_cfg.baseline);
      emit_report(cmp_cfg, out.records);
      emit_table(cmp_cfg, out.records);
    } else if (orc_cmd->parsed()) {
      const auto out = admmq::run_oracle(orc_cfg, as_paths(orc_files));
      emit_report(orc_cfg, out.records);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
