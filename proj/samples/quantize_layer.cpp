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

// Quantizes one synthetic layer to 3 bits with each solver and prints the
// layer-wise objective.

#include <cstdio>

#include "admmq/solvers.hpp"

int main() {
  using namespace admmq;

  SyntheticOptions opt;
  opt.seed = 42;
  const SyntheticLayer layer = generate_layer(opt);
  const HessianBuild h =
      build_hessian({layer.activations}, /*lambda=*/0.0, kDefaultDampFactor);
  const LayerProblem problem = make_problem(layer.w_hat, h, 0.0);

  AdmmConfig config;
  config.grid.bits = 3;

  const auto rtn = solve_rtn(problem, config.grid, config.fitting);
  const auto gptq = solve_gptq(problem, config.grid, config.fitting);
  const auto admm = solve_admmq(problem, config);

  std::printf("%-6s %14s\n", "solver", "objective");
  std::printf("%-6s %14.6g\n", "rtn", rtn.objective);
  std::printf("%-6s %14.6g\n", "gptq", gptq.objective);
  std::printf("%-6s %14.6g  (%d iterations)\n", "admmq",
              admm.solution.objective, admm.solution.iterations);
  return 0;
}
