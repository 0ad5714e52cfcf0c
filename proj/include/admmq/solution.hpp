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

#pragma once

#include <string>

#include "admmq/grid.hpp"
#include "admmq/matrix.hpp"
#include "admmq/problem.hpp"

namespace admmq {

/// Grid-feasible weights in original coordinates. w_q always equals
/// codes.decode() bit for bit.
struct QuantizedSolution {
  Matrix w_q;
  CodedMatrix codes;
  double objective = 0.0;
  std::string solver;
  int iterations = 0;
  bool refresh_accepted = false;

  const QuantGrid& grid() const { return codes.grid; }
};

inline QuantizedSolution make_solution(const LayerProblem& problem,
                                       CodedMatrix codes, std::string solver) {
  QuantizedSolution s;
  s.w_q = codes.decode();
  s.codes = std::move(codes);
  s.objective = objective(problem, s.w_q);
  s.solver = std::move(solver);
  return s;
}

}  // namespace admmq
