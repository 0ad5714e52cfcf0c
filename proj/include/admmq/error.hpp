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

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace admmq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (shape, sign, range).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input matrix failed the symmetry tolerance. Carries the worst pair.
class NotSymmetric : public InvalidArgument {
 public:
  NotSymmetric(std::size_t row, std::size_t col, double gap)
      : InvalidArgument("matrix is not symmetric: worst pair (" +
                        std::to_string(row) + ", " + std::to_string(col) +
                        ") differs by " + std::to_string(gap)),
        row_(row),
        col_(col),
        gap_(gap) {}

  std::size_t row() const { return row_; }
  std::size_t col() const { return col_; }
  double gap() const { return gap_; }

 private:
  std::size_t row_;
  std::size_t col_;
  double gap_;
};

/// An iterative scheme hit its cap without reaching the target residual.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}

  double residual() const { return residual_; }

 private:
  double residual_;
};

/// A matrix expected to be positive definite was not.
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(const std::string& what, double min_eigenvalue)
      : Error(what + " (min eigenvalue " + std::to_string(min_eigenvalue) +
              ")"),
        min_eigenvalue_(min_eigenvalue) {}

  double min_eigenvalue() const { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

/// A solver iterate became non-finite.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(int iteration)
      : Error("non-finite iterate at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}

  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

/// The exhaustive oracle refused an instance that exceeds its budget.
class BudgetExceeded : public Error {
 public:
  BudgetExceeded(std::uint64_t required, std::uint64_t budget)
      : Error("oracle budget exceeded: " + std::to_string(required) +
              " assignments required, budget is " + std::to_string(budget)),
        required_(required) {}

  std::uint64_t required() const { return required_; }

 private:
  std::uint64_t required_;
};

/// Malformed or unreadable file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace admmq
