// Copyright 2026 The lagsim Authors. All Rights Reserved.
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
// =============================================================================

#ifndef LAGSIM_ERROR_HPP_
#define LAGSIM_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lagsim {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Vector or matrix shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A value produced by an operation is NaN or infinite.
class NumericError : public Error {
 public:
  using Error::Error;
};

// An iterative method hit its iteration cap before reaching the tolerance.
class ToleranceError : public Error {
 public:
  ToleranceError(const std::string& what, double best_estimate)
      : Error(what), best_estimate_(best_estimate) {}
  double best_estimate() const noexcept { return best_estimate_; }

 private:
  double best_estimate_;
};

// Algorithm parameters violate a precondition.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Synthetic data could not be generated as requested.
class GenerationError : public Error {
 public:
  using Error::Error;
};

class PartitionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed text input. Line and column are 1-based; 0 means unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(locate(what, line, column)), line_(line), column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string locate(const std::string& what, std::size_t line,
                            std::size_t column) {
    if (line == 0) return what;
    std::string where = "line " + std::to_string(line);
    if (column != 0) where += ", column " + std::to_string(column);
    return where + ": " + what;
  }
  std::size_t line_;
  std::size_t column_;
};

}  // namespace lagsim

#endif  // LAGSIM_ERROR_HPP_
