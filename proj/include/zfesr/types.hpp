// Copyright 2026 The zfesr Authors
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

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace zfesr {

using Complex = std::complex<double>;

/// Dense complex operator on a small Hilbert space (dimension <= 64).
using OperatorMatrix = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;

// Maximum joint Hilbert dimension accepted by any constructor.
inline constexpr int kMaxHilbertDim = 64;

enum class ErrorCategory {
  InvalidArgument,
  Config,
  Numeric,
  Fit,
  Io,
};

/// Base exception for the library. The category maps 1:1 onto the C API
/// status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

inline Error invalid_argument(const std::string& what) {
  return Error(ErrorCategory::InvalidArgument, what);
}
inline Error numeric_error(const std::string& what) {
  return Error(ErrorCategory::Numeric, what);
}
inline Error fit_error(const std::string& what) { return Error(ErrorCategory::Fit, what); }
inline Error io_error(const std::string& what) { return Error(ErrorCategory::Io, what); }

}  // namespace zfesr
