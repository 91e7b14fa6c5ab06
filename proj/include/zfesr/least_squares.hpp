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

#include <functional>
#include <optional>

#include <Eigen/Dense>

namespace zfesr {

/// Residual callback: fills r(p) and, when `jac` is non-null, dr/dp.
using ResidualFn = std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac)>;

struct LsqOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-12;
  double step_tolerance = 1e-12;
  double cost_tolerance = 1e-15;
  std::optional<Eigen::VectorXd> lower;
  std::optional<Eigen::VectorXd> upper;
};

struct LsqResult {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;  // (J^T J)^-1 at the solution, unscaled
  double cost = 0.0;           // 0.5 |r|^2
  int iterations = 0;
  int residual_count = 0;
  bool converged = false;
};

/// Levenberg-Marquardt with Marquardt diagonal scaling and box clamping.
LsqResult levenberg_marquardt(const ResidualFn& fn, const Eigen::VectorXd& p0, const LsqOptions& options = {});

/// Central-difference Jacobian, for callers without an analytic one.
Eigen::MatrixXd numeric_jacobian(const ResidualFn& fn, const Eigen::VectorXd& p);

}  // namespace zfesr
