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

#include "zfesr/least_squares.hpp"

#include <algorithm>
#include <cmath>

namespace zfesr {

namespace {

void clamp(Eigen::VectorXd& p, const LsqOptions& o) {
  if (o.lower) p = p.cwiseMax(*o.lower);
  if (o.upper) p = p.cwiseMin(*o.upper);
}

}  // namespace

Eigen::MatrixXd numeric_jacobian(const ResidualFn& fn, const Eigen::VectorXd& p) {
  Eigen::VectorXd r0;
  fn(p, r0, nullptr);
  Eigen::MatrixXd jac(r0.size(), p.size());
  Eigen::VectorXd rp, rm;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(p(k)));
    Eigen::VectorXd pp = p, pm = p;
    pp(k) += h;
    pm(k) -= h;
    fn(pp, rp, nullptr);
    fn(pm, rm, nullptr);
    jac.col(k) = (rp - rm) / (2.0 * h);
  }
  return jac;
}

LsqResult levenberg_marquardt(const ResidualFn& fn, const Eigen::VectorXd& p0, const LsqOptions& o) {
  LsqResult res;
  Eigen::VectorXd p = p0;
  clamp(p, o);
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  fn(p, r, &jac);
  if (jac.size() == 0) jac = numeric_jacobian(fn, p);
  double cost = 0.5 * r.squaredNorm();
  double lambda = 1e-3;
  const Eigen::Index n = p.size();

  int it = 0;
  for (; it < o.max_iterations; ++it) {
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() < o.gradient_tolerance) {
      res.converged = true;
      break;
    }
    bool accepted = false;
    for (int inner = 0; inner < 40; ++inner) {
      Eigen::MatrixXd a = jtj;
      for (Eigen::Index k = 0; k < n; ++k) a(k, k) += lambda * std::max(jtj(k, k), 1e-12);
      const Eigen::VectorXd step = a.ldlt().solve(-g);
      Eigen::VectorXd trial = p + step;
      clamp(trial, o);
      Eigen::VectorXd rt;
      fn(trial, rt, nullptr);
      const double ct = 0.5 * rt.squaredNorm();
      if (std::isfinite(ct) && ct <= cost) {
        const double dp = (trial - p).norm();
        const double dc = cost - ct;
        p = trial;
        r = rt;
        lambda = std::max(lambda * 0.3, 1e-12);
        accepted = true;
        const bool small_step = dp <= o.step_tolerance * (p.norm() + o.step_tolerance);
        const bool small_cost = dc <= o.cost_tolerance * std::max(cost, 1e-300);
        cost = ct;
        fn(p, r, &jac);
        if (jac.size() == 0) jac = numeric_jacobian(fn, p);
        if (small_step || small_cost) res.converged = true;
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e16) break;
    }
    if (!accepted) {
      // No downhill step exists at any damping: a stationary point.
      res.converged = true;
      break;
    }
    if (res.converged) break;
  }
  res.params = p;
  res.cost = cost;
  res.iterations = it;
  res.residual_count = static_cast<int>(r.size());
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(jtj);
  res.covariance = cod.pseudoInverse();
  return res;
}

}  // namespace zfesr
