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

// Hand-rolled generators and small independent oracles shared by the tests.

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "zfesr/spin_core.hpp"

namespace zfesr::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline EulerAngles random_euler(std::mt19937_64& rng) {
  return {uniform(rng, 0.0, 2.0 * std::numbers::pi), std::acos(uniform(rng, -1.0, 1.0)),
          uniform(rng, 0.0, 2.0 * std::numbers::pi)};
}

inline Eigen::Vector3d random_principal(std::mt19937_64& rng, double scale = 200.0) {
  return {uniform(rng, -scale, scale), uniform(rng, -scale, scale), uniform(rng, -scale, scale)};
}

inline Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v(n(rng), n(rng), n(rng));
  return v.normalized();
}

// Axial tensor with A_perp < Azz < 3 A_perp so the three resonance powers
// appear in left / middle / right order, at least 18 MHz apart.
inline std::pair<double, double> random_axial(std::mt19937_64& rng) {
  const double a_perp = uniform(rng, 60.0, 150.0);
  const double a_zz = uniform(rng, 1.3 * a_perp, 2.6 * a_perp);
  return {a_perp, a_zz};
}

// Closed-form energies of S.A.I for S = I = 1/2 in the principal frame,
// written out independently of the library.
inline std::array<double, 4> closed_form_energies(double axx, double ayy, double azz) {
  return {0.25 * (-axx - ayy - azz), 0.25 * (axx + ayy - azz), 0.25 * (-axx + ayy + azz), 0.25 * (axx - ayy + azz)};
}

inline double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace zfesr::testing
