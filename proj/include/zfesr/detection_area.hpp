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

// Detection-area signal budget for a thin layer of target spins around a
// single NV, and a Monte-Carlo estimator of the squared dipolar factor.
//
// Unit convention: C0 is angular (rad/us * nm^3, default 2 pi * 52), Gamma is
// an ordinary rate in 1/us and tau is in us. With the defaults this gives
// pi sigma C0^2 eta^2 tau / (16 Gamma r0^4) = 0.2846 % at r0 = 15 nm for
// eta^2 = 5/4.

#include <cstdint>
#include <vector>

#include "zfesr/spectra.hpp"

namespace zfesr {

struct DetectionAreaParams {
  double areal_density_per_nm2 = 5.5e-3;
  double C0_angular_MHz_nm3 = 2.0 * 3.14159265358979323846 * 52.0;
  double eta_sq_mean = 1.25;
  double gamma_per_us = 10.0;
  double tau_us = 10.0;
  double r0_nm = 15.0;

  void validate() const;
};

/// C0^2 eta^2 tau / (8 Gamma r^6)
double per_spin_signal(double r_nm, const DetectionAreaParams& p);

/// Integrated signal of spins outside r0: pi sigma C0^2 eta^2 tau / (16 Gamma r0^4).
double outer_signal(double r0_nm, const DetectionAreaParams& p);

/// Same integral, 2 pi sigma int_{r0}^inf per_spin_signal(r) r dr, by
/// exp-sinh quadrature.
double outer_signal_quadrature(double r0_nm, const DetectionAreaParams& p);

/// pi r0^2 sigma
double expected_spin_count(double sigma_per_nm2, double r0_nm);

/// 1 - outer / contrast. Throws InvalidArgument when contrast < outer.
double dominance_fraction(double contrast, double r0_nm, const DetectionAreaParams& p);

/// Published orientation averages: 5/4 for the outer lines, 3/4 for the middle.
double published_eta_sq(LineClass c);

struct BudgetRow {
  LineClass line_class = LineClass::left;
  double eta_sq = 0.0;
  double outer_signal = 0.0;  // fraction
  double dominance = 0.0;     // fraction; NaN when contrast < outer
};

struct Budget {
  double r0_nm = 0.0;
  double contrast = 0.0;
  double expected_count = 0.0;
  std::vector<BudgetRow> rows;  // left, middle, right
};

/// Per-class budget with the published eta^2 constants.
Budget budget_table(const DetectionAreaParams& p, double contrast);

/// eta^2 of one P1 line class for a fixed separation direction (NV frame,
/// NV axis z) and target orientation.
double eta_sq_fixed(LineClass c, const Eigen::Vector3d& direction, const EulerAngles& orientation,
                    const TargetSpinSystem& sys = TargetSpinSystem::p1_nitrogen15());

/// Average of eta^2 over uniformly random separation directions and
/// Haar-random target orientations.
double eta_sq_monte_carlo(LineClass c, std::int64_t samples, std::uint64_t seed,
                          const TargetSpinSystem& sys = TargetSpinSystem::p1_nitrogen15());

/// Exact isotropic average of eta^2 under the same normalization:
/// <|g|^2> / 3 * (16 / dim) * sum of all class weights |<j|S_a|i>|^2.
double eta_sq_isotropic(LineClass c, const TargetSpinSystem& sys = TargetSpinSystem::p1_nitrogen15());

}  // namespace zfesr
