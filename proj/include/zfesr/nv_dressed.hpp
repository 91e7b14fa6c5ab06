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

// NV rotating-frame drive Hamiltonians, the dressed-state basis and the
// resonance condition Omega = 2 * delta_omega.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zfesr/spin_core.hpp"

namespace zfesr {

/// Piecewise-linear T1rho(Omega) model. Empty table means the constant value.
struct T1rhoModel {
  double constant_us = 70.0;
  std::vector<std::pair<double, double>> table;  // (Omega MHz, T1rho us), ascending Omega

  double at(double omega_MHz) const;
};

struct NVCenter {
  double zero_field_splitting_MHz = 2870.0;
  double gyromagnetic_ratio_MHz_per_G = -2.803;
  double dephasing_T2star_us = 0.1;
  T1rhoModel rotating_T1rho;

  void validate() const;
};

enum class PhaseLabel { x, y, minus_y };

double phase_radians(PhaseLabel p);

struct DriveField {
  double rabi_frequency_MHz = 0.0;
  double phase_rad = 0.0;
  double carrier_frequency_MHz = 2870.0;

  static DriveField resonant(double omega_MHz, PhaseLabel phase, double d_MHz = 2870.0) {
    return DriveField{omega_MHz, phase_radians(phase), d_MHz};
  }
};

/// NV spin-1 operators in the {|1>, |0>, |-1>} basis.
SpinOperators nv_spin_operators();

/// The y-phase operator of the rotating-frame drive; differs from S_y in the
/// sign of its lower-left element pattern.
OperatorMatrix nv_syy();

/// Rotating-frame Hamiltonian (MHz) after the rotating-wave approximation:
/// Omega/(2 sqrt 2) [[0, e^{-i phi}, 0], [e^{i phi}, 0, e^{i phi}], [0, e^{-i phi}, 0]]
/// plus the detuning term (D - f) S_z^2.
OperatorMatrix rotating_frame_hamiltonian(const DriveField& drive, double d_MHz = 2870.0);

/// Dressed eigenbasis of (Omega/2) S_x. Index 0 is |-1>_d, 1 is |0>_d, 2 is |1>_d.
struct DressedBasis {
  std::array<Eigen::Vector3cd, 3> states;
  std::array<double, 3> energies{};  // (-Omega/2, 0, Omega/2)

  const Eigen::Vector3cd& minus() const { return states[0]; }
  const Eigen::Vector3cd& zero() const { return states[1]; }
  const Eigen::Vector3cd& plus() const { return states[2]; }
};

DressedBasis dressed_basis(double omega_MHz);

/// pi/2 pulse length 1/(4 Omega0) in microseconds.
double pi_half_duration_us(double omega0_MHz);

struct ResonancePower {
  double omega_MHz = 0.0;
  double transition_frequency_MHz = 0.0;
  double weight = 0.0;
  std::vector<int> rows;  // rows of the source TransitionTable
};

/// One entry per observable transition line, Omega = 2 * frequency.
std::vector<ResonancePower> resonance_powers(const TransitionTable& table);

struct LinewidthBudget {
  double dephasing_MHz = 0.0;         // 1 / (pi T2*)
  double zeeman_splitting_MHz = 0.0;  // 2 |gamma| B_res
};

LinewidthBudget linewidth_budget(const NVCenter& nv, double target_T2star_us, double residual_field_G);

inline constexpr double kMaxRabi_MHz = 1000.0;

/// Warning text when Omega is above the practical drive limit or below the
/// dephasing linewidth; std::nullopt otherwise.
std::optional<std::string> drive_power_warning(double omega_MHz, double linewidth_MHz);

}  // namespace zfesr
