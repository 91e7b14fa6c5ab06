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

#include "zfesr/nv_dressed.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace zfesr {

double T1rhoModel::at(double omega) const {
  if (table.empty()) return constant_us;
  if (omega <= table.front().first) return table.front().second;
  if (omega >= table.back().first) return table.back().second;
  for (std::size_t k = 1; k < table.size(); ++k) {
    if (omega <= table[k].first) {
      const auto& [x0, y0] = table[k - 1];
      const auto& [x1, y1] = table[k];
      return y0 + (y1 - y0) * (omega - x0) / (x1 - x0);
    }
  }
  return table.back().second;
}

void NVCenter::validate() const {
  if (!(zero_field_splitting_MHz > 0.0)) throw invalid_argument("NV zero-field splitting must be positive");
  if (!(dephasing_T2star_us > 0.0)) throw invalid_argument("NV T2* must be positive");
  if (!(rotating_T1rho.constant_us > 0.0)) throw invalid_argument("NV T1rho must be positive");
  for (std::size_t k = 0; k < rotating_T1rho.table.size(); ++k) {
    if (!(rotating_T1rho.table[k].second > 0.0)) throw invalid_argument("T1rho table values must be positive");
    if (k > 0 && !(rotating_T1rho.table[k].first > rotating_T1rho.table[k - 1].first)) {
      throw invalid_argument("T1rho table must have strictly increasing Omega");
    }
  }
}

double phase_radians(PhaseLabel p) {
  switch (p) {
    case PhaseLabel::x: return 0.0;
    case PhaseLabel::y: return 0.5 * std::numbers::pi;
    case PhaseLabel::minus_y: return -0.5 * std::numbers::pi;
  }
  return 0.0;
}

SpinOperators nv_spin_operators() { return spin_operators(SpinSpecies::nv_electron()); }

OperatorMatrix nv_syy() {
  const Complex i(0.0, 1.0);
  OperatorMatrix m = OperatorMatrix::Zero(3, 3);
  m(0, 1) = -i;
  m(1, 0) = i;
  m(1, 2) = i;
  m(2, 1) = -i;
  return m / std::sqrt(2.0);
}

OperatorMatrix rotating_frame_hamiltonian(const DriveField& drive, double d_MHz) {
  const Complex up = std::polar(1.0, drive.phase_rad);
  const Complex down = std::conj(up);
  OperatorMatrix h = OperatorMatrix::Zero(3, 3);
  h(0, 1) = down;
  h(1, 0) = up;
  h(1, 2) = up;
  h(2, 1) = down;
  h *= drive.rabi_frequency_MHz / (2.0 * std::sqrt(2.0));
  const double detuning = d_MHz - drive.carrier_frequency_MHz;
  if (detuning != 0.0) {
    h(0, 0) += detuning;
    h(2, 2) += detuning;
  }
  return h;
}

DressedBasis dressed_basis(double omega) {
  if (!(omega > 0.0)) throw invalid_argument("dressed_basis: Omega must be positive");
  const double h = 0.5;
  const double r = 1.0 / std::sqrt(2.0);
  DressedBasis b;
  b.states[0] = Eigen::Vector3cd(h, -r, h);
  b.states[1] = Eigen::Vector3cd(-r, 0.0, r);
  b.states[2] = Eigen::Vector3cd(h, r, h);
  b.energies = {-0.5 * omega, 0.0, 0.5 * omega};
  return b;
}

double pi_half_duration_us(double omega0) {
  if (!(omega0 > 0.0)) throw invalid_argument("pi/2 pulse power must be positive");
  return 1.0 / (4.0 * omega0);
}

std::vector<ResonancePower> resonance_powers(const TransitionTable& table) {
  std::vector<ResonancePower> out;
  for (const auto& line : table.observable_lines()) {
    out.push_back(ResonancePower{2.0 * line.frequency, line.frequency, line.weight, line.rows});
  }
  return out;
}

LinewidthBudget linewidth_budget(const NVCenter& nv, double t2star, double b_res) {
  if (!(t2star > 0.0)) throw invalid_argument("linewidth_budget: T2* must be positive");
  LinewidthBudget b;
  b.dephasing_MHz = std::isinf(t2star) ? 0.0 : 1.0 / (std::numbers::pi * t2star);
  b.zeeman_splitting_MHz = 2.0 * std::abs(nv.gyromagnetic_ratio_MHz_per_G) * std::abs(b_res);
  return b;
}

std::optional<std::string> drive_power_warning(double omega, double linewidth) {
  std::ostringstream msg;
  if (omega > kMaxRabi_MHz) {
    msg << "drive power " << omega << " MHz exceeds the " << kMaxRabi_MHz << " MHz practical limit";
    return msg.str();
  }
  if (omega < linewidth) {
    msg << "drive power " << omega << " MHz is below the dephasing linewidth " << linewidth << " MHz";
    return msg.str();
  }
  return std::nullopt;
}

}  // namespace zfesr
