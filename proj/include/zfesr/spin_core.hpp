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

// Spin operators, hyperfine Hamiltonians, exact diagonalization and
// zero-field transition tables for small electron-nuclear spin systems.
//
// Unit convention: every frequency and energy is an ordinary frequency in
// MHz. Conversion to angular units happens only inside propagators.

#include <array>
#include <vector>

#include "zfesr/types.hpp"

namespace zfesr {

/// A spin species with spin quantum number S in {1/2, 1, 3/2}.
///
/// `two_s` stores 2S so the quantum number stays exact. The gyromagnetic
/// ratio is a signed ordinary frequency per gauss; the Zeeman term is
/// H = -gamma * B * S_z (electron: gamma = -2.803 MHz/G).
struct SpinSpecies {
  int two_s = 1;
  double gyromagnetic_ratio_MHz_per_G = 0.0;

  double spin() const { return 0.5 * two_s; }
  int dim() const { return two_s + 1; }

  static SpinSpecies electron();
  static SpinSpecies nitrogen15();
  static SpinSpecies nitrogen14();
  static SpinSpecies nv_electron();
};

struct SpinOperators {
  OperatorMatrix x, y, z;
  const OperatorMatrix& operator[](int axis) const { return axis == 0 ? x : axis == 1 ? y : z; }
};

/// Standard ladder-operator construction in the descending |m = S ... -S> basis.
/// Throws InvalidArgument for unsupported spin values.
SpinOperators spin_operators(const SpinSpecies& species);

/// z-y-z Euler angles in radians: R = Rz(alpha) Ry(beta) Rz(gamma).
struct EulerAngles {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

Eigen::Matrix3d rotation_matrix(const EulerAngles& euler);

/// z-y-z angles of a proper rotation; beta in [0, pi], gamma = 0 at the poles.
EulerAngles euler_from_matrix(const Eigen::Matrix3d& r);

struct HyperfineTensor {
  Eigen::Vector3d principal_values{0.0, 0.0, 0.0};  // (Axx, Ayy, Azz), MHz
  EulerAngles orientation;

  static HyperfineTensor axial(double a_perp, double a_zz) {
    return HyperfineTensor{Eigen::Vector3d(a_perp, a_perp, a_zz), {}};
  }
  /// Tensor in the lab frame, R diag(A) R^T with R from `orientation`.
  Eigen::Matrix3d lab_matrix() const;
};

/// R diag(A) R^T for explicit angles (the tensor's own orientation is ignored).
Eigen::Matrix3d rotate_tensor(const HyperfineTensor& t, const EulerAngles& euler);

struct TargetSpinSystem {
  SpinSpecies electron = SpinSpecies::electron();
  SpinSpecies nucleus = SpinSpecies::nitrogen15();
  HyperfineTensor hyperfine;
  // Optional nuclear quadrupole strength P (MHz) for I >= 1, applied as
  // P ((n.I)^2 - I(I+1)/3) along the tensor's principal z axis.
  double quadrupole_MHz = 0.0;

  int dim() const { return electron.dim() * nucleus.dim(); }

  /// 15N P1 center with literature principal values.
  static TargetSpinSystem p1_nitrogen15(double a_perp = 114.0, double a_zz = 159.9);
};

/// Zero-field Hamiltonian S.A.I (+ quadrupole). With `lab_frame` the tensor is
/// rotated by its orientation; otherwise the principal-frame diagonal form is used.
OperatorMatrix hyperfine_hamiltonian(const TargetSpinSystem& sys, bool lab_frame = true);

/// Adds the electron and nuclear Zeeman terms for a static field of
/// `field_G` gauss along the lab z axis.
OperatorMatrix zeeman_hamiltonian(const TargetSpinSystem& sys, double field_G);

/// Electron spin operators embedded in the electron (x) nucleus product space.
SpinOperators electron_operators(const TargetSpinSystem& sys);
SpinOperators nuclear_operators(const TargetSpinSystem& sys);

struct EigenSystem {
  Eigen::VectorXd energies;  // ascending, MHz
  OperatorMatrix states;     // columns are eigenvectors
};

/// Hermitian eigensolve with ascending energies and a fixed phase convention:
/// each eigenvector's largest-magnitude component is real positive (ties go to
/// the lowest index). Throws Numeric for non-Hermitian input.
EigenSystem diagonalize(const OperatorMatrix& hamiltonian);

/// Closed-form eigensystem of S.A.I for S = I = 1/2 in the principal frame.
/// Levels are the four Bell-like combinations, sorted by energy.
EigenSystem analytic_half_half_eigensystem(const HyperfineTensor& t);
EigenSystem analytic_half_half_eigensystem(const TargetSpinSystem& sys);

/// The four closed-form energies in their natural order (w1..w4).
std::array<double, 4> half_half_energies(const Eigen::Vector3d& principal_values);
/// The six closed-form transition frequencies: d12, d34, d13, d24, d14, d23.
std::array<double, 6> half_half_transition_frequencies(const Eigen::Vector3d& principal_values);

inline constexpr double kDegeneracyTolerance_MHz = 1e-6;
inline constexpr double kForbiddenWeight = 1e-10;

struct Transition {
  int i = 0;
  int j = 0;
  double frequency = 0.0;  // MHz; 0 for rows inside a degenerate cluster
  double weight_x = 0.0;
  double weight_y = 0.0;
  double weight_z = 0.0;
  bool forbidden = false;
  bool degenerate = false;

  double total_weight() const { return weight_x + weight_y + weight_z; }
  bool observable() const { return !forbidden && !degenerate; }
};

/// A group of observable transitions sharing one frequency.
struct SpectralLine {
  double frequency = 0.0;
  double weight = 0.0;  // summed x+y+z dipole weight over the group
  std::vector<int> rows;
};

struct TransitionTable {
  std::vector<Transition> rows;

  /// Distinct observable frequencies (ascending), grouping rows within the
  /// degeneracy tolerance.
  std::vector<SpectralLine> observable_lines() const;
  std::vector<double> observable_frequencies() const;
};

/// All level pairs i < j with dipole weights |<j|S_a|i>|^2 for the given
/// operators (normally the target electron's spin embedded in the product
/// space).
TransitionTable transition_table(const EigenSystem& eig, const SpinOperators& ops);

/// Convenience: zero-field table of a target spin system.
TransitionTable zero_field_table(const TargetSpinSystem& sys);

}  // namespace zfesr
