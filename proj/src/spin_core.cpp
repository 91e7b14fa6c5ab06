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

#include "zfesr/spin_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <unsupported/Eigen/KroneckerProduct>

namespace zfesr {

namespace {

OperatorMatrix kron(const OperatorMatrix& a, const OperatorMatrix& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

OperatorMatrix identity(int n) { return OperatorMatrix::Identity(n, n); }

void fix_phase(OperatorMatrix& states) {
  for (Eigen::Index c = 0; c < states.cols(); ++c) {
    Eigen::Index best = 0;
    double best_mag = -1.0;
    for (Eigen::Index r = 0; r < states.rows(); ++r) {
      // Ties within rounding noise go to the lowest index.
      const double mag = std::abs(states(r, c));
      if (mag > best_mag + 1e-12) {
        best_mag = mag;
        best = r;
      }
    }
    if (best_mag <= 0.0) continue;
    const Complex phase = std::conj(states(best, c)) / best_mag;
    states.col(c) *= phase;
    states(best, c) = Complex(states(best, c).real(), 0.0);
  }
}

}  // namespace

SpinSpecies SpinSpecies::electron() { return SpinSpecies{1, -2.803}; }
SpinSpecies SpinSpecies::nitrogen15() { return SpinSpecies{1, -4.316e-4}; }
SpinSpecies SpinSpecies::nitrogen14() { return SpinSpecies{2, 3.077e-4}; }
SpinSpecies SpinSpecies::nv_electron() { return SpinSpecies{2, -2.803}; }

SpinOperators spin_operators(const SpinSpecies& species) {
  if (species.two_s < 1 || species.two_s > 3) {
    std::ostringstream msg;
    msg << "unsupported spin quantum number " << species.spin() << " (supported: 1/2, 1, 3/2)";
    throw invalid_argument(msg.str());
  }
  const int n = species.dim();
  const double s = species.spin();
  OperatorMatrix sz = OperatorMatrix::Zero(n, n);
  OperatorMatrix splus = OperatorMatrix::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    const double m = s - k;
    sz(k, k) = m;
    if (k > 0) splus(k - 1, k) = std::sqrt(s * (s + 1.0) - m * (m + 1.0));
  }
  const OperatorMatrix sminus = splus.adjoint();
  SpinOperators ops;
  ops.x = 0.5 * (splus + sminus);
  ops.y = Complex(0.0, -0.5) * (splus - sminus);
  ops.z = sz;
  return ops;
}

Eigen::Matrix3d rotation_matrix(const EulerAngles& e) {
  const Eigen::Matrix3d rz1 = Eigen::AngleAxisd(e.alpha, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Eigen::Matrix3d ry = Eigen::AngleAxisd(e.beta, Eigen::Vector3d::UnitY()).toRotationMatrix();
  const Eigen::Matrix3d rz2 = Eigen::AngleAxisd(e.gamma, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  return rz1 * ry * rz2;
}

EulerAngles euler_from_matrix(const Eigen::Matrix3d& r) {
  const double beta = std::acos(std::clamp(r(2, 2), -1.0, 1.0));
  if (std::sin(beta) > 1e-12) {
    return {std::atan2(r(1, 2), r(0, 2)), beta, std::atan2(r(2, 1), -r(2, 0))};
  }
  // Gimbal lock: only alpha +/- gamma is defined.
  const double alpha = r(2, 2) > 0.0 ? std::atan2(r(1, 0), r(0, 0)) : std::atan2(-r(1, 0), -r(0, 0));
  return {alpha, beta, 0.0};
}

Eigen::Matrix3d rotate_tensor(const HyperfineTensor& t, const EulerAngles& euler) {
  const Eigen::Matrix3d r = rotation_matrix(euler);
  Eigen::Matrix3d out = r * t.principal_values.asDiagonal() * r.transpose();
  // Symmetrize away rounding asymmetry.
  return 0.5 * (out + out.transpose());
}

Eigen::Matrix3d HyperfineTensor::lab_matrix() const { return rotate_tensor(*this, orientation); }

TargetSpinSystem TargetSpinSystem::p1_nitrogen15(double a_perp, double a_zz) {
  TargetSpinSystem sys;
  sys.electron = SpinSpecies::electron();
  sys.nucleus = SpinSpecies::nitrogen15();
  sys.hyperfine = HyperfineTensor::axial(a_perp, a_zz);
  return sys;
}

namespace {

void check_dim(const TargetSpinSystem& sys) {
  if (sys.dim() > kMaxHilbertDim) {
    std::ostringstream msg;
    msg << "Hilbert dimension " << sys.dim() << " exceeds the limit of " << kMaxHilbertDim;
    throw invalid_argument(msg.str());
  }
}

}  // namespace

SpinOperators electron_operators(const TargetSpinSystem& sys) {
  check_dim(sys);
  const SpinOperators s = spin_operators(sys.electron);
  const OperatorMatrix id = identity(sys.nucleus.dim());
  return {kron(s.x, id), kron(s.y, id), kron(s.z, id)};
}

SpinOperators nuclear_operators(const TargetSpinSystem& sys) {
  check_dim(sys);
  const SpinOperators i = spin_operators(sys.nucleus);
  const OperatorMatrix id = identity(sys.electron.dim());
  return {kron(id, i.x), kron(id, i.y), kron(id, i.z)};
}

OperatorMatrix hyperfine_hamiltonian(const TargetSpinSystem& sys, bool lab_frame) {
  check_dim(sys);
  const SpinOperators s = spin_operators(sys.electron);
  const SpinOperators i = spin_operators(sys.nucleus);
  const Eigen::Matrix3d a = lab_frame ? sys.hyperfine.lab_matrix()
                                      : Eigen::Matrix3d(sys.hyperfine.principal_values.asDiagonal());
  OperatorMatrix h = OperatorMatrix::Zero(sys.dim(), sys.dim());
  for (int p = 0; p < 3; ++p) {
    for (int q = 0; q < 3; ++q) {
      if (a(p, q) != 0.0) h += a(p, q) * kron(s[p], i[q]);
    }
  }
  if (sys.quadrupole_MHz != 0.0 && sys.nucleus.two_s >= 2) {
    const Eigen::Vector3d axis = lab_frame ? Eigen::Vector3d(rotation_matrix(sys.hyperfine.orientation).col(2))
                                           : Eigen::Vector3d::UnitZ();
    const OperatorMatrix in = axis.x() * i.x + axis.y() * i.y + axis.z() * i.z;
    const double ii = sys.nucleus.spin() * (sys.nucleus.spin() + 1.0);
    const OperatorMatrix q = sys.quadrupole_MHz *
                             (in * in - (ii / 3.0) * identity(sys.nucleus.dim()));
    h += kron(identity(sys.electron.dim()), q);
  }
  return h;
}

OperatorMatrix zeeman_hamiltonian(const TargetSpinSystem& sys, double field_G) {
  const SpinOperators s = electron_operators(sys);
  const SpinOperators i = nuclear_operators(sys);
  return -sys.electron.gyromagnetic_ratio_MHz_per_G * field_G * s.z -
         sys.nucleus.gyromagnetic_ratio_MHz_per_G * field_G * i.z;
}

EigenSystem diagonalize(const OperatorMatrix& h) {
  if (h.rows() != h.cols() || h.rows() == 0) throw invalid_argument("diagonalize: matrix must be square and non-empty");
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  const double asym = (h - h.adjoint()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale) {
    std::ostringstream msg;
    msg << "diagonalize: matrix is not Hermitian (max |H - H^dag| = " << asym << ")";
    throw numeric_error(msg.str());
  }
  const OperatorMatrix sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<OperatorMatrix> solver(sym);
  if (solver.info() != Eigen::Success) throw numeric_error("diagonalize: eigensolver did not converge");
  EigenSystem out{solver.eigenvalues(), solver.eigenvectors()};
  fix_phase(out.states);
  return out;
}

std::array<double, 4> half_half_energies(const Eigen::Vector3d& a) {
  const double axx = a.x(), ayy = a.y(), azz = a.z();
  return {0.25 * (-axx - ayy - azz), 0.25 * (axx + ayy - azz), 0.25 * (-axx + ayy + azz),
          0.25 * (axx - ayy + azz)};
}

std::array<double, 6> half_half_transition_frequencies(const Eigen::Vector3d& a) {
  const double axx = a.x(), ayy = a.y(), azz = a.z();
  return {0.5 * std::abs(axx + ayy), 0.5 * std::abs(axx - ayy), 0.5 * std::abs(ayy + azz),
          0.5 * std::abs(ayy - azz), 0.5 * std::abs(axx + azz), 0.5 * std::abs(axx - azz)};
}

EigenSystem analytic_half_half_eigensystem(const HyperfineTensor& t) {
  const auto w = half_half_energies(t.principal_values);
  // Basis order |uu>, |ud>, |du>, |dd> (electron left, nucleus right).
  const double h = 1.0 / std::sqrt(2.0);
  OperatorMatrix phi = OperatorMatrix::Zero(4, 4);
  phi(1, 0) = h;  phi(2, 0) = -h;  // singlet
  phi(1, 1) = h;  phi(2, 1) = h;
  phi(0, 2) = h;  phi(3, 2) = -h;
  phi(0, 3) = h;  phi(3, 3) = h;

  std::array<int, 4> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(), [&](int l, int r) { return w[l] < w[r]; });
  EigenSystem out{Eigen::VectorXd(4), OperatorMatrix(4, 4)};
  for (int k = 0; k < 4; ++k) {
    out.energies(k) = w[order[k]];
    out.states.col(k) = phi.col(order[k]);
  }
  return out;
}

EigenSystem analytic_half_half_eigensystem(const TargetSpinSystem& sys) {
  if (sys.electron.two_s != 1 || sys.nucleus.two_s != 1) {
    throw invalid_argument("analytic eigensystem requires S = 1/2 and I = 1/2");
  }
  return analytic_half_half_eigensystem(sys.hyperfine);
}

TransitionTable transition_table(const EigenSystem& eig, const SpinOperators& ops) {
  const Eigen::Index n = eig.energies.size();
  if (eig.states.rows() != ops.x.rows() || eig.states.cols() != n) {
    throw invalid_argument("transition_table: operator and eigensystem dimensions differ");
  }
  // Degenerate clusters: consecutive ascending levels closer than the tolerance.
  std::vector<int> cluster(n, 0);
  for (Eigen::Index k = 1; k < n; ++k) {
    cluster[k] = cluster[k - 1] +
                 ((eig.energies(k) - eig.energies(k - 1)) > kDegeneracyTolerance_MHz ? 1 : 0);
  }
  std::array<OperatorMatrix, 3> rotated;
  for (int a = 0; a < 3; ++a) rotated[a] = eig.states.adjoint() * ops[a] * eig.states;

  TransitionTable table;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      Transition t;
      t.i = static_cast<int>(i);
      t.j = static_cast<int>(j);
      t.weight_x = std::norm(rotated[0](j, i));
      t.weight_y = std::norm(rotated[1](j, i));
      t.weight_z = std::norm(rotated[2](j, i));
      t.degenerate = cluster[i] == cluster[j];
      t.frequency = t.degenerate ? 0.0 : eig.energies(j) - eig.energies(i);
      t.forbidden = t.weight_x < kForbiddenWeight && t.weight_y < kForbiddenWeight &&
                    t.weight_z < kForbiddenWeight;
      table.rows.push_back(t);
    }
  }
  return table;
}

std::vector<SpectralLine> TransitionTable::observable_lines() const {
  std::vector<int> idx;
  for (int k = 0; k < static_cast<int>(rows.size()); ++k) {
    if (rows[k].observable()) idx.push_back(k);
  }
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int l, int r) { return rows[l].frequency < rows[r].frequency; });
  std::vector<SpectralLine> lines;
  for (int k : idx) {
    const Transition& t = rows[k];
    if (!lines.empty() && t.frequency - lines.back().frequency <= kDegeneracyTolerance_MHz) {
      lines.back().weight += t.total_weight();
      lines.back().rows.push_back(k);
    } else {
      lines.push_back(SpectralLine{t.frequency, t.total_weight(), {k}});
    }
  }
  return lines;
}

std::vector<double> TransitionTable::observable_frequencies() const {
  std::vector<double> out;
  for (const auto& line : observable_lines()) out.push_back(line.frequency);
  return out;
}

TransitionTable zero_field_table(const TargetSpinSystem& sys) {
  return transition_table(diagonalize(hyperfine_hamiltonian(sys, true)), electron_operators(sys));
}

}  // namespace zfesr
