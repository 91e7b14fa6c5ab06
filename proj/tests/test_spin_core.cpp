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

#include <algorithm>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "zfesr/spin_core.hpp"

using namespace zfesr;
using zfesr::testing::max_abs;

namespace {

std::vector<double> sorted_eigenvalues(const OperatorMatrix& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  std::vector<double> v(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_CASE("spin-1/2 operators are half the Pauli matrices") {
  const SpinOperators s = spin_operators(SpinSpecies::electron());
  CHECK(s.z(0, 0).real() == doctest::Approx(0.5));
  CHECK(s.z(1, 1).real() == doctest::Approx(-0.5));
  CHECK(s.x(0, 1).real() == doctest::Approx(0.5));
  CHECK(s.y(0, 1).imag() == doctest::Approx(-0.5));
}

TEST_CASE("spin-1 operators in the standard basis") {
  const SpinOperators s = spin_operators(SpinSpecies::nv_electron());
  CHECK(s.z(0, 0).real() == doctest::Approx(1.0));
  CHECK(s.z(1, 1).real() == doctest::Approx(0.0));
  CHECK(s.z(2, 2).real() == doctest::Approx(-1.0));
  CHECK(s.x(0, 1).real() == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(s.x(1, 2).real() == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("commutation and Casimir for every supported spin") {
  for (int two_s = 1; two_s <= 3; ++two_s) {
    const SpinSpecies sp{two_s, 0.0};
    const SpinOperators s = spin_operators(sp);
    const Complex i(0.0, 1.0);
    CHECK(max_abs(s.x * s.y - s.y * s.x - i * s.z) < 1e-12);
    CHECK(max_abs(s.y * s.z - s.z * s.y - i * s.x) < 1e-12);
    CHECK(max_abs(s.z * s.x - s.x * s.z - i * s.y) < 1e-12);
    const double ss = sp.spin() * (sp.spin() + 1.0);
    const OperatorMatrix cas = s.x * s.x + s.y * s.y + s.z * s.z;
    CHECK(max_abs(cas - ss * OperatorMatrix::Identity(sp.dim(), sp.dim())) < 1e-12);
  }
}

TEST_CASE("unsupported spin values are rejected") {
  CHECK_THROWS_AS(spin_operators(SpinSpecies{0, 1.0}), Error);
  CHECK_THROWS_AS(spin_operators(SpinSpecies{4, 1.0}), Error);
}

TEST_CASE("rotate_tensor: identity, axial symmetry and eigenvalue preservation") {
  const HyperfineTensor t{Eigen::Vector3d(10.0, 20.0, 30.0), {}};
  CHECK((rotate_tensor(t, {}) - Eigen::Matrix3d(Eigen::Vector3d(10, 20, 30).asDiagonal())).norm() < 1e-14);

  const HyperfineTensor ax = HyperfineTensor::axial(114.0, 159.9);
  CHECK((rotate_tensor(ax, {0.7, 0.0, 0.0}) - rotate_tensor(ax, {})).norm() < 1e-12);

  std::mt19937_64 rng(11);
  for (int k = 0; k < 200; ++k) {
    const HyperfineTensor r{zfesr::testing::random_principal(rng), zfesr::testing::random_euler(rng)};
    const Eigen::Matrix3d m = r.lab_matrix();
    CHECK((m - m.transpose()).norm() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m);
    std::vector<double> want(r.principal_values.data(), r.principal_values.data() + 3);
    std::sort(want.begin(), want.end());
    for (int a = 0; a < 3; ++a) CHECK(std::abs(es.eigenvalues()(a) - want[static_cast<std::size_t>(a)]) < 1e-9);
  }
}

TEST_CASE("euler_from_matrix inverts rotation_matrix") {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 200; ++k) {
    const EulerAngles e = zfesr::testing::random_euler(rng);
    const Eigen::Matrix3d r = rotation_matrix(e);
    CHECK((rotation_matrix(euler_from_matrix(r)) - r).norm() < 1e-10);
  }
  for (double beta : {0.0, std::numbers::pi}) {
    const Eigen::Matrix3d r = rotation_matrix({0.4, beta, 0.3});
    CHECK((rotation_matrix(euler_from_matrix(r)) - r).norm() < 1e-10);
  }
}

TEST_CASE("hyperfine Hamiltonian: null coupling, P1 spectrum, exchange limit") {
  TargetSpinSystem zero = TargetSpinSystem::p1_nitrogen15(0.0, 0.0);
  CHECK(max_abs(hyperfine_hamiltonian(zero)) == 0.0);

  const auto p1 = sorted_eigenvalues(hyperfine_hamiltonian(TargetSpinSystem::p1_nitrogen15()));
  const std::vector<double> want{-96.975, 17.025, 39.975, 39.975};
  for (std::size_t k = 0; k < 4; ++k) CHECK(p1[k] == doctest::Approx(want[k]).epsilon(1e-12));

  TargetSpinSystem iso = TargetSpinSystem::p1_nitrogen15(7.0, 7.0);
  const auto e = sorted_eigenvalues(hyperfine_hamiltonian(iso));
  CHECK(e[0] == doctest::Approx(-3.0 * 7.0 / 4.0));
  for (std::size_t k = 1; k < 4; ++k) CHECK(e[k] == doctest::Approx(7.0 / 4.0));
}

TEST_CASE("hyperfine Hamiltonian is Hermitian and traceless for random systems") {
  std::mt19937_64 rng(3);
  for (int two_i = 1; two_i <= 3; ++two_i) {
    for (int k = 0; k < 30; ++k) {
      TargetSpinSystem sys;
      sys.nucleus = SpinSpecies{two_i, 1e-3};
      sys.hyperfine = {zfesr::testing::random_principal(rng), zfesr::testing::random_euler(rng)};
      sys.quadrupole_MHz = two_i > 1 ? zfesr::testing::uniform(rng, -5.0, 5.0) : 0.0;
      const OperatorMatrix h = hyperfine_hamiltonian(sys);
      CHECK(max_abs(h - h.adjoint()) < 1e-12 * std::max(1.0, max_abs(h)));
      CHECK(std::abs(h.trace()) < 1e-9);
    }
  }
}

TEST_CASE("rotation invariance of the zero-field spectrum over 1000 orientations") {
  std::mt19937_64 rng(2024);
  const Eigen::Vector3d pv(37.0, -81.0, 150.0);
  TargetSpinSystem sys;
  sys.hyperfine.principal_values = pv;
  const auto ref = sorted_eigenvalues(hyperfine_hamiltonian(sys, false));
  for (int k = 0; k < 1000; ++k) {
    sys.hyperfine.orientation = zfesr::testing::random_euler(rng);
    const auto e = sorted_eigenvalues(hyperfine_hamiltonian(sys, true));
    for (std::size_t a = 0; a < 4; ++a) REQUIRE(std::abs(e[a] - ref[a]) < 1e-9);
  }
}

TEST_CASE("diagonalize: trivial diagonal input and residual invariants") {
  OperatorMatrix d = OperatorMatrix::Zero(3, 3);
  d(0, 0) = 1.0;
  d(1, 1) = 2.0;
  d(2, 2) = 3.0;
  const EigenSystem es = diagonalize(d);
  CHECK(es.energies(0) == doctest::Approx(1.0));
  CHECK(es.energies(2) == doctest::Approx(3.0));
  CHECK(max_abs(es.states - OperatorMatrix::Identity(3, 3)) < 1e-14);

  std::mt19937_64 rng(8);
  for (int k = 0; k < 50; ++k) {
    TargetSpinSystem sys;
    sys.hyperfine = {zfesr::testing::random_principal(rng), zfesr::testing::random_euler(rng)};
    const OperatorMatrix h = hyperfine_hamiltonian(sys);
    const EigenSystem e = diagonalize(h);
    const double scale = std::max(1.0, max_abs(h));
    CHECK(max_abs(h * e.states - e.states * e.energies.cast<Complex>().asDiagonal()) < 1e-9 * scale);
    CHECK(max_abs(e.states.adjoint() * e.states - OperatorMatrix::Identity(4, 4)) < 1e-10);
    for (Eigen::Index a = 1; a < 4; ++a) CHECK(e.energies(a) >= e.energies(a - 1));
  }
}

TEST_CASE("diagonalize phase convention: largest component real positive") {
  std::mt19937_64 rng(9);
  TargetSpinSystem sys;
  sys.hyperfine = {zfesr::testing::random_principal(rng), zfesr::testing::random_euler(rng)};
  const EigenSystem e = diagonalize(hyperfine_hamiltonian(sys));
  for (Eigen::Index c = 0; c < 4; ++c) {
    Eigen::Index arg = 0;
    e.states.col(c).cwiseAbs().maxCoeff(&arg);
    CHECK(std::abs(e.states(arg, c).imag()) < 1e-12);
    CHECK(e.states(arg, c).real() > 0.0);
  }
}

TEST_CASE("diagonalize rejects non-Hermitian input") {
  OperatorMatrix m = OperatorMatrix::Zero(2, 2);
  m(0, 1) = 1.0;
  CHECK_THROWS_AS(diagonalize(m), Error);
}

TEST_CASE("analytic spin-1/2 eigensystem matches the closed forms and the numeric solver") {
  const EigenSystem a = analytic_half_half_eigensystem(HyperfineTensor::axial(114.0, 159.9));
  CHECK(a.energies(0) == doctest::Approx(-96.975).epsilon(1e-12));
  CHECK(a.energies(1) == doctest::Approx(17.025).epsilon(1e-12));
  CHECK(a.energies(2) == doctest::Approx(39.975).epsilon(1e-12));
  CHECK(a.energies(3) == doctest::Approx(39.975).epsilon(1e-12));

  std::mt19937_64 rng(17);
  for (int k = 0; k < 300; ++k) {
    const Eigen::Vector3d pv = zfesr::testing::random_principal(rng);
    const auto want = zfesr::testing::closed_form_energies(pv(0), pv(1), pv(2));
    const EigenSystem an = analytic_half_half_eigensystem(HyperfineTensor{pv, {}});
    TargetSpinSystem sys;
    sys.hyperfine.principal_values = pv;
    const EigenSystem nu = diagonalize(hyperfine_hamiltonian(sys, false));
    std::array<double, 4> sorted = want;
    std::sort(sorted.begin(), sorted.end());
    for (Eigen::Index i = 0; i < 4; ++i) {
      CHECK(std::abs(an.energies(i) - sorted[static_cast<std::size_t>(i)]) < 1e-9);
      CHECK(std::abs(nu.energies(i) - an.energies(i)) < 1e-9);
    }
    // State overlap, skipping levels that are (nearly) degenerate.
    for (Eigen::Index i = 0; i < 4; ++i) {
      bool isolated = true;
      for (Eigen::Index j = 0; j < 4; ++j) {
        if (j != i && std::abs(an.energies(i) - an.energies(j)) < 1e-3) isolated = false;
      }
      if (isolated) CHECK(std::abs(an.states.col(i).dot(nu.states.col(i))) > 1.0 - 1e-9);
    }
  }
}

TEST_CASE("analytic eigensystem: isotropic ground state is the singlet") {
  const EigenSystem a = analytic_half_half_eigensystem(HyperfineTensor{Eigen::Vector3d(5.0, 5.0, 5.0), {}});
  StateVector singlet = StateVector::Zero(4);
  singlet(1) = 1.0 / std::sqrt(2.0);
  singlet(2) = -1.0 / std::sqrt(2.0);
  CHECK(std::abs(singlet.dot(a.states.col(0))) == doctest::Approx(1.0));
}

TEST_CASE("analytic eigensystem rejects other spins") {
  TargetSpinSystem sys;
  sys.nucleus = SpinSpecies::nitrogen14();
  CHECK_THROWS_AS(analytic_half_half_eigensystem(sys), Error);
}

TEST_CASE("P1 transition table: three observable lines") {
  const TransitionTable t = zero_field_table(TargetSpinSystem::p1_nitrogen15());
  const auto f = t.observable_frequencies();
  REQUIRE(f.size() == 3);
  CHECK(std::abs(f[0] - 22.95) < 1e-9);
  CHECK(std::abs(f[1] - 114.0) < 1e-9);
  CHECK(std::abs(f[2] - 136.95) < 1e-9);
  int degenerate = 0;
  for (const auto& r : t.rows) {
    CHECK(r.j > r.i);
    CHECK(r.frequency >= 0.0);
    degenerate += r.degenerate ? 1 : 0;
  }
  CHECK(degenerate == 1);
}

TEST_CASE("generic tensors: every line is one of the six half-sum/difference expressions") {
  std::mt19937_64 rng(23);
  for (int k = 0; k < 200; ++k) {
    const Eigen::Vector3d pv = zfesr::testing::random_principal(rng);
    TargetSpinSystem sys;
    sys.hyperfine = {pv, zfesr::testing::random_euler(rng)};
    const std::array<double, 6> want{0.5 * std::abs(pv(0) + pv(1)), 0.5 * std::abs(pv(0) - pv(1)),
                                     0.5 * std::abs(pv(1) + pv(2)), 0.5 * std::abs(pv(1) - pv(2)),
                                     0.5 * std::abs(pv(0) + pv(2)), 0.5 * std::abs(pv(0) - pv(2))};
    const auto lib = half_half_transition_frequencies(pv);
    for (std::size_t a = 0; a < 6; ++a) CHECK(std::abs(lib[a] - want[a]) < 1e-9);
    for (const auto& row : zero_field_table(sys).rows) {
      if (row.degenerate) continue;
      double best = 1e300;
      for (double w : want) best = std::min(best, std::abs(row.frequency - w));
      CHECK(best < 1e-9);
    }
  }
}

TEST_CASE("zero coupling gives no observable lines") {
  CHECK(zero_field_table(TargetSpinSystem::p1_nitrogen15(0.0, 0.0)).observable_lines().empty());
}

TEST_CASE("14N-like system: six numeric levels") {
  TargetSpinSystem sys;
  sys.nucleus = SpinSpecies::nitrogen14();
  sys.hyperfine = HyperfineTensor::axial(81.3, 114.0);
  const EigenSystem e = diagonalize(hyperfine_hamiltonian(sys));
  CHECK(e.energies.size() == 6);
  CHECK(std::abs(e.energies.sum()) < 1e-9);
  CHECK(!zero_field_table(sys).observable_lines().empty());
}

TEST_CASE("Zeeman term splits a free electron by gamma B") {
  TargetSpinSystem sys = TargetSpinSystem::p1_nitrogen15(0.0, 0.0);
  const EigenSystem e = diagonalize(zeeman_hamiltonian(sys, 100.0));
  CHECK(e.energies(3) - e.energies(0) == doctest::Approx(280.3 + 100.0 * 4.316e-4).epsilon(1e-9));
}
