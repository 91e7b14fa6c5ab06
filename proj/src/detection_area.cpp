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

#include "zfesr/detection_area.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <boost/math/quadrature/exp_sinh.hpp>

namespace zfesr {

void DetectionAreaParams::validate() const {
  if (!(areal_density_per_nm2 > 0.0) || !(C0_angular_MHz_nm3 > 0.0) || !(eta_sq_mean > 0.0) ||
      !(gamma_per_us > 0.0) || !(tau_us >= 0.0) || !(r0_nm > 0.0)) {
    throw invalid_argument("detection-area parameters must be positive");
  }
}

double per_spin_signal(double r, const DetectionAreaParams& p) {
  p.validate();
  if (!(r > 0.0)) throw invalid_argument("per_spin_signal: r must be positive");
  return p.C0_angular_MHz_nm3 * p.C0_angular_MHz_nm3 * p.eta_sq_mean * p.tau_us / (8.0 * p.gamma_per_us * std::pow(r, 6));
}

double outer_signal(double r0, const DetectionAreaParams& p) {
  p.validate();
  if (!(r0 > 0.0)) throw invalid_argument("outer_signal: r0 must be positive");
  return std::numbers::pi * p.areal_density_per_nm2 * p.C0_angular_MHz_nm3 * p.C0_angular_MHz_nm3 * p.eta_sq_mean *
         p.tau_us / (16.0 * p.gamma_per_us * std::pow(r0, 4));
}

double outer_signal_quadrature(double r0, const DetectionAreaParams& p) {
  p.validate();
  if (!(r0 > 0.0)) throw invalid_argument("outer_signal_quadrature: r0 must be positive");
  // Substitute r = r0 + u so the integrand lives on [0, inf).
  boost::math::quadrature::exp_sinh<double> integrator;
  auto f = [&](double u) {
    const double r = r0 + u;
    return 2.0 * std::numbers::pi * p.areal_density_per_nm2 * per_spin_signal(r, p) * r;
  };
  double error = 0.0;
  const double value = integrator.integrate(f, std::sqrt(std::numeric_limits<double>::epsilon()), &error);
  return value;
}

double expected_spin_count(double sigma, double r0) {
  if (!(sigma >= 0.0) || !(r0 >= 0.0)) throw invalid_argument("expected_spin_count: inputs must be non-negative");
  return std::numbers::pi * r0 * r0 * sigma;
}

double dominance_fraction(double contrast, double r0, const DetectionAreaParams& p) {
  const double outer = outer_signal(r0, p);
  if (!(contrast > 0.0) || contrast < outer) {
    throw invalid_argument("dominance_fraction: contrast is below the outer-spin signal");
  }
  return 1.0 - outer / contrast;
}

double published_eta_sq(LineClass c) { return c == LineClass::middle ? 0.75 : 1.25; }

Budget budget_table(const DetectionAreaParams& p, double contrast) {
  p.validate();
  Budget b;
  b.r0_nm = p.r0_nm;
  b.contrast = contrast;
  b.expected_count = expected_spin_count(p.areal_density_per_nm2, p.r0_nm);
  for (LineClass c : {LineClass::left, LineClass::middle, LineClass::right}) {
    DetectionAreaParams q = p;
    q.eta_sq_mean = published_eta_sq(c);
    BudgetRow row;
    row.line_class = c;
    row.eta_sq = q.eta_sq_mean;
    row.outer_signal = outer_signal(q.r0_nm, q);
    row.dominance = contrast >= row.outer_signal && contrast > 0.0 ? 1.0 - row.outer_signal / contrast
                                                                   : std::numeric_limits<double>::quiet_NaN();
    b.rows.push_back(row);
  }
  return b;
}

namespace {

// Matrix elements <j|S_a|i> between principal-frame eigenstates, restricted
// to the observable rows of one line class.
struct ClassElements {
  std::vector<Eigen::Vector3cd> rows;  // (Sx, Sy, Sz) elements per transition
};

ClassElements class_elements(LineClass c, const TargetSpinSystem& sys) {
  TargetSpinSystem principal = sys;
  principal.hyperfine.orientation = {};
  const EigenSystem eig = diagonalize(hyperfine_hamiltonian(principal, true));
  const SpinOperators s = electron_operators(principal);
  const TransitionTable table = transition_table(eig, s);
  const auto lines = table.observable_lines();
  if (lines.empty()) throw invalid_argument("eta^2: target has no observable lines");

  const Eigen::Vector3d& a = sys.hyperfine.principal_values;
  const double a_perp = 0.5 * (a(0) + a(1));
  const auto powers = axial_resonance_powers(a_perp, a(2));
  const double target = 0.5 * powers[static_cast<std::size_t>(c)];
  std::size_t best = 0;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    if (std::abs(lines[k].frequency - target) < std::abs(lines[best].frequency - target)) best = k;
  }
  ClassElements out;
  for (int r : lines[best].rows) {
    const auto& row = table.rows[static_cast<std::size_t>(r)];
    Eigen::Vector3cd m;
    for (int axis = 0; axis < 3; ++axis) m(axis) = eig.states.col(row.j).adjoint() * s[axis] * eig.states.col(row.i);
    out.rows.push_back(m);
  }
  return out;
}

double eta_from_elements(const ClassElements& ce, const Eigen::Vector3d& g_principal, int dim) {
  double sum = 0.0;
  for (const auto& m : ce.rows) sum += std::norm(g_principal.cast<Complex>().dot(m.conjugate()));
  return 16.0 / dim * sum;
}

Eigen::Vector3d dipolar_unit(const Eigen::Vector3d& direction) {
  const Eigen::Vector3d n = direction.normalized();
  const Eigen::Vector3d a = Eigen::Vector3d::UnitZ();
  return a - 3.0 * a.dot(n) * n;
}

}  // namespace

double eta_sq_fixed(LineClass c, const Eigen::Vector3d& direction, const EulerAngles& orientation,
                    const TargetSpinSystem& sys) {
  if (!(direction.norm() > 0.0)) throw invalid_argument("eta_sq_fixed: direction must be non-zero");
  const ClassElements ce = class_elements(c, sys);
  const Eigen::Vector3d g = rotation_matrix(orientation).transpose() * dipolar_unit(direction);
  return eta_from_elements(ce, g, sys.dim());
}

double eta_sq_monte_carlo(LineClass c, std::int64_t samples, std::uint64_t seed, const TargetSpinSystem& sys) {
  if (samples < 1) throw invalid_argument("eta_sq_monte_carlo: samples must be >= 1");
  const ClassElements ce = class_elements(c, sys);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double sum = 0.0;
  for (std::int64_t k = 0; k < samples; ++k) {
    Eigen::Vector3d dir(normal(rng), normal(rng), normal(rng));
    while (dir.squaredNorm() < 1e-300) dir = Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
    const EulerAngles e = random_orientation(rng);
    const Eigen::Vector3d g = rotation_matrix(e).transpose() * dipolar_unit(dir);
    sum += eta_from_elements(ce, g, sys.dim());
  }
  return sum / static_cast<double>(samples);
}

double eta_sq_isotropic(LineClass c, const TargetSpinSystem& sys) {
  const ClassElements ce = class_elements(c, sys);
  double w = 0.0;
  for (const auto& m : ce.rows) w += m.squaredNorm();
  // <|a - 3 (a.n) n|^2> = 1 + 3 <cos^2> = 2 over the sphere.
  return 2.0 / 3.0 * 16.0 / sys.dim() * w;
}

}  // namespace zfesr
