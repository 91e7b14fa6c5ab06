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

#include <random>

#include "doctest.h"
#include "support.hpp"
#include "zfesr/detection_area.hpp"

using namespace zfesr;
using zfesr::testing::uniform;

TEST_CASE("per-spin signal follows r^-6 and vanishes at tau = 0") {
  DetectionAreaParams p;
  const double s15 = per_spin_signal(15.0, p);
  CHECK(per_spin_signal(30.0, p) == doctest::Approx(s15 / 64.0));
  const double c0 = 2.0 * std::numbers::pi * 52.0;
  CHECK(s15 == doctest::Approx(c0 * c0 * 1.25 * 10.0 / (8.0 * 10.0 * std::pow(15.0, 6))));
  p.tau_us = 0.0;
  CHECK(per_spin_signal(15.0, p) == 0.0);
  CHECK_THROWS_AS(per_spin_signal(0.0, DetectionAreaParams{}), Error);
}

TEST_CASE("outer signal at r0 = 15 nm") {
  DetectionAreaParams p;
  const double c0 = 2.0 * std::numbers::pi * 52.0;
  // Hand arithmetic: pi * 5.5e-3 * c0^2 * eta^2 * 10 / (16 * 10 * 15^4).
  const double oracle = std::numbers::pi * 5.5e-3 * c0 * c0 * 10.0 / (16.0 * 10.0 * 50625.0);
  CHECK(outer_signal(15.0, p) == doctest::Approx(1.25 * oracle).epsilon(1e-12));
  CHECK(100.0 * outer_signal(15.0, p) == doctest::Approx(0.28465).epsilon(1e-4));

  p.eta_sq_mean = 0.75;
  CHECK(std::abs(100.0 * outer_signal(15.0, p) - 0.17) <= 0.005);
  CHECK(outer_signal(30.0, p) == doctest::Approx(outer_signal(15.0, p) / 16.0));
}

TEST_CASE("the outer signal is the annulus integral of the per-spin signal") {
  std::mt19937_64 rng(41);
  DetectionAreaParams p;
  for (int k = 0; k < 50; ++k) {
    const double r0 = uniform(rng, 5.0, 100.0);
    const double a = outer_signal(r0, p);
    CHECK(std::abs(outer_signal_quadrature(r0, p) - a) / a < 1e-6);
  }
}

TEST_CASE("outer signal monotonicity") {
  std::mt19937_64 rng(42);
  for (int k = 0; k < 100; ++k) {
    DetectionAreaParams p;
    p.areal_density_per_nm2 = uniform(rng, 1e-3, 1e-1);
    p.gamma_per_us = uniform(rng, 1.0, 50.0);
    p.tau_us = uniform(rng, 1.0, 50.0);
    p.C0_angular_MHz_nm3 = uniform(rng, 50.0, 500.0);
    const double r0 = uniform(rng, 5.0, 50.0);
    const double base = outer_signal(r0, p);
    CHECK(outer_signal(r0 * 1.01, p) < base);
    DetectionAreaParams q = p;
    q.gamma_per_us *= 1.01;
    CHECK(outer_signal(r0, q) < base);
    q = p;
    q.areal_density_per_nm2 *= 1.01;
    CHECK(outer_signal(r0, q) > base);
    q = p;
    q.tau_us *= 1.01;
    CHECK(outer_signal(r0, q) > base);
    q = p;
    q.C0_angular_MHz_nm3 *= 1.01;
    CHECK(outer_signal(r0, q) > base);
  }
}

TEST_CASE("expected spin count") {
  CHECK(expected_spin_count(5.5e-3, 15.0) == doctest::Approx(3.888).epsilon(1e-3));
  CHECK(std::round(expected_spin_count(5.5e-3, 15.0)) == 4.0);
  CHECK(expected_spin_count(5.5e-3, 0.0) == 0.0);
  CHECK(expected_spin_count(1.1e-2, 15.0) == doctest::Approx(2.0 * expected_spin_count(5.5e-3, 15.0)));
  CHECK_THROWS_AS(expected_spin_count(-1.0, 15.0), Error);
}

TEST_CASE("dominance fraction") {
  DetectionAreaParams p;
  CHECK(dominance_fraction(0.03, 15.0, p) == doctest::Approx(1.0 - 0.0028465 / 0.03).epsilon(1e-4));
  CHECK(dominance_fraction(0.03, 15.0, p) > 0.9);
  p.tau_us = 0.0;
  CHECK(dominance_fraction(0.03, 15.0, p) == 1.0);
  DetectionAreaParams q;
  const double outer = outer_signal(15.0, q);
  CHECK(dominance_fraction(outer, 15.0, q) == doctest::Approx(0.0));
  CHECK_THROWS_AS(dominance_fraction(0.5 * outer, 15.0, q), Error);
}

TEST_CASE("budget table uses the published eta^2 per class") {
  const Budget b = budget_table(DetectionAreaParams{}, 0.03);
  REQUIRE(b.rows.size() == 3);
  CHECK(b.rows[0].eta_sq == 1.25);
  CHECK(b.rows[1].eta_sq == 0.75);
  CHECK(b.rows[2].eta_sq == 1.25);
  CHECK(b.rows[0].outer_signal / b.rows[1].outer_signal == doctest::Approx(5.0 / 3.0));
  CHECK(b.rows[0].outer_signal == b.rows[2].outer_signal);
  CHECK(b.expected_count == doctest::Approx(expected_spin_count(5.5e-3, 15.0)));
  const Budget tiny = budget_table(DetectionAreaParams{}, 1e-4);
  CHECK(std::isnan(tiny.rows[0].dominance));
}

TEST_CASE("fixed-direction eta^2 reproduces the dipolar angular factors") {
  std::mt19937_64 rng(43);
  for (int k = 0; k < 50; ++k) {
    const double theta = uniform(rng, 0.0, std::numbers::pi);
    const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const Eigen::Vector3d n(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
    const double c = std::cos(theta), s = std::sin(theta);
    const double zz = (1.0 - 3.0 * c * c) * (1.0 - 3.0 * c * c);
    const double zperp = 9.0 * c * c * s * s;
    CHECK(eta_sq_fixed(LineClass::middle, n, {}) == doctest::Approx(zz).epsilon(1e-9));
    CHECK(eta_sq_fixed(LineClass::left, n, {}) == doctest::Approx(zperp).epsilon(1e-9));
    CHECK(eta_sq_fixed(LineClass::right, n, {}) == doctest::Approx(zperp).epsilon(1e-9));
  }
  CHECK(eta_sq_fixed(LineClass::middle, Eigen::Vector3d::UnitZ(), {}) == doctest::Approx(4.0));
  CHECK(eta_sq_fixed(LineClass::left, Eigen::Vector3d::UnitZ(), {}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(eta_sq_fixed(LineClass::left, Eigen::Vector3d::Zero(), {}), Error);
}

TEST_CASE("Monte-Carlo eta^2 converges to the exact isotropic average") {
  // Under this normalization the isotropic averages are 4/3 and 2/3.
  CHECK(eta_sq_isotropic(LineClass::left) == doctest::Approx(4.0 / 3.0));
  CHECK(eta_sq_isotropic(LineClass::middle) == doctest::Approx(2.0 / 3.0));
  CHECK(eta_sq_isotropic(LineClass::right) == doctest::Approx(4.0 / 3.0));
  for (LineClass c : {LineClass::left, LineClass::middle, LineClass::right}) {
    const double mc = eta_sq_monte_carlo(c, 200000, 7);
    CHECK(std::abs(mc - eta_sq_isotropic(c)) / eta_sq_isotropic(c) < 0.01);
  }
  CHECK(eta_sq_monte_carlo(LineClass::left, 1000, 3) == eta_sq_monte_carlo(LineClass::left, 1000, 3));
  CHECK_THROWS_AS(eta_sq_monte_carlo(LineClass::left, 0, 3), Error);
}

TEST_CASE("published eta^2 constants") {
  CHECK(published_eta_sq(LineClass::left) == 1.25);
  CHECK(published_eta_sq(LineClass::middle) == 0.75);
  CHECK(published_eta_sq(LineClass::right) == 1.25);
}
