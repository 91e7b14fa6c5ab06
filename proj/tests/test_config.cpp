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

#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "zfesr/config.hpp"

using namespace zfesr;

namespace {

std::string config_error(const std::string& text) {
  try {
    parse_config_text(text, "t.cfg");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::Config);
    return e.what();
  }
  FAIL("expected a config error for: " << text);
  return {};
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("default text parses back to the defaults and is a fixed point") {
  const std::string text = default_config_text();
  const ExperimentConfig parsed = parse_config_text(text);
  const ExperimentConfig defaults;
  CHECK(parsed.target.hyperfine.principal_values == defaults.target.hyperfine.principal_values);
  CHECK(parsed.nv.rotating_T1rho.constant_us == defaults.nv.rotating_T1rho.constant_us);
  CHECK(parsed.coupling.C0_angular_MHz_nm3 == doctest::Approx(defaults.coupling.C0_angular_MHz_nm3));
  CHECK(parsed.rabi.power_MHz == 396.0);
  CHECK(parsed.sweep.contrast.value() == doctest::Approx(0.03));
  CHECK(parsed.ensemble.count == defaults.ensemble.count);
  CHECK(parsed.deer.thetas_rad[1] == doctest::Approx(defaults.deer.thetas_rad[1]));
  CHECK(parsed.fit.calibration == CalibrationRule::model);
  CHECK(parsed.budget.params.areal_density_per_nm2 == doctest::Approx(5.5e-3));
  CHECK(parsed.sequence.segments.size() == defaults.sequence.segments.size());
  CHECK(contains(text, "calibration = model"));
  CHECK(contains(text, "A = 114 114 159.9 MHz"));
}

TEST_CASE("minimal P1 config") {
  const ExperimentConfig c = parse_config_text("[target]\nnucleus = 15N\nA = 114 114 159.9 MHz\n");
  CHECK(c.target.nucleus.two_s == 1);
  CHECK(c.target.hyperfine.principal_values(2) == doctest::Approx(159.9));
  const auto f = zero_field_table(c.target).observable_frequencies();
  REQUIRE(f.size() == 3);
  CHECK(f[0] == doctest::Approx(22.95));
}

TEST_CASE("an empty file is the default configuration") {
  const ExperimentConfig c = parse_config_text("# nothing here\n\n");
  CHECK(c.seed == 1);
  CHECK(c.rabi.power_MHz == 396.0);
}

TEST_CASE("unit conversions") {
  const ExperimentConfig c = parse_config_text(
      "[rabi]\npower = 0.4 GHz\nt_stop = 10 ns\n[nv]\nT1rho = 0.07 ms\n[target]\neuler = 0 1.5707963267948966 0 rad\n"
      "[coupling]\nseparation = 0 0 50 A\n[deer]\nfield = 30 mT\n");
  CHECK(c.rabi.power_MHz == doctest::Approx(400.0));
  CHECK(c.rabi.t_stop_us == doctest::Approx(0.01));
  CHECK(c.nv.rotating_T1rho.constant_us == doctest::Approx(70.0));
  CHECK(c.target.hyperfine.orientation.beta == doctest::Approx(std::numbers::pi / 2));
  CHECK(c.coupling.separation_nm.z() == doctest::Approx(5.0));
  CHECK(c.deer.field_G == doctest::Approx(300.0));
}

TEST_CASE("degrees are converted to radians") {
  const ExperimentConfig c = parse_config_text("[deer]\ntheta = 0 45 90 deg\n");
  REQUIRE(c.deer.thetas_rad.size() == 3);
  CHECK(c.deer.thetas_rad[1] == doctest::Approx(std::numbers::pi / 4));
}

TEST_CASE("negative power is a range error naming the field and line") {
  const std::string e = config_error("[rabi]\npower = -5 MHz\n");
  CHECK(contains(e, "t.cfg:2"));
  CHECK(contains(e, "rabi.power"));
}

TEST_CASE("duplicate keys report both locations") {
  const std::string e = config_error("[rabi]\npower = 5 MHz\npower = 6 MHz\n");
  CHECK(contains(e, "t.cfg:3"));
  CHECK(contains(e, "t.cfg:2"));
  CHECK(contains(e, "rabi.power"));
}

TEST_CASE("unknown sections and keys, missing and wrong units") {
  CHECK(contains(config_error("[bogus]\n"), "unknown section"));
  CHECK(contains(config_error("[rabi]\nfoo = 1\n"), "unknown key 'foo'"));
  CHECK(contains(config_error("[rabi]\npower = 5\n"), "missing unit"));
  CHECK(contains(config_error("[rabi]\npower = 5 us\n"), "not a frequency"));
  CHECK(contains(config_error("power = 5 MHz\n"), "before any section"));
  CHECK(contains(config_error("[target]\nnucleus = 99X\n"), "target.nucleus"));
}

TEST_CASE("every problem is reported, not only the first") {
  const std::string e = config_error("[rabi]\npower = -5 MHz\nfoo = 1\n[bogus]\n");
  CHECK(contains(e, "t.cfg:2"));
  CHECK(contains(e, "t.cfg:3"));
  CHECK(contains(e, "t.cfg:4"));
}

TEST_CASE("sequence segments") {
  const ExperimentConfig c = parse_config_text(
      "[sequence]\nsegment = polarize\nsegment = mw 10 MHz 45 deg 1 us\nsegment = wait 2 us\nsegment = mw 20 MHz -y 0.5 us\n"
      "segment = readout\n");
  REQUIRE(c.sequence.segments.size() == 5);
  const auto& mw = std::get<MwPulse>(c.sequence.segments[1]);
  CHECK(mw.power_MHz == 10.0);
  CHECK(mw.phase_rad == doctest::Approx(std::numbers::pi / 4));
  CHECK(std::get<Wait>(c.sequence.segments[2]).duration_us == 2.0);
  CHECK(std::get<MwPulse>(c.sequence.segments[3]).phase_rad == doctest::Approx(-std::numbers::pi / 2));
  CHECK(contains(config_error("[sequence]\nsegment = mw 10 MHz x 1 us\n"), "polarize"));
  CHECK(contains(config_error("[sequence]\nsegment = polarize\nsegment = jump\nsegment = readout\n"), "t.cfg:3"));
}

TEST_CASE("repeatable keys") {
  const ExperimentConfig c = parse_config_text(
      "[nv]\nt1rho_point = 50 MHz 60 us\nt1rho_point = 150 MHz 80 us\n[sweep]\nnuisance_peak = 80 MHz 8 MHz 0.01\n"
      "nuisance_peak = 130 MHz 8 MHz 0.01\n");
  REQUIRE(c.nv.rotating_T1rho.table.size() == 2);
  CHECK(c.nv.rotating_T1rho.at(100.0) == doctest::Approx(70.0));
  CHECK(c.channels().nv_T1rho.at(100.0) == doctest::Approx(70.0));
  REQUIRE(c.sweep.nuisance_peaks.size() == 2);
  CHECK(c.sweep.nuisance_peaks[1].center_MHz == 130.0);
}

TEST_CASE("contrast can be switched off") {
  const ExperimentConfig c = parse_config_text("[sweep]\ncontrast = off\n");
  CHECK_FALSE(c.sweep.contrast.has_value());
  const ExperimentConfig p = parse_config_text("[sweep]\ncontrast = 0.02\n");
  CHECK(p.sweep.contrast.value() == doctest::Approx(0.02));
}

TEST_CASE("ensemble section") {
  const ExperimentConfig c = parse_config_text(
      "[ensemble]\ncount = 2\norientation = fixed\neuler = 0 10 0 deg\neuler = 0 20 0 deg\nradial = fixed\n"
      "position = 5 0 0 nm\nposition = 0 6 0 nm\n");
  CHECK(c.ensemble.orientation_rule == EnsembleSpec::Orientation::fixed);
  REQUIRE(c.ensemble.orientations.size() == 2);
  CHECK(c.ensemble.orientations[1].beta == doctest::Approx(20.0 * std::numbers::pi / 180.0));
  REQUIRE(c.ensemble.positions_nm.size() == 2);
  CHECK(contains(config_error("[ensemble]\nr_min = 20 nm\nr_max = 10 nm\n"), "r_m"));
}

TEST_CASE("species lookup") {
  CHECK(species_by_name("14N").two_s == 2);
  CHECK(species_by_name("1H").two_s == 1);
  CHECK(species_by_name("electron").gyromagnetic_ratio_MHz_per_G == doctest::Approx(-2.803));
  CHECK_THROWS_AS(species_by_name("2H"), Error);
}

TEST_CASE("14N target with a quadrupole term") {
  const ExperimentConfig c = parse_config_text("[target]\nnucleus = 14N\nA = 81.3 81.3 114 MHz\nquadrupole = -4 MHz\n");
  CHECK(c.target.nucleus.dim() == 3);
  CHECK(c.target.quadrupole_MHz == -4.0);
}

TEST_CASE("config files") {
  const auto dir = std::filesystem::temp_directory_path() / "zfesr_test_config";
  std::filesystem::create_directories(dir);
  const auto path = dir / "p1.cfg";
  std::ofstream(path) << "[rabi]\npower = 200 MHz\n";
  CHECK(parse_config_file(path).rabi.power_MHz == 200.0);
  std::ofstream(dir / "bad.cfg") << "[rabi]\npower = -1 MHz\n";
  try {
    parse_config_file(dir / "bad.cfg");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(contains(e.what(), "bad.cfg:2"));
  }
  CHECK_THROWS_AS(parse_config_file(dir / "missing.cfg"), Error);
  std::filesystem::remove_all(dir);
}
