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

// Declarative experiment configuration.
//
// Format: `[section]` headers and `key = value` lines; `#` starts a comment.
// Every physical quantity carries an explicit unit token after its number(s),
// e.g. `A = 114 114 159.9 MHz` or `t1rho_point = 50 MHz 60 us`. A unit token
// applies to all directly preceding bare numbers.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "zfesr/detection_area.hpp"
#include "zfesr/dynamics.hpp"
#include "zfesr/nv_dressed.hpp"
#include "zfesr/spectra.hpp"
#include "zfesr/spin_core.hpp"

namespace zfesr {

struct RabiSettings {
  double power_MHz = 396.0;
  double t_start_us = 0.0;
  double t_stop_us = 0.01;
  double t_step_us = 2.5e-5;
  std::int64_t repetitions = 0;  // 0 disables the shot-noise layer
  std::vector<double> modulation_scale{1.0};
  std::vector<double> modulation_weight{1.0};
};

struct SpinlockSettings {
  double pi_half_power_MHz = 148.0;
  double power_MHz = 148.0;
  double tau_start_us = 0.0;
  double tau_stop_us = 200.0;
  double tau_step_us = 5.0;
  std::int64_t repetitions = 0;
};

struct SweepSettings {
  double start_MHz = 2.0;
  double stop_MHz = 400.0;
  double step_MHz = 1.0;
  double tau_us = 10.0;
  ZfSpectrumOptions::Mode mode = ZfSpectrumOptions::Mode::fast;
  double fwhm_MHz = 8.0;
  std::optional<double> contrast = 0.03;
  std::int64_t repetitions = 0;
  std::vector<PeakModel> nuisance_peaks;
};

struct DeerSettings {
  double field_G = 300.0;
  double start_MHz = 700.0;
  double stop_MHz = 1000.0;
  double step_MHz = 0.5;
  std::vector<double> thetas_rad{0.0, 1.5707963267948966};
  double fwhm_MHz = 8.0;
  double contrast = 0.03;
};

struct BackgroundSettings {
  bool enabled = false;
  BackgroundModel model;
};

enum class CalibrationRule { model, self, none };

struct FitSettings {
  int n_peaks = 3;
  std::optional<std::filesystem::path> input;
  CalibrationRule calibration = CalibrationRule::model;
};

struct InvertSettings {
  HyperfineModel model = HyperfineModel::axial;
  std::vector<double> centers_MHz;
  std::vector<double> errors_MHz;
  double max_residual_MHz = 10.0;
};

struct BudgetSettings {
  DetectionAreaParams params;
  double contrast = 0.03;
  double residual_field_G = 0.41;
  double target_T2star_us = 0.1;
};

enum class OutputFormat { csv, json };

struct OutputSettings {
  std::filesystem::path dir = "zfesr-out";
  OutputFormat format = OutputFormat::csv;
  bool create_dir = true;
  bool timing = false;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int workers = 1;

  std::string nucleus_name = "15N";
  TargetSpinSystem target = TargetSpinSystem::p1_nitrogen15();
  NVCenter nv;
  double leak_split = 0.5;

  DipolarCoupling coupling;
  Eigen::Vector3d nv_axis = Eigen::Vector3d::UnitZ();
  double target_gamma_per_us = 10.0;

  PulseSequence sequence = PulseSequence::spin_lock(148.0, 148.0, 10.0);
  RabiSettings rabi;
  SpinlockSettings spinlock;
  SweepSettings sweep;
  EnsembleSpec ensemble;
  DeerSettings deer;
  BackgroundSettings background;
  FitSettings fit;
  InvertSettings invert;
  BudgetSettings budget;
  OutputSettings output;

  ExperimentConfig();

  RelaxationChannels channels() const;
};

/// Parses config text. `origin` names the source in error locations. Throws
/// Error(Config) listing every problem found, one per line, as
/// `origin:line: message`.
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");

ExperimentConfig parse_config_file(const std::filesystem::path& path);

/// Complete config text with every default, accepted by parse_config_text.
std::string default_config_text();

/// Species lookup by config name: electron, 15N, 14N, 1H.
SpinSpecies species_by_name(const std::string& name);

}  // namespace zfesr
