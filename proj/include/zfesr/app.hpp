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

// Subcommand orchestration: builds inputs from an ExperimentConfig, runs the
// physics, and writes `<digest>_<subcommand>.{csv,json,dat,gp}`.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "zfesr/config.hpp"

namespace zfesr {

inline constexpr const char* kSubcommands[] = {"rabi", "spinlock", "zf-sweep", "deer", "fit", "invert", "budget", "peaks"};

bool is_subcommand(const std::string& name);

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<OutputFormat> format;
  std::optional<double> r0_nm;
  std::optional<std::vector<double>> centers_MHz;
  std::optional<std::filesystem::path> input;
};

struct RunReport {
  std::string subcommand;
  std::string digest;
  std::string json;     // full report document
  std::string summary;  // aligned text table for terminals
  std::string csv;      // the data table as written to the .csv file
  std::vector<std::filesystem::path> files;
};

/// 64-bit FNV-1a of the text, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& text);

/// Runs one subcommand. `config_text` is the source the config was parsed
/// from (it feeds the output digest together with the effective overrides).
/// Module errors are rethrown with the subcommand name prefixed.
RunReport run_subcommand(const std::string& subcommand, const ExperimentConfig& config, const std::string& config_text,
                         const RunOptions& options = {});

const char* version_string();

}  // namespace zfesr
