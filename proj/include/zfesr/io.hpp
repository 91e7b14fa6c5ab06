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

// CSV tables with `#` comment headers, and spectrum (de)serialization.

#include <filesystem>
#include <string>
#include <vector>

#include "zfesr/spectra.hpp"

namespace zfesr {

struct Table {
  std::vector<std::string> comments;  // written as `# ...` lines
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  // Optional text first column (header columns[0]); numeric columns follow.
  std::vector<std::string> labels;
};

/// Shortest round-trip decimal form; `inf`/`nan` for non-finite values.
std::string format_number(double v);

std::string csv_text(const Table& t);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Columns axis_name, pl and (only when the spectrum carries errors) sem.
Table spectrum_table(const Spectrum& s, const std::string& axis_name, const std::vector<std::string>& comments);

/// Reads a spectrum CSV: optional `#` comments (`# calibrated: true` marks a
/// calibrated baseline), an optional header, then axis, pl[, sem] rows.
Spectrum read_spectrum_csv(const std::filesystem::path& path);
Spectrum parse_spectrum_csv(const std::string& text, const std::string& origin = "<csv>");

}  // namespace zfesr
