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

#include "zfesr/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace zfesr {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string csv_text(const Table& t) {
  std::string out;
  for (const auto& c : t.comments) out += "# " + c + "\n";
  for (std::size_t k = 0; k < t.columns.size(); ++k) out += (k ? "," : "") + t.columns[k];
  out += "\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const bool labelled = !t.labels.empty();
    if (labelled) out += t.labels[r];
    const auto& row = t.rows[r];
    for (std::size_t k = 0; k < row.size(); ++k) out += (k || labelled ? "," : "") + format_number(row[k]);
    out += "\n";
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw io_error("write failed for '" + path.string() + "'");
}

Table spectrum_table(const Spectrum& s, const std::string& axis_name, const std::vector<std::string>& comments) {
  s.validate();
  Table t;
  t.comments = comments;
  t.comments.push_back(std::string("calibrated: ") + (s.baseline_calibrated ? "true" : "false"));
  t.columns = {axis_name, "pl"};
  if (s.has_sem()) t.columns.push_back("sem");
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::vector<double> row{s.axis[i], s.values[i]};
    if (s.has_sem()) row.push_back(s.sem[i]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

Spectrum parse_spectrum_csv(const std::string& text, const std::string& origin) {
  Spectrum s;
  std::istringstream in(text);
  int line_no = 0;
  std::size_t width = 0;
  bool header_done = false;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line.front() == '#') {
      if (line.find("calibrated: true") != std::string::npos) s.baseline_calibrated = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    std::vector<double> vals;
    bool numeric = true;
    for (auto& cell : cells) {
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      const std::string c = b == std::string::npos ? "" : cell.substr(b, e - b + 1);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (c.empty() || ec != std::errc() || ptr != c.data() + c.size()) {
        numeric = false;
        break;
      }
      vals.push_back(v);
    }
    if (!numeric) {
      if (header_done || !s.axis.empty()) {
        throw io_error(origin + ":" + std::to_string(line_no) + ": non-numeric data row");
      }
      header_done = true;
      continue;
    }
    if (vals.size() < 2 || vals.size() > 3) {
      throw io_error(origin + ":" + std::to_string(line_no) + ": expected 2 or 3 columns (axis, pl[, sem])");
    }
    if (width == 0) width = vals.size();
    if (vals.size() != width) throw io_error(origin + ":" + std::to_string(line_no) + ": inconsistent column count");
    s.axis.push_back(vals[0]);
    s.values.push_back(vals[1]);
    if (width == 3) s.sem.push_back(vals[2]);
  }
  if (s.axis.empty()) throw io_error(origin + ": no data rows");
  try {
    s.validate();
  } catch (const Error& e) {
    throw io_error(origin + ": " + e.what());
  }
  return s;
}

Spectrum read_spectrum_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read spectrum '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_spectrum_csv(ss.str(), path.string());
}

}  // namespace zfesr
