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
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "zfesr/app.hpp"
#include "zfesr/io.hpp"

using namespace zfesr;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("zfesr_app_" + name)) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunReport run(const std::string& sub, const std::string& text, const fs::path& dir, RunOptions o = {}) {
  o.out_dir = dir;
  return run_subcommand(sub, parse_config_text(text), text, o);
}

}  // namespace

TEST_CASE("subcommand names") {
  CHECK(is_subcommand("zf-sweep"));
  CHECK(is_subcommand("budget"));
  CHECK_FALSE(is_subcommand("sweep"));
  CHECK_THROWS_AS(run_subcommand("nope", ExperimentConfig{}, ""), Error);
}

TEST_CASE("FNV-1a reference vectors") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("every subcommand writes its data, report and plot files") {
  TempDir tmp("all");
  const std::string text = default_config_text();
  for (const char* sub : kSubcommands) {
    CAPTURE(sub);
    const RunReport r = run(sub, text, tmp.path);
    CHECK(r.subcommand == sub);
    REQUIRE(r.files.size() == 4);
    for (const auto& f : r.files) CHECK(fs::exists(f));
    CHECK(r.files[0].filename().string() == r.digest + "_" + sub + ".csv");
    const json doc = json::parse(slurp(r.files[1]));
    CHECK(doc["subcommand"] == sub);
    CHECK(doc["config_digest"] == r.digest);
    CHECK(doc["tool"] == "zfesr");
    CHECK_FALSE(doc.contains("timing"));
    CHECK(slurp(r.files[0]) == r.csv);
    CHECK(slurp(r.files[3]).find(r.files[2].filename().string()) != std::string::npos);
    CHECK_FALSE(r.summary.empty());
  }
}

TEST_CASE("peaks on the 15N P1 configuration") {
  TempDir tmp("peaks");
  const RunReport r = run("peaks", "[target]\nnucleus = 15N\nA = 114 114 159.9 MHz\n", tmp.path);
  const json doc = json::parse(r.json);
  const auto& lines = doc["results"]["lines"];
  REQUIRE(lines.size() == 3);
  const double f[3] = {22.95, 114.0, 136.95};
  const double w[3] = {45.9, 228.0, 273.9};
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(std::abs(lines[k]["frequency_MHz"].get<double>() - f[k]) < 1e-9);
    CHECK(std::abs(lines[k]["omega_MHz"].get<double>() - w[k]) < 1e-9);
  }
}

TEST_CASE("budget with an r0 override") {
  TempDir tmp("budget");
  RunOptions o;
  o.r0_nm = 15.0;
  const json a = json::parse(run("budget", "", tmp.path, o).json);
  o.r0_nm = 30.0;
  const json b = json::parse(run("budget", "", tmp.path, o).json);
  const double a0 = a["results"]["rows"][0]["outer_signal_percent"].get<double>();
  const double b0 = b["results"]["rows"][0]["outer_signal_percent"].get<double>();
  CHECK(a0 == doctest::Approx(0.28465).epsilon(1e-4));
  CHECK(a["results"]["rows"][1]["outer_signal_percent"].get<double>() == doctest::Approx(0.17079).epsilon(1e-4));
  CHECK(b0 == doctest::Approx(a0 / 16.0));
  CHECK(a["results"]["expected_spin_count"].get<double>() == doctest::Approx(3.888).epsilon(1e-3));
  CHECK(a["config_digest"] != b["config_digest"]);
}

TEST_CASE("identical config and seed give byte-identical files") {
  TempDir one("det1"), two("det2");
  const std::string text = "[sweep]\nrepetitions = 40000\n[rabi]\nrepetitions = 1000\n";
  for (const char* sub : {"zf-sweep", "rabi", "fit"}) {
    CAPTURE(sub);
    const RunReport a = run(sub, text, one.path);
    const RunReport b = run(sub, text, two.path);
    REQUIRE(a.files.size() == b.files.size());
    for (std::size_t k = 0; k < a.files.size(); ++k) CHECK(slurp(a.files[k]) == slurp(b.files[k]));
  }
  RunOptions o;
  o.seed = 2;
  const RunReport c = run("zf-sweep", text, one.path, o);
  const RunReport d = run("zf-sweep", text, two.path);
  CHECK(c.digest != d.digest);
  CHECK(c.csv != d.csv);
}

TEST_CASE("worker count does not change exact-mode output") {
  TempDir tmp("workers");
  const std::string text = "[sweep]\nmode = exact\nstart = 40 MHz\nstop = 50 MHz\nstep = 2 MHz\n[ensemble]\ncount = 2\n";
  RunOptions o;
  o.workers = 1;
  const RunReport a = run("zf-sweep", text, tmp.path, o);
  o.workers = 4;
  const RunReport b = run("zf-sweep", text, tmp.path, o);
  CHECK(a.csv == b.csv);
}

TEST_CASE("sem column appears only with shot noise") {
  TempDir tmp("sem");
  const RunReport quiet = run("zf-sweep", "", tmp.path);
  CHECK(quiet.csv.find("axis_MHz,pl\n") != std::string::npos);
  CHECK(quiet.csv.find("sem") == std::string::npos);
  const RunReport noisy = run("zf-sweep", "[sweep]\nrepetitions = 40000\n", tmp.path);
  CHECK(noisy.csv.find("axis_MHz,pl,sem\n") != std::string::npos);
}

TEST_CASE("zf-sweep, fit and invert round trip on the defaults") {
  TempDir tmp("pipeline");
  const std::string text = "[sweep]\nrepetitions = 100000\n";
  const RunReport sweep = run("zf-sweep", text, tmp.path);
  RunOptions o;
  o.input = sweep.files[0];
  const json fit = json::parse(run("fit", text, tmp.path, o).json);
  REQUIRE(fit["results"].contains("hyperfine"));
  CHECK(std::abs(fit["results"]["hyperfine"]["A_perp_MHz"].get<double>() - 114.0) < 3.5);
  CHECK(std::abs(fit["results"]["hyperfine"]["A_zz_MHz"].get<double>() - 159.9) < 7.1);
  const json inv = json::parse(run("invert", text, tmp.path, o).json);
  CHECK(inv["results"]["hyperfine"]["A_perp_MHz"] == fit["results"]["hyperfine"]["A_perp_MHz"]);
}

TEST_CASE("invert with explicit centers") {
  TempDir tmp("invert");
  RunOptions o;
  o.centers_MHz = std::vector<double>{44.0, 221.7, 270.8};
  const json doc = json::parse(run("invert", "", tmp.path, o).json);
  CHECK(doc["results"]["hyperfine"]["A_perp_MHz"].get<double>() == doctest::Approx(111.7));
  CHECK(doc["results"]["hyperfine"]["A_zz_MHz"].get<double>() == doctest::Approx(157.4));
  CHECK(doc["results"]["source"] == "centers");
}

TEST_CASE("module errors carry the subcommand prefix and category") {
  TempDir tmp("errors");
  RunOptions o;
  o.centers_MHz = std::vector<double>{44.0, 221.7};
  try {
    run("invert", "", tmp.path, o);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).rfind("invert: ", 0) == 0);
    CHECK(e.category() == ErrorCategory::InvalidArgument);
  }
  o.centers_MHz = std::vector<double>{44.0, 100.0, 390.0};
  try {
    run("invert", "", tmp.path, o);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::Fit);
  }
}

TEST_CASE("output directory is created or refused per flag") {
  TempDir tmp("mkdir");
  const fs::path nested = tmp.path / "a" / "b";
  run("peaks", "", nested);
  CHECK(fs::is_directory(nested));
  const fs::path other = tmp.path / "c";
  try {
    run("peaks", "[output]\ncreate_dir = false\n", other);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::Io);
  }
  CHECK_FALSE(fs::exists(other));
}

TEST_CASE("json format makes the summary the report document") {
  TempDir tmp("json");
  RunOptions o;
  o.format = OutputFormat::json;
  const RunReport r = run("peaks", "", tmp.path, o);
  CHECK(r.summary == r.json);
  CHECK(json::accept(r.summary));
}

TEST_CASE("timing appears only when requested") {
  TempDir tmp("timing");
  const json doc = json::parse(run("peaks", "[output]\ntiming = true\n", tmp.path).json);
  CHECK(doc.contains("timing"));
}

TEST_CASE("spectrum CSV round trip") {
  Spectrum s{{1.0, 2.0, 3.0}, {0.9, 0.8, 0.95}, {0.01, 0.02, 0.01}, true};
  const std::string text = csv_text(spectrum_table(s, "axis_MHz", {"test"}));
  const Spectrum back = parse_spectrum_csv(text);
  CHECK(back.axis == s.axis);
  CHECK(back.values == s.values);
  CHECK(back.sem == s.sem);
  CHECK(back.baseline_calibrated);

  const Spectrum bare = parse_spectrum_csv("1,0.9\n2,0.8\n");
  CHECK(bare.size() == 2);
  CHECK_FALSE(bare.has_sem());
  CHECK_FALSE(bare.baseline_calibrated);
  CHECK_THROWS_AS(parse_spectrum_csv("1,0.9\n2\n"), Error);
  CHECK_THROWS_AS(read_spectrum_csv("/nonexistent/zfesr.csv"), Error);
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 2.5e-5, 396.0, -96.975}) CHECK(std::stod(format_number(v)) == v);
  CHECK(format_number(396.0) == "396");
}
