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

#include "doctest.h"

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI with `args`, capturing stdout and stderr together.
Result cli(const std::string& args) {
  const std::string cmd = std::string("\"") + ZFESR_CLI_PATH + "\" " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("zfesr_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path only_file(const fs::path& dir, const std::string& ext) {
  fs::path found;
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ext) {
      found = e.path();
      ++n;
    }
  }
  return n == 1 ? found : fs::path{};
}

}  // namespace

TEST_CASE("version and defaults") {
  const Result v = cli("--version");
  CHECK(v.code == 0);
  CHECK_FALSE(v.out.empty());

  const Result d = cli("--print-defaults");
  CHECK(d.code == 0);
  CHECK(d.out.find("[nv]") != std::string::npos);
  CHECK(d.out.find("calibration = model") != std::string::npos);
}

TEST_CASE("printed defaults parse back to the same results") {
  TempDir tmp("defaults");
  write(tmp.path / "d.cfg", cli("--print-defaults").out);
  const Result a = cli("budget --format json -o " + (tmp.path / "a").string());
  const Result b = cli("budget --format json -c " + (tmp.path / "d.cfg").string() + " -o " + (tmp.path / "b").string());
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(slurp(only_file(tmp.path / "a", ".csv")) == slurp(only_file(tmp.path / "b", ".csv")));
}

TEST_CASE("peaks prints the three P1 lines and writes four files") {
  TempDir tmp("peaks");
  write(tmp.path / "p1.cfg", "[target]\nnucleus = 15N\nA = 114 114 159.9 MHz\n");
  const Result r = cli("peaks -c " + (tmp.path / "p1.cfg").string() + " -o " + (tmp.path / "out").string());
  REQUIRE(r.code == 0);
  for (const char* w : {"45.9", "228", "273.9"}) CHECK(r.out.find(w) != std::string::npos);
  int wrote = 0;
  for (std::size_t pos = r.out.find("wrote "); pos != std::string::npos; pos = r.out.find("wrote ", pos + 1)) ++wrote;
  CHECK(wrote == 4);
  int files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(tmp.path / "out")) ++files;
  CHECK(files == 4);
}

TEST_CASE("errors exit nonzero with a categorized message") {
  TempDir tmp("errors");
  const Result unknown = cli("sweep");
  CHECK(unknown.code != 0);

  write(tmp.path / "bad.cfg", "[rabi]\npower = -5 MHz\n");
  const Result bad = cli("rabi -c " + (tmp.path / "bad.cfg").string() + " -o " + tmp.path.string());
  CHECK(bad.code == 2);
  CHECK(bad.out.find("zfesr: error[config]:") != std::string::npos);
  CHECK(bad.out.find("bad.cfg:2") != std::string::npos);

  const Result inv = cli("invert --centers 45 -o " + tmp.path.string());
  CHECK(inv.code != 0);
  CHECK(inv.out.find("zfesr: error[") != std::string::npos);

  const Result none = cli("");
  CHECK(none.code != 0);
}

TEST_CASE("reruns are byte identical") {
  TempDir tmp("rerun");
  write(tmp.path / "s.cfg", "[sweep]\nrepetitions = 20000\nstart = 30 MHz\nstop = 60 MHz\n");
  const std::string args = "zf-sweep --seed 11 -c " + (tmp.path / "s.cfg").string();
  REQUIRE(cli(args + " -o " + (tmp.path / "a").string()).code == 0);
  REQUIRE(cli(args + " -j 3 -o " + (tmp.path / "b").string()).code == 0);
  for (const char* ext : {".csv", ".json", ".dat", ".gp"}) {
    CAPTURE(ext);
    const fs::path a = only_file(tmp.path / "a", ext);
    const fs::path b = only_file(tmp.path / "b", ext);
    REQUIRE_FALSE(a.empty());
    CHECK(a.filename() == b.filename());
    CHECK(slurp(a) == slurp(b));
  }
  const std::string csv = slurp(only_file(tmp.path / "a", ".csv"));
  CHECK(csv.find("sem") != std::string::npos);
}

TEST_CASE("noise-free sweeps have no sem column") {
  TempDir tmp("quiet");
  write(tmp.path / "s.cfg", "[sweep]\nstart = 30 MHz\nstop = 60 MHz\n");
  REQUIRE(cli("zf-sweep -c " + (tmp.path / "s.cfg").string() + " -o " + tmp.path.string()).code == 0);
  CHECK(slurp(only_file(tmp.path, ".csv")).find("sem") == std::string::npos);
}

TEST_CASE("invert from command-line centers") {
  TempDir tmp("invert");
  const Result r = cli("invert --format json --centers 44.0,221.7,270.8 -o " + tmp.path.string());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("\"A_perp_MHz\"") != std::string::npos);
  CHECK(r.out.find("111.") != std::string::npos);
}
