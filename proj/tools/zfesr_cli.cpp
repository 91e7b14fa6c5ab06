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

// zfesr command-line front end. Uses only the C interface of libzfesr.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "zfesr/zfesr.h"

namespace {

// Machine-readable failure line plus a non-zero exit code per category.
int fail(zfesr_status status) {
  std::cerr << "zfesr: error[" << zfesr_status_name(status) << "]: " << zfesr_last_error() << "\n";
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zfesr: nanoscale zero-field ESR simulation with NV dressed-state sensing"};
  app.set_version_flag("--version", std::string(zfesr_version()));

  std::string subcommand;
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int workers = 0;
  std::string format;
  bool print_defaults = false;
  std::optional<double> r0;
  std::vector<double> centers;
  std::string input;

  app.add_option("subcommand", subcommand, "rabi | spinlock | zf-sweep | deer | fit | invert | budget | peaks")
      ->check(CLI::IsMember({"rabi", "spinlock", "zf-sweep", "deer", "fit", "invert", "budget", "peaks"}));
  app.add_option("--config,-c", config_path, "Experiment config file (defaults when omitted)")->check(CLI::ExistingFile);
  app.add_option("--out-dir,-o", out_dir, "Output directory (overrides [output] dir)");
  app.add_option("--seed", seed, "Random seed (overrides [run] seed)");
  app.add_option("--workers,-j", workers, "Worker threads for sweeps")->check(CLI::Range(1, 256));
  app.add_option("--format", format, "Terminal output: aligned text (csv) or the JSON report (json)")
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_flag("--print-defaults", print_defaults, "Print the default config and exit");
  app.add_option("--r0", r0, "Detection radius in nm for `budget`")->check(CLI::PositiveNumber);
  app.add_option("--centers", centers, "Resonance powers in MHz for `invert`")->delimiter(',');
  app.add_option("--input,-i", input, "Spectrum CSV for `fit` / `invert`")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  if (print_defaults) {
    std::cout << zfesr_default_config_text();
    return 0;
  }
  if (subcommand.empty()) {
    std::cerr << app.help();
    return static_cast<int>(ZFESR_ERR_INVALID_ARGUMENT);
  }

  zfesr_config* config = nullptr;
  zfesr_status st = config_path.empty() ? zfesr_config_default(&config) : zfesr_config_load(config_path.c_str(), &config);
  if (st != ZFESR_OK) return fail(st);

  zfesr_run_options opts;
  zfesr_run_options_init(&opts);
  if (!out_dir.empty()) opts.out_dir = out_dir.c_str();
  if (seed) {
    opts.has_seed = 1;
    opts.seed = *seed;
  }
  opts.workers = workers;
  if (format == "csv") opts.format = ZFESR_FORMAT_CSV;
  if (format == "json") opts.format = ZFESR_FORMAT_JSON;
  if (r0) {
    opts.has_r0 = 1;
    opts.r0_nm = *r0;
  }
  if (!centers.empty()) {
    opts.centers_MHz = centers.data();
    opts.n_centers = centers.size();
  }
  if (!input.empty()) opts.input_path = input.c_str();

  zfesr_report* report = nullptr;
  st = zfesr_run(config, subcommand.c_str(), &opts, &report);
  zfesr_config_free(config);
  if (st != ZFESR_OK) return fail(st);

  std::cout << zfesr_report_summary(report);
  if (format != "json") {
    for (size_t k = 0; k < zfesr_report_file_count(report); ++k) std::cout << "wrote " << zfesr_report_file(report, k) << "\n";
  }
  zfesr_report_free(report);
  return 0;
}
