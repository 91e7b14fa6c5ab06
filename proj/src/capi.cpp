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

#include "zfesr/zfesr.h"

#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "zfesr/app.hpp"
#include "zfesr/config.hpp"
#include "zfesr/detection_area.hpp"
#include "zfesr/spectra.hpp"

struct zfesr_config {
  zfesr::ExperimentConfig config;
  std::string text;
};

struct zfesr_report {
  zfesr::RunReport report;
  std::vector<std::string> files;
};

namespace {

thread_local std::string g_last_error;

zfesr_status to_status(zfesr::ErrorCategory c) {
  switch (c) {
    case zfesr::ErrorCategory::InvalidArgument:
      return ZFESR_ERR_INVALID_ARGUMENT;
    case zfesr::ErrorCategory::Config:
      return ZFESR_ERR_CONFIG;
    case zfesr::ErrorCategory::Numeric:
      return ZFESR_ERR_NUMERIC;
    case zfesr::ErrorCategory::Fit:
      return ZFESR_ERR_FIT;
    case zfesr::ErrorCategory::Io:
      return ZFESR_ERR_IO;
  }
  return ZFESR_ERR_INTERNAL;
}

// Runs `fn`, translating exceptions into status codes and the thread-local
// error message.
template <typename Fn>
zfesr_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return ZFESR_OK;
  } catch (const zfesr::Error& e) {
    g_last_error = e.what();
    return to_status(e.category());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return ZFESR_ERR_INTERNAL;
}

void require(bool ok, const char* what) {
  if (!ok) throw zfesr::invalid_argument(what);
}

}  // namespace

extern "C" {

const char* zfesr_version(void) { return zfesr::version_string(); }

const char* zfesr_last_error(void) { return g_last_error.c_str(); }

const char* zfesr_status_name(zfesr_status status) {
  switch (status) {
    case ZFESR_OK:
      return "ok";
    case ZFESR_ERR_INVALID_ARGUMENT:
      return "invalid_argument";
    case ZFESR_ERR_CONFIG:
      return "config";
    case ZFESR_ERR_NUMERIC:
      return "numeric";
    case ZFESR_ERR_FIT:
      return "fit";
    case ZFESR_ERR_IO:
      return "io";
    case ZFESR_ERR_INTERNAL:
      return "internal";
  }
  return "unknown";
}

zfesr_status zfesr_config_default(zfesr_config** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    *out = nullptr;
    auto* c = new zfesr_config{zfesr::ExperimentConfig{}, zfesr::default_config_text()};
    *out = c;
  });
}

zfesr_status zfesr_config_parse(const char* text, const char* origin, zfesr_config** out) {
  return guarded([&] {
    require(out != nullptr && text != nullptr, "null argument");
    *out = nullptr;
    const std::string src(text);
    auto cfg = zfesr::parse_config_text(src, origin ? origin : "<config>");
    *out = new zfesr_config{std::move(cfg), src};
  });
}

zfesr_status zfesr_config_load(const char* path, zfesr_config** out) {
  return guarded([&] {
    require(out != nullptr && path != nullptr, "null argument");
    *out = nullptr;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw zfesr::io_error(std::string("cannot read config file '") + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string src = ss.str();
    auto cfg = zfesr::parse_config_text(src, path);
    *out = new zfesr_config{std::move(cfg), src};
  });
}

void zfesr_config_free(zfesr_config* config) { delete config; }

const char* zfesr_default_config_text(void) {
  static const std::string text = zfesr::default_config_text();
  return text.c_str();
}

void zfesr_run_options_init(zfesr_run_options* o) {
  if (!o) return;
  *o = zfesr_run_options{};
  o->format = ZFESR_FORMAT_CONFIG;
}

int zfesr_is_subcommand(const char* name) { return name && zfesr::is_subcommand(name) ? 1 : 0; }

zfesr_status zfesr_run(const zfesr_config* config, const char* subcommand, const zfesr_run_options* options,
                       zfesr_report** out) {
  return guarded([&] {
    require(config != nullptr && subcommand != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    zfesr::RunOptions ro;
    if (options) {
      if (options->out_dir) ro.out_dir = options->out_dir;
      if (options->has_seed) ro.seed = options->seed;
      if (options->workers > 0) ro.workers = options->workers;
      if (options->format == ZFESR_FORMAT_CSV) ro.format = zfesr::OutputFormat::csv;
      if (options->format == ZFESR_FORMAT_JSON) ro.format = zfesr::OutputFormat::json;
      if (options->has_r0) {
        require(options->r0_nm > 0.0, "r0 must be positive");
        ro.r0_nm = options->r0_nm;
      }
      if (options->centers_MHz) {
        require(options->n_centers > 0, "centers list is empty");
        ro.centers_MHz = std::vector<double>(options->centers_MHz, options->centers_MHz + options->n_centers);
      }
      if (options->input_path) ro.input = options->input_path;
    }
    auto rep = zfesr::run_subcommand(subcommand, config->config, config->text, ro);
    auto* r = new zfesr_report{std::move(rep), {}};
    for (const auto& f : r->report.files) r->files.push_back(f.string());
    *out = r;
  });
}

const char* zfesr_report_json(const zfesr_report* r) { return r ? r->report.json.c_str() : ""; }
const char* zfesr_report_summary(const zfesr_report* r) { return r ? r->report.summary.c_str() : ""; }
const char* zfesr_report_csv(const zfesr_report* r) { return r ? r->report.csv.c_str() : ""; }
const char* zfesr_report_digest(const zfesr_report* r) { return r ? r->report.digest.c_str() : ""; }
size_t zfesr_report_file_count(const zfesr_report* r) { return r ? r->files.size() : 0; }
const char* zfesr_report_file(const zfesr_report* r, size_t i) {
  return r && i < r->files.size() ? r->files[i].c_str() : nullptr;
}
void zfesr_report_free(zfesr_report* r) { delete r; }

zfesr_status zfesr_half_half_transitions(double axx, double ayy, double azz, double out[6]) {
  return guarded([&] {
    require(out != nullptr, "null output");
    const auto f = zfesr::half_half_transition_frequencies(Eigen::Vector3d(axx, ayy, azz));
    for (int k = 0; k < 6; ++k) out[k] = f[static_cast<std::size_t>(k)];
  });
}

zfesr_status zfesr_observable_lines(double axx, double ayy, double azz, double out[], size_t capacity, size_t* count) {
  return guarded([&] {
    require(count != nullptr, "null count");
    zfesr::TargetSpinSystem sys = zfesr::TargetSpinSystem::p1_nitrogen15();
    sys.hyperfine.principal_values = Eigen::Vector3d(axx, ayy, azz);
    const auto f = zfesr::zero_field_table(sys).observable_frequencies();
    *count = f.size();
    require(out != nullptr || f.empty(), "null output");
    require(capacity >= f.size(), "output capacity too small");
    for (std::size_t k = 0; k < f.size(); ++k) out[k] = f[k];
  });
}

zfesr_status zfesr_axial_resonance_powers(double a_perp, double a_zz, double out[3]) {
  return guarded([&] {
    require(out != nullptr, "null output");
    const auto p = zfesr::axial_resonance_powers(a_perp, a_zz);
    for (int k = 0; k < 3; ++k) out[k] = p[static_cast<std::size_t>(k)];
  });
}

zfesr_status zfesr_invert_axial(const double* centers, const double* errors, size_t n, double* a_perp, double* a_zz,
                                double* a_perp_error, double* a_zz_error, double* residual_rms) {
  return guarded([&] {
    require(centers != nullptr, "null centers");
    std::vector<zfesr::CenterObservation> obs;
    for (size_t k = 0; k < n; ++k) obs.push_back({centers[k], errors ? errors[k] : 0.0, std::nullopt});
    const auto est = zfesr::extract_hyperfine(obs, zfesr::HyperfineModel::axial);
    if (a_perp) *a_perp = est.values(0);
    if (a_zz) *a_zz = est.values(1);
    if (a_perp_error) *a_perp_error = est.errors(0);
    if (a_zz_error) *a_zz_error = est.errors(1);
    if (residual_rms) *residual_rms = est.residual_rms_MHz;
  });
}

zfesr_status zfesr_outer_signal(double sigma, double c0_over_2pi, double eta_sq, double gamma, double tau, double r0,
                                double* fraction) {
  return guarded([&] {
    require(fraction != nullptr, "null output");
    zfesr::DetectionAreaParams p;
    p.areal_density_per_nm2 = sigma;
    p.C0_angular_MHz_nm3 = 2.0 * 3.14159265358979323846 * c0_over_2pi;
    p.eta_sq_mean = eta_sq;
    p.gamma_per_us = gamma;
    p.tau_us = tau;
    p.r0_nm = r0;
    *fraction = zfesr::outer_signal(r0, p);
  });
}

zfesr_status zfesr_eta_sq_monte_carlo(zfesr_line_class line_class, int64_t samples, uint64_t seed, double* estimate) {
  return guarded([&] {
    require(estimate != nullptr, "null output");
    require(line_class >= ZFESR_LINE_LEFT && line_class <= ZFESR_LINE_RIGHT, "unknown line class");
    *estimate = zfesr::eta_sq_monte_carlo(static_cast<zfesr::LineClass>(line_class), samples, seed);
  });
}

zfesr_status zfesr_flip_flop_transfer(double a_perp, double a_zz, const double separation[3], double omega, double tau,
                                      double t1rho, double gamma, double* transfer) {
  return guarded([&] {
    require(separation != nullptr && transfer != nullptr, "null argument");
    zfesr::NVCenter nv;
    nv.rotating_T1rho.constant_us = t1rho;
    zfesr::RelaxationChannels ch = zfesr::RelaxationChannels::from(nv, gamma);
    zfesr::DipolarCoupling c;
    c.separation_nm = Eigen::Vector3d(separation[0], separation[1], separation[2]);
    *transfer = zfesr::flip_flop_transfer(nv, zfesr::TargetSpinSystem::p1_nitrogen15(a_perp, a_zz), c, omega, tau, ch);
  });
}

}  // extern "C"
