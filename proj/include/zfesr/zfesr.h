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

/* C interface to the zfesr library.
 *
 * All functions return a zfesr_status. On failure the message is available
 * from zfesr_last_error() on the calling thread until the next call into the
 * library from that thread. Handles are opaque and owned by the caller;
 * release them with the matching *_free function.
 */
#ifndef ZFESR_ZFESR_H_
#define ZFESR_ZFESR_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(ZFESR_BUILDING_LIBRARY)
#define ZFESR_API __declspec(dllexport)
#else
#define ZFESR_API __declspec(dllimport)
#endif
#else
#define ZFESR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum zfesr_status {
  ZFESR_OK = 0,
  ZFESR_ERR_INVALID_ARGUMENT = 1,
  ZFESR_ERR_CONFIG = 2,
  ZFESR_ERR_NUMERIC = 3,
  ZFESR_ERR_FIT = 4,
  ZFESR_ERR_IO = 5,
  ZFESR_ERR_INTERNAL = 6
} zfesr_status;

typedef enum zfesr_line_class { ZFESR_LINE_LEFT = 0, ZFESR_LINE_MIDDLE = 1, ZFESR_LINE_RIGHT = 2 } zfesr_line_class;

typedef enum zfesr_format { ZFESR_FORMAT_CONFIG = 0, ZFESR_FORMAT_CSV = 1, ZFESR_FORMAT_JSON = 2 } zfesr_format;

typedef struct zfesr_config zfesr_config;
typedef struct zfesr_report zfesr_report;

ZFESR_API const char* zfesr_version(void);
ZFESR_API const char* zfesr_last_error(void);
/* Stable lowercase name of a status, e.g. "config" or "fit". */
ZFESR_API const char* zfesr_status_name(zfesr_status status);

/* ---- configuration ---------------------------------------------------- */

ZFESR_API zfesr_status zfesr_config_default(zfesr_config** out);
ZFESR_API zfesr_status zfesr_config_parse(const char* text, const char* origin, zfesr_config** out);
ZFESR_API zfesr_status zfesr_config_load(const char* path, zfesr_config** out);
ZFESR_API void zfesr_config_free(zfesr_config* config);
/* Complete default configuration text; static storage. */
ZFESR_API const char* zfesr_default_config_text(void);

/* ---- runs --------------------------------------------------------------- */

typedef struct zfesr_run_options {
  const char* out_dir;        /* NULL: use the config value */
  int has_seed;
  uint64_t seed;
  int workers;                /* <= 0: use the config value */
  zfesr_format format;
  int has_r0;
  double r0_nm;
  const double* centers_MHz;  /* NULL: use the config value */
  size_t n_centers;
  const char* input_path;     /* NULL: use the config value */
} zfesr_run_options;

ZFESR_API void zfesr_run_options_init(zfesr_run_options* options);

/* Subcommands: rabi, spinlock, zf-sweep, deer, fit, invert, budget, peaks. */
ZFESR_API int zfesr_is_subcommand(const char* name);
ZFESR_API zfesr_status zfesr_run(const zfesr_config* config, const char* subcommand, const zfesr_run_options* options,
                                 zfesr_report** out);

ZFESR_API const char* zfesr_report_json(const zfesr_report* report);
ZFESR_API const char* zfesr_report_summary(const zfesr_report* report);
ZFESR_API const char* zfesr_report_csv(const zfesr_report* report);
ZFESR_API const char* zfesr_report_digest(const zfesr_report* report);
ZFESR_API size_t zfesr_report_file_count(const zfesr_report* report);
ZFESR_API const char* zfesr_report_file(const zfesr_report* report, size_t index);
ZFESR_API void zfesr_report_free(zfesr_report* report);

/* ---- granular numerics -------------------------------------------------- */

/* Six zero-field transition frequencies (MHz) of an S = I = 1/2 system with
 * principal hyperfine values (MHz), in the order |12|, |34|, |13|, |24|, |14|, |23|. */
ZFESR_API zfesr_status zfesr_half_half_transitions(double axx, double ayy, double azz, double out_MHz[6]);

/* Observable zero-field line frequencies (MHz, ascending) from numeric
 * diagonalization of an electron / 15N system. `capacity` bounds `out_MHz`. */
ZFESR_API zfesr_status zfesr_observable_lines(double axx, double ayy, double azz, double out_MHz[], size_t capacity,
                                              size_t* count);

/* Resonance powers (left, middle, right) of an axial tensor. */
ZFESR_API zfesr_status zfesr_axial_resonance_powers(double a_perp, double a_zz, double out_MHz[3]);

/* Axial least-squares inversion of three resonance powers. `errors_MHz` may
 * be NULL (unweighted). Outputs may be NULL when not needed. */
ZFESR_API zfesr_status zfesr_invert_axial(const double* centers_MHz, const double* errors_MHz, size_t n,
                                          double* a_perp, double* a_zz, double* a_perp_error, double* a_zz_error,
                                          double* residual_rms);

/* Outer-spin signal fraction; C0 given as C0/2pi in MHz nm^3, Gamma in 1/us. */
ZFESR_API zfesr_status zfesr_outer_signal(double sigma_per_nm2, double c0_over_2pi, double eta_sq, double gamma_per_us,
                                          double tau_us, double r0_nm, double* fraction);

ZFESR_API zfesr_status zfesr_eta_sq_monte_carlo(zfesr_line_class line_class, int64_t samples, uint64_t seed,
                                                double* estimate);

/* Spin-locked leakage P after the full lock sequence on an NV coupled to an
 * electron / 15N target at `separation_nm` (NV axis z). */
ZFESR_API zfesr_status zfesr_flip_flop_transfer(double a_perp, double a_zz, const double separation_nm[3],
                                                double omega_MHz, double tau_us, double t1rho_us,
                                                double target_gamma_per_us, double* transfer);

#ifdef __cplusplus
}
#endif

#endif /* ZFESR_ZFESR_H_ */
