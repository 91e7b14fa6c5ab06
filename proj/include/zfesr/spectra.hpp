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

// Spectrum synthesis (zero-field power sweep and DEER frequency sweep),
// orientation/position ensembles, background-bath lines, baseline
// calibration, Gaussian peak fitting and hyperfine tensor inversion.

#include <cstdint>
#include <array>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "zfesr/dynamics.hpp"
#include "zfesr/nv_dressed.hpp"
#include "zfesr/spin_core.hpp"

namespace zfesr {

struct Spectrum {
  std::vector<double> axis;    // MHz, strictly increasing
  std::vector<double> values;  // normalized PL
  std::vector<double> sem;     // empty when no noise layer was applied
  bool baseline_calibrated = false;

  bool has_sem() const { return !sem.empty(); }
  std::size_t size() const { return axis.size(); }
  void validate() const;
};

/// Evenly spaced grid start, start + step, ... <= stop (+ rounding slack).
std::vector<double> make_axis(double start, double stop, double step);

struct PeakModel {
  double center_MHz = 0.0;
  double fwhm_MHz = 8.0;
  double depth = 0.0;  // positive dip below the unit baseline
};

/// sum_k depth_k exp(-4 ln2 (x - c_k)^2 / w_k^2)
double gaussian_dips(double x, std::span<const PeakModel> peaks);

enum class LineClass { left, middle, right };
const char* line_class_name(LineClass c);

struct EnsembleMember {
  EulerAngles orientation;
  Eigen::Vector3d position_nm{5.0, 0.0, 0.0};
};

struct EnsembleSpec {
  enum class Orientation { fixed, random };
  enum class Radial { fixed, annulus };

  int count = 1;
  Orientation orientation_rule = Orientation::fixed;
  std::vector<EulerAngles> orientations{EulerAngles{}};  // cycled when fixed
  Radial radial_rule = Radial::fixed;
  std::vector<Eigen::Vector3d> positions_nm{Eigen::Vector3d(5.0, 0.0, 0.0)};  // cycled when fixed
  double r_min_nm = 5.0;
  double r_max_nm = 15.0;
  // Normal of the thin target layer, in the NV frame. Default: a (100)
  // surface with the NV axis at arccos(1/sqrt 3) from the normal.
  Eigen::Vector3d plane_normal{0.816496580927726, 0.0, 0.577350269189626};
  std::uint64_t seed = 1;

  void validate() const;
};

std::vector<EnsembleMember> realize_ensemble(const EnsembleSpec& spec);

/// Haar-uniform random orientation.
EulerAngles random_orientation(std::mt19937_64& rng);

/// A zero-field observable line with its resonance power and the
/// orientation-averaged-convention coupling factor eta^2.
struct ZfLine {
  double frequency_MHz = 0.0;
  double omega_MHz = 0.0;
  double eta_sq = 0.0;
};

/// eta^2 for each observable line of `sys` (oriented by its tensor orientation)
/// given the unit dipolar vector g = a - 3 (a.n) n. The normalization is
/// (16 / dim) sum_{rows} |<j| g.S |i>|^2, so for an axial spin-1/2 / spin-1/2
/// target the left and right lines carry g_x^2 + g_y^2 and the middle line
/// g_z^2, with g expressed in the tensor frame.
std::vector<ZfLine> zf_lines(const TargetSpinSystem& sys, const Eigen::Vector3d& unit_dipolar_vector);

/// C0^2 eta^2 tau / (8 Gamma r^6); C0 angular (rad/us nm^3), Gamma in 1/us.
double closed_form_transfer(double C0_angular, double eta_sq, double tau_us, double gamma_per_us, double r_nm);

struct ZfSpectrumOptions {
  enum class Mode { fast, exact };
  Mode mode = Mode::fast;
  double fwhm_MHz = 8.0;
  std::optional<double> contrast;  // rescale so the deepest dip equals this
  double C0_angular_MHz_nm3 = 2.0 * 3.14159265358979323846 * 52.0;
  double gamma_per_us = 10.0;  // target dephasing rate used by the closed form
  Eigen::Vector3d nv_axis = Eigen::Vector3d::UnitZ();
  std::vector<PeakModel> nuisance_peaks;
  int workers = 1;
};

/// Power-swept zero-field spectrum. Fast mode sums Gaussian dips at 2 delta_omega
/// with closed-form strengths; exact mode runs the joint-space simulation per
/// axis point and member. The Omega-dependent baseline exp(-tau/T1rho(Omega))
/// is multiplied in.
Spectrum zf_spectrum(const TargetSpinSystem& sys, std::span<const EnsembleMember> ensemble, const NVCenter& nv,
                     const RelaxationChannels& channels, double tau_us, std::span<const double> axis,
                     const ZfSpectrumOptions& options = {});

/// Allowed lines (weight >= 1e-3 of the strongest) of the target in a static
/// field along the NV axis, with weights for a perpendicular probe field.
std::vector<SpectralLine> deer_lines(const TargetSpinSystem& sys, double field_G);

struct DeerSpectrumOptions {
  double fwhm_MHz = 8.0;
  double contrast = 0.03;  // summed line depth of one member (a free electron's single line)
};

std::vector<EnsembleMember> members_from_thetas(std::span<const double> thetas_rad);

/// Frequency-swept DEER spectrum at `field_G`, one set of lines per member
/// orientation (positions ignored; depths normalized by member count).
Spectrum deer_spectrum(const TargetSpinSystem& sys, std::span<const EnsembleMember> ensemble, double field_G,
                       std::span<const double> axis, const DeerSpectrumOptions& options = {});

struct BackgroundModel {
  double areal_density_per_nm2 = 0.05;
  double g_factor = 2.0023;
  double correlation_linewidth_MHz = 60.0;
  double depth_nm = 8.0;  // NV depth below the surface layer
  double tau_us = 10.0;
  double C0_angular_MHz_nm3 = 2.0 * 3.14159265358979323846 * 52.0;

  void validate() const;
  /// Dip amplitude of the integrated bath: pi sigma C0^2 tau / (16 Gamma_bg d^4)
  /// with Gamma_bg = pi * linewidth, clamped to 1.
  double amplitude() const;
};

enum class BackgroundMode { deer, zf };

inline constexpr double kBohrMHzPerGauss = 1.39962449361;

/// Dip contribution (positive values) of the surface bath on `axis`. DEER:
/// one broad Gaussian at g mu_B B / h. ZF: a half-Gaussian shoulder at zero.
Spectrum background_lines(const BackgroundModel& model, BackgroundMode mode, double field_G,
                          std::span<const double> axis);

/// Subtracts a dip contribution from a PL spectrum (same axis).
Spectrum subtract_dips(const Spectrum& pl, const Spectrum& dips);

/// Divides by the modeled baseline exp(-tau/T1rho(Omega)) or, without a model,
/// by a quadratic fitted to the off-peak points. Already-calibrated spectra are
/// returned unchanged.
Spectrum calibrate_baseline(const Spectrum& raw, const std::optional<T1rhoModel>& model, double tau_us);

struct FitResult {
  std::vector<PeakModel> peaks;        // sorted by center
  std::vector<PeakModel> std_errors;   // statistical parameter errors
  std::vector<double> center_errors;   // half the fitted FWHM
  double residual_norm = 0.0;
  int iterations = 0;
  bool degenerate = false;
  std::vector<std::string> diagnostics;
};

/// Nonlinear least squares of 1 - sum Gaussians. Default initial peaks are
/// the n deepest local minima of the smoothed data. Throws Fit on
/// non-convergence.
FitResult fit_gaussian_peaks(const Spectrum& spec, int n_peaks,
                             const std::optional<std::vector<PeakModel>>& init = std::nullopt);

enum class HyperfineModel { axial, full };

struct CenterObservation {
  double center_MHz = 0.0;
  double error_MHz = 0.0;  // 0 means unknown
  std::optional<LineClass> line_class;
};

struct HyperfineEstimate {
  HyperfineModel model = HyperfineModel::axial;
  Eigen::VectorXd values;  // axial: (A_perp, A_zz); full: sorted |A| magnitudes
  Eigen::VectorXd errors;
  double residual_rms_MHz = 0.0;
  std::vector<double> predicted_MHz;  // forward-model position of each input center

  double a_perp() const { return values(0); }
  double a_zz() const { return values(1); }
};

/// Resonance powers 2 delta_omega of the three axial classes.
std::array<double, 3> axial_resonance_powers(double a_perp, double a_zz);

/// Least-squares inversion of resonance powers to hyperfine principal values.
/// Axial: three unlabeled centers are assigned left/middle/right in ascending
/// order; two centers need explicit classes. Full: >= 3 centers, each matched
/// to the nearest of the six lines. Throws Fit when the residual RMS exceeds
/// `max_residual_MHz`.
HyperfineEstimate extract_hyperfine(std::span<const CenterObservation> centers, HyperfineModel model,
                                    double max_residual_MHz = 10.0);

std::vector<CenterObservation> observations_from_fit(const FitResult& fit);

}  // namespace zfesr
