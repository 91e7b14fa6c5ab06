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

#include "zfesr/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "parallel.hpp"
#include "zfesr/least_squares.hpp"

namespace zfesr {
namespace {

constexpr double kFourLn2 = 4.0 * std::numbers::ln2;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double gaussian(double x, double center, double fwhm) {
  const double u = (x - center) / fwhm;
  return std::exp(-kFourLn2 * u * u);
}

void require_axis(std::span<const double> axis, const char* who) {
  if (axis.empty()) throw invalid_argument(std::string(who) + ": empty axis");
  for (std::size_t i = 1; i < axis.size(); ++i) {
    if (!(axis[i] > axis[i - 1])) throw invalid_argument(std::string(who) + ": axis must be strictly increasing");
  }
}

TargetSpinSystem oriented(const TargetSpinSystem& sys, const EulerAngles& member) {
  TargetSpinSystem out = sys;
  out.hyperfine.orientation =
      euler_from_matrix(rotation_matrix(member) * rotation_matrix(sys.hyperfine.orientation));
  return out;
}

Eigen::Vector3d unit_dipolar_vector(const Eigen::Vector3d& position, const Eigen::Vector3d& nv_axis) {
  const Eigen::Vector3d n = position.normalized();
  const Eigen::Vector3d a = nv_axis.normalized();
  return a - 3.0 * a.dot(n) * n;
}

// Any unit vector perpendicular to `n`.
Eigen::Vector3d perpendicular(const Eigen::Vector3d& n) {
  const Eigen::Vector3d trial = std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  return (trial - trial.dot(n) * n).normalized();
}

}  // namespace

void Spectrum::validate() const {
  require_axis(axis, "Spectrum");
  if (values.size() != axis.size()) throw invalid_argument("Spectrum: values and axis lengths differ");
  if (!sem.empty() && sem.size() != axis.size()) throw invalid_argument("Spectrum: sem and axis lengths differ");
}

std::vector<double> make_axis(double start, double stop, double step) {
  if (!(step > 0.0) || !(stop >= start)) throw invalid_argument("axis needs step > 0 and stop >= start");
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> axis(n);
  for (std::size_t i = 0; i < n; ++i) axis[i] = start + step * static_cast<double>(i);
  return axis;
}

double gaussian_dips(double x, std::span<const PeakModel> peaks) {
  double sum = 0.0;
  for (const auto& p : peaks) sum += p.depth * gaussian(x, p.center_MHz, p.fwhm_MHz);
  return sum;
}

const char* line_class_name(LineClass c) {
  switch (c) {
    case LineClass::left:
      return "left";
    case LineClass::middle:
      return "middle";
    case LineClass::right:
      return "right";
  }
  return "?";
}

void EnsembleSpec::validate() const {
  if (count < 1) throw invalid_argument("ensemble: count must be >= 1");
  if (orientation_rule == Orientation::fixed && orientations.empty()) {
    throw invalid_argument("ensemble: fixed orientation rule needs at least one orientation");
  }
  if (radial_rule == Radial::fixed) {
    if (positions_nm.empty()) throw invalid_argument("ensemble: fixed radial rule needs at least one position");
    for (const auto& p : positions_nm) {
      if (!(p.norm() > 0.0)) throw invalid_argument("ensemble: positions must be away from the NV");
    }
  } else {
    if (!(r_min_nm > 0.0) || !(r_max_nm >= r_min_nm)) {
      throw invalid_argument("ensemble: annulus needs 0 < r_min <= r_max");
    }
    if (!(plane_normal.norm() > 0.0)) throw invalid_argument("ensemble: plane normal must be non-zero");
  }
}

EulerAngles random_orientation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double alpha = 2.0 * std::numbers::pi * u(rng);
  const double beta = std::acos(std::clamp(1.0 - 2.0 * u(rng), -1.0, 1.0));
  const double gamma = 2.0 * std::numbers::pi * u(rng);
  return {alpha, beta, gamma};
}

std::vector<EnsembleMember> realize_ensemble(const EnsembleSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Eigen::Vector3d n = spec.plane_normal.normalized();
  const Eigen::Vector3d e1 = perpendicular(n);
  const Eigen::Vector3d e2 = n.cross(e1);

  std::vector<EnsembleMember> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  for (int k = 0; k < spec.count; ++k) {
    EnsembleMember m;
    const auto idx = static_cast<std::size_t>(k);
    m.orientation = spec.orientation_rule == EnsembleSpec::Orientation::fixed
                        ? spec.orientations[idx % spec.orientations.size()]
                        : random_orientation(rng);
    if (spec.radial_rule == EnsembleSpec::Radial::fixed) {
      m.position_nm = spec.positions_nm[idx % spec.positions_nm.size()];
    } else {
      // Uniform in area over the annulus.
      const double r2min = spec.r_min_nm * spec.r_min_nm;
      const double r2max = spec.r_max_nm * spec.r_max_nm;
      const double r = std::sqrt(r2min + (r2max - r2min) * u(rng));
      const double phi = 2.0 * std::numbers::pi * u(rng);
      m.position_nm = r * (std::cos(phi) * e1 + std::sin(phi) * e2);
    }
    out.push_back(m);
  }
  return out;
}

std::vector<ZfLine> zf_lines(const TargetSpinSystem& sys, const Eigen::Vector3d& g) {
  const EigenSystem eig = diagonalize(hyperfine_hamiltonian(sys, true));
  const SpinOperators s = electron_operators(sys);
  const OperatorMatrix gs = g.x() * s.x + g.y() * s.y + g.z() * s.z;
  const TransitionTable table = transition_table(eig, s);
  const double norm = 16.0 / static_cast<double>(sys.dim());

  std::vector<ZfLine> out;
  for (const auto& line : table.observable_lines()) {
    double eta = 0.0;
    for (int r : line.rows) {
      const auto& row = table.rows[static_cast<std::size_t>(r)];
      const Complex m = eig.states.col(row.j).adjoint() * gs * eig.states.col(row.i);
      eta += std::norm(m);
    }
    out.push_back({line.frequency, 2.0 * line.frequency, norm * eta});
  }
  return out;
}

double closed_form_transfer(double c0, double eta_sq, double tau, double gamma, double r) {
  if (!(r > 0.0)) throw invalid_argument("closed_form_transfer: r must be positive");
  if (!(gamma > 0.0)) throw invalid_argument("closed_form_transfer: Gamma must be positive");
  return c0 * c0 * eta_sq * tau / (8.0 * gamma * std::pow(r, 6));
}

Spectrum zf_spectrum(const TargetSpinSystem& sys, std::span<const EnsembleMember> ensemble, const NVCenter& nv,
                     const RelaxationChannels& channels, double tau, std::span<const double> axis,
                     const ZfSpectrumOptions& opt) {
  require_axis(axis, "zf_spectrum");
  if (!(tau > 0.0)) throw invalid_argument("zf_spectrum: tau must be positive");
  if (!(opt.fwhm_MHz > 0.0)) throw invalid_argument("zf_spectrum: FWHM must be positive");
  if (opt.contrast && !(*opt.contrast > 0.0 && *opt.contrast < 1.0)) {
    throw invalid_argument("zf_spectrum: contrast must lie in (0, 1)");
  }
  channels.validate();
  const std::size_t n = axis.size();

  std::vector<double> baseline(n);
  for (std::size_t i = 0; i < n; ++i) baseline[i] = std::exp(-tau / channels.nv_T1rho.at(axis[i]));

  std::vector<double> dips(n, 0.0);
  if (opt.mode == ZfSpectrumOptions::Mode::fast) {
    if (!ensemble.empty() && !(channels.target_Gamma_per_us > 0.0)) {
      throw invalid_argument("zf_spectrum: fast mode needs a positive target Gamma");
    }
    std::vector<PeakModel> peaks;
    for (const auto& m : ensemble) {
      const double r = m.position_nm.norm();
      for (const auto& line : zf_lines(oriented(sys, m.orientation), unit_dipolar_vector(m.position_nm, opt.nv_axis))) {
        const double depth =
            closed_form_transfer(opt.C0_angular_MHz_nm3, line.eta_sq, tau, channels.target_Gamma_per_us, r);
        peaks.push_back({line.omega_MHz, opt.fwhm_MHz, depth});
      }
    }
    for (std::size_t i = 0; i < n; ++i) dips[i] = gaussian_dips(axis[i], peaks);
  } else {
    nv.validate();
    std::vector<TargetSpinSystem> systems;
    for (const auto& m : ensemble) systems.push_back(oriented(sys, m.orientation));
    detail::parallel_for(n, opt.workers, [&](std::size_t i) {
      const double leak = 1.0 - baseline[i];
      double excess = 0.0;
      for (std::size_t k = 0; k < ensemble.size(); ++k) {
        const DipolarCoupling c{ensemble[k].position_nm, opt.C0_angular_MHz_nm3};
        excess += flip_flop_transfer(nv, systems[k], c, axis[i], tau, channels, opt.nv_axis) - leak;
      }
      dips[i] = excess / baseline[i];
    });
  }

  if (opt.contrast) {
    const double deepest = *std::max_element(dips.begin(), dips.end());
    if (deepest > 0.0) {
      for (auto& d : dips) d *= *opt.contrast / deepest;
    }
  }
  for (std::size_t i = 0; i < n; ++i) dips[i] += gaussian_dips(axis[i], opt.nuisance_peaks);

  Spectrum s;
  s.axis.assign(axis.begin(), axis.end());
  s.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.values[i] = baseline[i] * (1.0 - std::clamp(dips[i], 0.0, 1.0));
  return s;
}

std::vector<SpectralLine> deer_lines(const TargetSpinSystem& sys, double field_G) {
  const OperatorMatrix h = hyperfine_hamiltonian(sys, true) + zeeman_hamiltonian(sys, field_G);
  const EigenSystem eig = diagonalize(h);
  const TransitionTable table = transition_table(eig, electron_operators(sys));
  std::vector<SpectralLine> lines = table.observable_lines();
  double strongest = 0.0;
  for (auto& line : lines) {
    line.weight = 0.0;
    for (int r : line.rows) {
      const auto& row = table.rows[static_cast<std::size_t>(r)];
      line.weight += row.weight_x + row.weight_y;
    }
    strongest = std::max(strongest, line.weight);
  }
  std::erase_if(lines, [&](const SpectralLine& l) { return !(l.weight >= 1e-3 * strongest) || l.weight <= 0.0; });
  return lines;
}

std::vector<EnsembleMember> members_from_thetas(std::span<const double> thetas) {
  std::vector<EnsembleMember> out;
  for (double t : thetas) {
    EnsembleMember m;
    m.orientation = EulerAngles{0.0, t, 0.0};
    out.push_back(m);
  }
  return out;
}

Spectrum deer_spectrum(const TargetSpinSystem& sys, std::span<const EnsembleMember> ensemble, double field_G,
                       std::span<const double> axis, const DeerSpectrumOptions& opt) {
  require_axis(axis, "deer_spectrum");
  if (!(field_G > 0.0)) throw invalid_argument("deer_spectrum: field must be positive");
  if (!(opt.fwhm_MHz > 0.0)) throw invalid_argument("deer_spectrum: FWHM must be positive");
  if (!(opt.contrast > 0.0 && opt.contrast < 1.0)) throw invalid_argument("deer_spectrum: contrast must lie in (0, 1)");

  // A pure Delta m_s = 1 line of a spin-1/2 electron has x + y weight 1/2 per
  // nuclear state, so a member's lines sum to 1/2 (2I + 1).
  const double full_weight = 0.5 * static_cast<double>(sys.nucleus.dim());
  std::vector<PeakModel> peaks;
  const double per_member = ensemble.empty() ? 0.0 : opt.contrast / static_cast<double>(ensemble.size());
  for (const auto& m : ensemble) {
    for (const auto& line : deer_lines(oriented(sys, m.orientation), field_G)) {
      peaks.push_back({line.frequency, opt.fwhm_MHz, per_member * line.weight / full_weight});
    }
  }
  Spectrum s;
  s.axis.assign(axis.begin(), axis.end());
  s.values.resize(axis.size());
  for (std::size_t i = 0; i < axis.size(); ++i) {
    s.values[i] = 1.0 - std::clamp(gaussian_dips(axis[i], peaks), 0.0, 1.0);
  }
  return s;
}

void BackgroundModel::validate() const {
  if (!(areal_density_per_nm2 > 0.0) || !(g_factor > 0.0) || !(correlation_linewidth_MHz > 0.0) ||
      !(depth_nm > 0.0) || !(tau_us > 0.0) || !(C0_angular_MHz_nm3 > 0.0)) {
    throw invalid_argument("background model parameters must be positive");
  }
}

double BackgroundModel::amplitude() const {
  validate();
  const double gamma_bg = std::numbers::pi * correlation_linewidth_MHz;
  const double a = std::numbers::pi * areal_density_per_nm2 * C0_angular_MHz_nm3 * C0_angular_MHz_nm3 * tau_us /
                   (16.0 * gamma_bg * std::pow(depth_nm, 4));
  return std::min(a, 1.0);
}

Spectrum background_lines(const BackgroundModel& model, BackgroundMode mode, double field_G,
                          std::span<const double> axis) {
  require_axis(axis, "background_lines");
  if (field_G < 0.0) throw invalid_argument("background_lines: field must be non-negative");
  const double amp = model.amplitude();
  const double w = model.correlation_linewidth_MHz;
  Spectrum s;
  s.axis.assign(axis.begin(), axis.end());
  s.values.resize(axis.size());
  const double center = mode == BackgroundMode::deer ? model.g_factor * kBohrMHzPerGauss * field_G : 0.0;
  for (std::size_t i = 0; i < axis.size(); ++i) {
    const double x = axis[i];
    s.values[i] = (mode == BackgroundMode::zf && x < 0.0) ? 0.0 : amp * gaussian(x, center, w);
  }
  return s;
}

Spectrum subtract_dips(const Spectrum& pl, const Spectrum& dips) {
  pl.validate();
  if (dips.axis != pl.axis) throw invalid_argument("subtract_dips: axes differ");
  Spectrum out = pl;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = pl.values[i] - dips.values[i];
  return out;
}

Spectrum calibrate_baseline(const Spectrum& raw, const std::optional<T1rhoModel>& model, double tau) {
  raw.validate();
  if (raw.baseline_calibrated) return raw;
  const std::size_t n = raw.size();
  std::vector<double> base(n);

  if (model) {
    if (!(tau > 0.0)) throw invalid_argument("calibrate_baseline: tau must be positive");
    for (std::size_t i = 0; i < n; ++i) base[i] = std::exp(-tau / model->at(raw.axis[i]));
  } else {
    // Self-calibration: quadratic through the off-peak points, found by
    // iteratively rejecting points well below the current fit.
    constexpr std::size_t kMinOffPeak = 5;
    if (n < kMinOffPeak) throw invalid_argument("calibrate_baseline: too few points to self-calibrate");
    const double x0 = raw.axis.front();
    const double span = std::max(raw.axis.back() - x0, 1e-300);
    std::vector<bool> keep(n, true);
    Eigen::Vector3d coef = Eigen::Vector3d::Zero();
    auto eval = [&](double x) {
      const double u = (x - x0) / span;
      return coef(0) + coef(1) * u + coef(2) * u * u;
    };
    for (int iter = 0; iter < 50; ++iter) {
      const auto m = static_cast<Eigen::Index>(std::count(keep.begin(), keep.end(), true));
      if (static_cast<std::size_t>(m) < kMinOffPeak || m < static_cast<Eigen::Index>(n / 5)) {
        throw invalid_argument("calibrate_baseline: no off-peak region to self-calibrate");
      }
      Eigen::MatrixXd a(m, 3);
      Eigen::VectorXd b(m);
      Eigen::Index row = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!keep[i]) continue;
        const double u = (raw.axis[i] - x0) / span;
        a.row(row) << 1.0, u, u * u;
        b(row++) = raw.values[i];
      }
      coef = a.colPivHouseholderQr().solve(b);
      std::vector<double> dev;
      for (std::size_t i = 0; i < n; ++i) {
        if (keep[i]) dev.push_back(std::abs(raw.values[i] - eval(raw.axis[i])));
      }
      std::nth_element(dev.begin(), dev.begin() + static_cast<std::ptrdiff_t>(dev.size() / 2), dev.end());
      const double scale = std::max(1.4826 * dev[dev.size() / 2], 1e-12 * std::abs(coef(0)));
      std::vector<bool> next(n);
      for (std::size_t i = 0; i < n; ++i) next[i] = raw.values[i] - eval(raw.axis[i]) > -3.0 * scale;
      if (next == keep) break;
      keep = std::move(next);
    }
    for (std::size_t i = 0; i < n; ++i) base[i] = eval(raw.axis[i]);
  }

  Spectrum out = raw;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(base[i] > 0.0)) throw numeric_error("calibrate_baseline: non-positive baseline");
    out.values[i] /= base[i];
    if (out.has_sem()) out.sem[i] /= base[i];
  }
  out.baseline_calibrated = true;
  return out;
}

namespace {

std::vector<PeakModel> default_initial_peaks(const Spectrum& s, int n_peaks) {
  const std::size_t n = s.size();
  const double step = n > 1 ? (s.axis.back() - s.axis.front()) / static_cast<double>(n - 1) : 1.0;
  std::vector<double> sm(n);
  constexpr int kHalfWindow = 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= kHalfWindow ? i - kHalfWindow : 0;
    const std::size_t hi = std::min(n - 1, i + kHalfWindow);
    double sum = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) sum += s.values[k];
    sm[i] = sum / static_cast<double>(hi - lo + 1);
  }

  std::vector<std::size_t> minima;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (sm[i] <= sm[i - 1] && sm[i] < sm[i + 1] && sm[i] < 1.0) minima.push_back(i);
  }
  std::stable_sort(minima.begin(), minima.end(), [&](std::size_t a, std::size_t b) { return sm[a] < sm[b]; });

  std::vector<PeakModel> peaks;
  for (std::size_t idx : minima) {
    if (static_cast<int>(peaks.size()) == n_peaks) break;
    const double depth = 1.0 - sm[idx];
    const double half = 1.0 - 0.5 * depth;
    std::size_t l = idx, r = idx;
    while (l > 0 && sm[l] < half) --l;
    while (r + 1 < n && sm[r] < half) ++r;
    double fwhm = s.axis[r] - s.axis[l];
    fwhm = std::clamp(fwhm, 2.0 * step, 0.5 * (s.axis.back() - s.axis.front()));
    bool separate = true;
    for (const auto& p : peaks) separate = separate && std::abs(p.center_MHz - s.axis[idx]) > 0.5 * p.fwhm_MHz;
    if (separate) peaks.push_back({s.axis[idx], fwhm, std::clamp(depth, 1e-6, 0.999)});
  }
  if (peaks.empty()) {
    const auto idx = static_cast<std::size_t>(std::min_element(s.values.begin(), s.values.end()) - s.values.begin());
    peaks.push_back({s.axis[idx], std::max(8.0, 2.0 * step), std::clamp(1.0 - s.values[idx], 1e-6, 0.999)});
  }
  // Pad with weak satellites of the deepest peak; the fit then reports the
  // surplus as overlapping or insignificant.
  const PeakModel anchor = peaks.front();
  for (int k = 1; static_cast<int>(peaks.size()) < n_peaks; ++k) {
    peaks.push_back({anchor.center_MHz + 0.25 * k * anchor.fwhm_MHz, anchor.fwhm_MHz, 0.1 * anchor.depth});
  }
  return peaks;
}

}  // namespace

FitResult fit_gaussian_peaks(const Spectrum& spec, int n_peaks, const std::optional<std::vector<PeakModel>>& init) {
  spec.validate();
  if (n_peaks < 1) throw invalid_argument("fit_gaussian_peaks: n_peaks must be >= 1");
  const auto np = static_cast<std::size_t>(n_peaks);
  const std::size_t n = spec.size();
  if (n < 3 * np + 1) throw invalid_argument("fit_gaussian_peaks: too few points for the requested peaks");

  std::vector<PeakModel> start = init ? *init : default_initial_peaks(spec, n_peaks);
  if (start.size() != np) throw invalid_argument("fit_gaussian_peaks: initial peak count differs from n_peaks");

  const double x_lo = spec.axis.front();
  const double x_hi = spec.axis.back();
  const double step = (x_hi - x_lo) / static_cast<double>(n - 1);
  const bool weighted = spec.has_sem() && std::all_of(spec.sem.begin(), spec.sem.end(), [](double v) { return v > 0.0; });

  const auto m = static_cast<Eigen::Index>(3 * np);
  Eigen::VectorXd p0(m), lo(m), hi(m);
  for (std::size_t k = 0; k < np; ++k) {
    const auto b = static_cast<Eigen::Index>(3 * k);
    p0.segment(b, 3) << start[k].center_MHz, start[k].fwhm_MHz, start[k].depth;
    lo.segment(b, 3) << x_lo, 0.5 * step, 0.0;
    hi.segment(b, 3) << x_hi, x_hi - x_lo, 1.0;
  }
  p0 = p0.cwiseMax(lo).cwiseMin(hi);

  const ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    r.resize(static_cast<Eigen::Index>(n));
    if (jac) jac->setZero(static_cast<Eigen::Index>(n), m);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double x = spec.axis[i];
      const double inv_s = weighted ? 1.0 / spec.sem[i] : 1.0;
      double model = 1.0;
      for (std::size_t k = 0; k < np; ++k) {
        const auto b = static_cast<Eigen::Index>(3 * k);
        const double c = p(b), w = p(b + 1), d = p(b + 2);
        const double g = gaussian(x, c, w);
        model -= d * g;
        if (jac) {
          const double dx = x - c;
          // r = (y - model) / s, so dr/dp = -dmodel/dp / s = d(d g)/dp / s.
          (*jac)(ii, b) = inv_s * d * g * 2.0 * kFourLn2 * dx / (w * w);
          (*jac)(ii, b + 1) = inv_s * d * g * 2.0 * kFourLn2 * dx * dx / (w * w * w);
          (*jac)(ii, b + 2) = inv_s * g;
        }
      }
      r(ii) = (spec.values[i] - model) * inv_s;
    }
  };

  LsqOptions opt;
  opt.max_iterations = 2000;
  opt.lower = lo;
  opt.upper = hi;
  const LsqResult res = levenberg_marquardt(fn, p0, opt);
  if (!res.converged) {
    throw fit_error("Gaussian peak fit did not converge within " + std::to_string(opt.max_iterations) + " iterations");
  }

  const double dof = static_cast<double>(n) - static_cast<double>(m);
  const double scale = dof > 0.0 ? 2.0 * res.cost / dof : 0.0;
  const Eigen::MatrixXd cov = res.covariance * scale;

  std::vector<std::size_t> order(np);
  for (std::size_t k = 0; k < np; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return res.params(static_cast<Eigen::Index>(3 * a)) <
                                                              res.params(static_cast<Eigen::Index>(3 * b)); });

  FitResult out;
  out.iterations = res.iterations;
  out.residual_norm = std::sqrt(2.0 * res.cost);
  for (std::size_t k : order) {
    const auto b = static_cast<Eigen::Index>(3 * k);
    out.peaks.push_back({res.params(b), res.params(b + 1), res.params(b + 2)});
    auto err = [&](Eigen::Index j) { return std::sqrt(std::max(cov(j, j), 0.0)); };
    out.std_errors.push_back({err(b), err(b + 1), err(b + 2)});
    out.center_errors.push_back(0.5 * res.params(b + 1));
  }

  for (std::size_t a = 0; a < np; ++a) {
    const auto& pa = out.peaks[a];
    if (pa.depth < 1e-4 || pa.depth < 2.0 * out.std_errors[a].depth) {
      out.diagnostics.push_back("peak " + std::to_string(a) + " at " + fmt(pa.center_MHz) + " MHz is insignificant");
    }
    if (pa.fwhm_MHz <= 0.5 * step * (1.0 + 1e-9) || pa.fwhm_MHz >= (x_hi - x_lo) * (1.0 - 1e-9)) {
      out.diagnostics.push_back("peak " + std::to_string(a) + " width hit its bound");
    }
    for (std::size_t b = a + 1; b < np; ++b) {
      const auto& pb = out.peaks[b];
      if (std::abs(pa.center_MHz - pb.center_MHz) < 0.5 * std::max(pa.fwhm_MHz, pb.fwhm_MHz)) {
        out.diagnostics.push_back("peaks " + std::to_string(a) + " and " + std::to_string(b) + " overlap near " +
                                  fmt(pa.center_MHz) + " MHz");
      }
    }
  }
  out.degenerate = !out.diagnostics.empty();
  return out;
}

std::array<double, 3> axial_resonance_powers(double a_perp, double a_zz) {
  return {std::abs(a_zz - a_perp), 2.0 * std::abs(a_perp), std::abs(a_perp + a_zz)};
}

namespace {

struct LinearSolve {
  Eigen::Vector2d x;
  Eigen::Matrix2d cov;
  Eigen::VectorXd pred;
  double rms = 0.0;
};

LinearSolve solve_weighted(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const Eigen::VectorXd& sigma,
                           bool weighted) {
  const Eigen::Index n = a.rows();
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  if (weighted) w = sigma.cwiseInverse();
  const Eigen::MatrixXd aw = w.asDiagonal() * a;
  const Eigen::VectorXd yw = w.cwiseProduct(y);
  const Eigen::Matrix2d normal = aw.transpose() * aw;
  Eigen::FullPivLU<Eigen::Matrix2d> lu(normal);
  if (!lu.isInvertible()) throw invalid_argument("extract_hyperfine: peak classes do not determine both parameters");
  LinearSolve out;
  out.x = lu.solve(aw.transpose() * yw);
  out.pred = a * out.x;
  const Eigen::VectorXd res = y - out.pred;
  out.rms = std::sqrt(res.squaredNorm() / static_cast<double>(n));
  const Eigen::Matrix2d inv = normal.inverse();
  if (weighted) {
    out.cov = inv;
  } else {
    const double dof = static_cast<double>(n - 2);
    out.cov = dof > 0.0 ? Eigen::Matrix2d(inv * (res.squaredNorm() / dof)) : Eigen::Matrix2d::Zero();
  }
  return out;
}

HyperfineEstimate extract_axial(std::span<const CenterObservation> centers, double max_res) {
  const std::size_t n = centers.size();
  if (n < 2) throw invalid_argument("extract_hyperfine: axial model needs at least 2 centers");
  std::vector<LineClass> classes(n);
  const bool labelled = std::all_of(centers.begin(), centers.end(), [](const auto& c) { return c.line_class.has_value(); });
  const bool unlabelled = std::none_of(centers.begin(), centers.end(), [](const auto& c) { return c.line_class.has_value(); });
  if (labelled) {
    for (std::size_t i = 0; i < n; ++i) classes[i] = *centers[i].line_class;
  } else if (unlabelled && n == 3) {
    std::vector<std::size_t> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return centers[a].center_MHz < centers[b].center_MHz; });
    classes[order[0]] = LineClass::left;
    classes[order[1]] = LineClass::middle;
    classes[order[2]] = LineClass::right;
  } else {
    throw invalid_argument("extract_hyperfine: give exactly 3 unlabeled centers or label every center");
  }

  Eigen::VectorXd y(static_cast<Eigen::Index>(n)), sigma(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    y(static_cast<Eigen::Index>(i)) = centers[i].center_MHz;
    sigma(static_cast<Eigen::Index>(i)) = centers[i].error_MHz;
  }
  const bool weighted = (sigma.array() > 0.0).all();

  // The left line is |Azz - A_perp|; try both branches and keep the
  // self-consistent one with the smaller residual (Azz >= A_perp on ties).
  std::optional<LinearSolve> best;
  for (double branch : {1.0, -1.0}) {
    Eigen::MatrixXd a(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      switch (classes[i]) {
        case LineClass::left:
          a.row(ii) << -branch, branch;
          break;
        case LineClass::middle:
          a.row(ii) << 2.0, 0.0;
          break;
        case LineClass::right:
          a.row(ii) << 1.0, 1.0;
          break;
      }
    }
    LinearSolve s = solve_weighted(a, y, sigma, weighted);
    const bool consistent = branch * (s.x(1) - s.x(0)) >= -1e-9;
    if (!consistent) continue;
    if (!best || s.rms < best->rms - 1e-12) best = std::move(s);
  }
  if (!best) throw fit_error("extract_hyperfine: no self-consistent axial solution");
  if (best->rms > max_res) {
    throw fit_error("extract_hyperfine: inconsistent peak set, residual RMS " + fmt(best->rms) + " MHz exceeds " +
                    fmt(max_res) + " MHz");
  }
  HyperfineEstimate est;
  est.model = HyperfineModel::axial;
  est.values = best->x;
  est.errors = best->cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  est.residual_rms_MHz = best->rms;
  est.predicted_MHz.assign(best->pred.data(), best->pred.data() + best->pred.size());
  return est;
}

std::array<double, 6> full_lines(const Eigen::Vector3d& a) {
  return {std::abs(a(0) + a(1)), std::abs(a(0) - a(1)), std::abs(a(1) + a(2)),
          std::abs(a(1) - a(2)), std::abs(a(0) + a(2)), std::abs(a(0) - a(2))};
}

HyperfineEstimate extract_full(std::span<const CenterObservation> centers, double max_res) {
  const std::size_t n = centers.size();
  if (n < 3) throw invalid_argument("extract_hyperfine: full model needs at least 3 centers");
  const bool weighted = std::all_of(centers.begin(), centers.end(), [](const auto& c) { return c.error_MHz > 0.0; });

  // Resonance powers are 2 delta_omega = |A_a +/- A_b|; each center is matched
  // to the nearest predicted line.
  const ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    r.resize(static_cast<Eigen::Index>(n));
    if (jac) jac->setZero(static_cast<Eigen::Index>(n), 3);
    const Eigen::Vector3d a = p;
    const auto lines = full_lines(a);
    static constexpr int kPairs[6][2] = {{0, 1}, {0, 1}, {1, 2}, {1, 2}, {0, 2}, {0, 2}};
    static constexpr double kSigns[6] = {1, -1, 1, -1, 1, -1};
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      std::size_t k = 0;
      for (std::size_t j = 1; j < 6; ++j) {
        if (std::abs(lines[j] - centers[i].center_MHz) < std::abs(lines[k] - centers[i].center_MHz)) k = j;
      }
      const double w = weighted ? 1.0 / centers[i].error_MHz : 1.0;
      r(ii) = w * (lines[k] - centers[i].center_MHz);
      if (jac) {
        const double inner = a(kPairs[k][0]) + kSigns[k] * a(kPairs[k][1]);
        const double sgn = inner >= 0.0 ? 1.0 : -1.0;
        (*jac)(ii, kPairs[k][0]) = w * sgn;
        (*jac)(ii, kPairs[k][1]) = w * sgn * kSigns[k];
      }
    }
  };

  // Multi-start: each ordered triple of centers taken as the three sum lines
  // |Axx+Ayy|, |Ayy+Azz|, |Axx+Azz|.
  std::optional<LsqResult> best;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        if (i == j || j == k || i == k) continue;
        const double s_xy = centers[i].center_MHz, s_yz = centers[j].center_MHz, s_xz = centers[k].center_MHz;
        Eigen::VectorXd p0(3);
        p0 << 0.5 * (s_xy + s_xz - s_yz), 0.5 * (s_xy + s_yz - s_xz), 0.5 * (s_yz + s_xz - s_xy);
        LsqResult res = levenberg_marquardt(fn, p0);
        if (!best || res.cost < best->cost - 1e-12) best = std::move(res);
      }
    }
  }

  Eigen::VectorXd r;
  fn(best->params, r, nullptr);
  Eigen::VectorXd raw = r;
  if (weighted) {
    for (std::size_t i = 0; i < n; ++i) raw(static_cast<Eigen::Index>(i)) *= centers[i].error_MHz;
  }
  const double rms = std::sqrt(raw.squaredNorm() / static_cast<double>(n));
  if (rms > max_res) {
    throw fit_error("extract_hyperfine: inconsistent peak set, residual RMS " + fmt(rms) + " MHz exceeds " +
                    fmt(max_res) + " MHz");
  }
  Eigen::MatrixXd cov = best->covariance;
  if (!weighted) {
    const double dof = static_cast<double>(n) - 3.0;
    cov *= dof > 0.0 ? 2.0 * best->cost / dof : 0.0;
  }

  // Only magnitudes are determined (the line set is invariant under a global
  // sign flip and under relabeling of axes); report them sorted.
  std::array<std::pair<double, double>, 3> mag;
  for (Eigen::Index k = 0; k < 3; ++k) {
    mag[static_cast<std::size_t>(k)] = {std::abs(best->params(k)), std::sqrt(std::max(cov(k, k), 0.0))};
  }
  std::sort(mag.begin(), mag.end());
  HyperfineEstimate est;
  est.model = HyperfineModel::full;
  est.values.resize(3);
  est.errors.resize(3);
  for (Eigen::Index k = 0; k < 3; ++k) {
    est.values(k) = mag[static_cast<std::size_t>(k)].first;
    est.errors(k) = mag[static_cast<std::size_t>(k)].second;
  }
  est.residual_rms_MHz = rms;
  for (std::size_t i = 0; i < n; ++i) est.predicted_MHz.push_back(centers[i].center_MHz + raw(static_cast<Eigen::Index>(i)));
  return est;
}

}  // namespace

HyperfineEstimate extract_hyperfine(std::span<const CenterObservation> centers, HyperfineModel model,
                                    double max_residual_MHz) {
  for (const auto& c : centers) {
    if (!std::isfinite(c.center_MHz) || c.center_MHz < 0.0 || c.error_MHz < 0.0) {
      throw invalid_argument("extract_hyperfine: centers must be finite and non-negative");
    }
  }
  return model == HyperfineModel::axial ? extract_axial(centers, max_residual_MHz)
                                        : extract_full(centers, max_residual_MHz);
}

std::vector<CenterObservation> observations_from_fit(const FitResult& fit) {
  std::vector<CenterObservation> out;
  for (std::size_t k = 0; k < fit.peaks.size(); ++k) {
    out.push_back({fit.peaks[k].center_MHz, fit.center_errors[k], std::nullopt});
  }
  return out;
}

}  // namespace zfesr
