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

#include "zfesr/app.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"

#include "parallel.hpp"
#include "zfesr/io.hpp"

#ifndef ZFESR_VERSION_STRING
#define ZFESR_VERSION_STRING "0.0.0"
#endif

namespace zfesr {
namespace {

using nlohmann::json;

// Everything one subcommand produces before it is written out.
struct Output {
  Table table;
  std::vector<std::pair<double, double>> plot;  // two-column plot data
  std::string plot_xlabel = "x";
  std::string plot_ylabel = "y";
  std::string plot_style = "lines";
  json results = json::object();
  std::vector<std::string> warnings;
  std::string summary;
};

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string aligned(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> w(header.size());
  for (std::size_t k = 0; k < header.size(); ++k) w[k] = header[k].size();
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < r.size() && k < w.size(); ++k) w[k] = std::max(w[k], r[k].size());
  }
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) out += (k ? "  " : "") + pad(cells[k], w[k]);
    out += "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

std::vector<double> grid(double start, double stop, double step) { return make_axis(start, stop, step); }

ZfSpectrumOptions zf_options(const ExperimentConfig& c, int workers) {
  ZfSpectrumOptions o;
  o.mode = c.sweep.mode;
  o.fwhm_MHz = c.sweep.fwhm_MHz;
  o.contrast = c.sweep.contrast;
  o.C0_angular_MHz_nm3 = c.coupling.C0_angular_MHz_nm3;
  o.nv_axis = c.nv_axis;
  o.nuisance_peaks = c.sweep.nuisance_peaks;
  o.workers = workers;
  return o;
}

BackgroundModel background_model(const ExperimentConfig& c) {
  BackgroundModel m = c.background.model;
  m.C0_angular_MHz_nm3 = c.coupling.C0_angular_MHz_nm3;
  return m;
}

void add_noise(Spectrum& s, std::int64_t repetitions, std::uint64_t seed) {
  if (repetitions <= 0) return;
  std::mt19937_64 rng(seed);
  NoisyTrace noisy = apply_shot_noise(s.values, repetitions, rng);
  s.values = std::move(noisy.values);
  s.sem = std::move(noisy.sem);
}

json peaks_json(const FitResult& fit) {
  json arr = json::array();
  for (std::size_t k = 0; k < fit.peaks.size(); ++k) {
    arr.push_back({{"center_MHz", fit.peaks[k].center_MHz},
                   {"fwhm_MHz", fit.peaks[k].fwhm_MHz},
                   {"depth", fit.peaks[k].depth},
                   {"center_error_MHz", fit.center_errors[k]},
                   {"center_std_error_MHz", fit.std_errors[k].center_MHz},
                   {"fwhm_std_error_MHz", fit.std_errors[k].fwhm_MHz},
                   {"depth_std_error", fit.std_errors[k].depth}});
  }
  return arr;
}

json estimate_json(const HyperfineEstimate& est) {
  json j;
  if (est.model == HyperfineModel::axial) {
    j["model"] = "axial";
    j["A_perp_MHz"] = est.values(0);
    j["A_zz_MHz"] = est.values(1);
    j["A_perp_error_MHz"] = est.errors(0);
    j["A_zz_error_MHz"] = est.errors(1);
  } else {
    j["model"] = "full";
    j["A_magnitudes_MHz"] = std::vector<double>(est.values.data(), est.values.data() + est.values.size());
    j["A_errors_MHz"] = std::vector<double>(est.errors.data(), est.errors.data() + est.errors.size());
  }
  j["residual_rms_MHz"] = est.residual_rms_MHz;
  j["predicted_MHz"] = est.predicted_MHz;
  return j;
}

// ---------------------------------------------------------------- rabi
Output run_rabi(const ExperimentConfig& c, std::uint64_t seed, int workers) {
  const auto& r = c.rabi;
  const std::vector<double> ts = grid(r.t_start_us, r.t_stop_us, r.t_step_us);
  const RabiModulation mod{r.modulation_scale, r.modulation_weight};
  std::vector<double> pl(ts.size());
  detail::parallel_for(ts.size(), workers, [&](std::size_t i) {
    const double t = ts[i];
    pl[i] = rabi_trace(r.power_MHz, std::span(&t, 1), mod).front();
  });
  Spectrum s{ts, pl, {}, false};
  add_noise(s, r.repetitions, seed);

  Output out;
  out.table = spectrum_table(s, "time_us", {"zfesr rabi trace: time_us = pulse length, pl = normalized PL"});
  out.table.comments.pop_back();  // calibration flag is meaningless for traces
  for (std::size_t i = 0; i < ts.size(); ++i) out.plot.emplace_back(ts[i], s.values[i]);
  out.plot_xlabel = "pulse length (us)";
  out.plot_ylabel = "normalized PL";
  out.plot_style = "linespoints";

  out.results["power_MHz"] = r.power_MHz;
  out.results["points"] = ts.size();
  try {
    const RabiFit fit = fit_rabi(ts, s.values);
    out.results["fit"] = {{"frequency_MHz", fit.frequency_MHz},
                          {"frequency_error_MHz", fit.frequency_error_MHz},
                          {"offset", fit.offset},
                          {"amplitude", fit.amplitude},
                          {"phase_rad", fit.phase_rad}};
    out.summary = aligned({"quantity", "value"}, {{"drive power (MHz)", fixed(r.power_MHz, 3)},
                                                  {"fitted Rabi frequency (MHz)", fixed(fit.frequency_MHz, 3)},
                                                  {"fit error (MHz)", fixed(fit.frequency_error_MHz, 3)}});
  } catch (const Error& e) {
    out.warnings.push_back(std::string("Rabi fit failed: ") + e.what());
  }
  if (auto w = drive_power_warning(r.power_MHz, linewidth_budget(c.nv, c.nv.dephasing_T2star_us, 0.0).dephasing_MHz)) {
    out.warnings.push_back(*w);
  }
  return out;
}

// ---------------------------------------------------------------- spinlock
Output run_spinlock(const ExperimentConfig& c, std::uint64_t seed, int workers) {
  const auto& sl = c.spinlock;
  const std::vector<double> taus = grid(sl.tau_start_us, sl.tau_stop_us, sl.tau_step_us);
  const RelaxationChannels ch = c.channels();
  std::vector<double> pl(taus.size());
  detail::parallel_for(taus.size(), workers, [&](std::size_t i) {
    const double t = taus[i];
    pl[i] = spinlock_trace(c.nv, ch, sl.pi_half_power_MHz, sl.power_MHz, std::span(&t, 1)).front();
  });
  Spectrum s{taus, pl, {}, false};
  add_noise(s, sl.repetitions, seed);

  Output out;
  out.table = spectrum_table(s, "tau_us", {"zfesr spin-lock trace: tau_us = locking time, pl = normalized PL"});
  out.table.comments.pop_back();
  for (std::size_t i = 0; i < taus.size(); ++i) out.plot.emplace_back(taus[i], s.values[i]);
  out.plot_xlabel = "locking time (us)";
  out.plot_ylabel = "normalized PL";
  out.plot_style = "linespoints";

  out.results["pi_half_power_MHz"] = sl.pi_half_power_MHz;
  out.results["lock_power_MHz"] = sl.power_MHz;
  out.results["model_T1rho_us"] = ch.nv_T1rho.at(sl.power_MHz);
  std::vector<std::vector<std::string>> rows{{"T1rho model (us)", fixed(ch.nv_T1rho.at(sl.power_MHz), 3)}};
  try {
    const DecayFit fit = fit_decay(taus, s.values);
    out.results["fit"] = {{"T1rho_us", fit.time_constant_us},
                          {"T1rho_error_us", fit.time_constant_error_us},
                          {"amplitude", fit.amplitude}};
    rows.push_back({"fitted T1rho (us)", fixed(fit.time_constant_us, 3)});
  } catch (const Error& e) {
    out.warnings.push_back(std::string("decay fit failed: ") + e.what());
  }

  // The configured sequence, run on the NV coupled to one target at the
  // configured separation.
  const CoupledTarget target{c.target, c.coupling, c.nv_axis};
  const double seq_pl = run_sequence(c.sequence, c.nv, ch, target);
  out.results["sequence"] = {{"segments", c.sequence.segments.size()},
                             {"separation_nm", std::vector<double>(c.coupling.separation_nm.data(),
                                                                   c.coupling.separation_nm.data() + 3)},
                             {"pl", seq_pl}};
  rows.push_back({"configured sequence PL", fixed(seq_pl, 6)});
  out.summary = aligned({"quantity", "value"}, rows);
  return out;
}

// ---------------------------------------------------------------- zf-sweep
Spectrum synthesize_zf(const ExperimentConfig& c, std::uint64_t seed, int workers, Output& out) {
  EnsembleSpec spec = c.ensemble;
  spec.seed = seed;
  const std::vector<EnsembleMember> members = realize_ensemble(spec);
  const std::vector<double> axis = grid(c.sweep.start_MHz, c.sweep.stop_MHz, c.sweep.step_MHz);
  Spectrum s = zf_spectrum(c.target, members, c.nv, c.channels(), c.sweep.tau_us, axis, zf_options(c, workers));
  if (c.background.enabled) {
    s = subtract_dips(s, background_lines(background_model(c), BackgroundMode::zf, 0.0, axis));
  }
  add_noise(s, c.sweep.repetitions, seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<double> expected;
  for (const auto& rp : resonance_powers(zero_field_table(c.target))) expected.push_back(rp.omega_MHz);
  out.results["expected_resonance_powers_MHz"] = expected;
  out.results["ensemble_members"] = members.size();
  out.results["mode"] = c.sweep.mode == ZfSpectrumOptions::Mode::fast ? "fast" : "exact";
  return s;
}

Output run_zf_sweep(const ExperimentConfig& c, std::uint64_t seed, int workers) {
  Output out;
  const Spectrum s = synthesize_zf(c, seed, workers, out);
  out.table = spectrum_table(s, "axis_MHz", {"zfesr zero-field sweep: axis_MHz = drive power Omega, pl = normalized PL"});
  for (std::size_t i = 0; i < s.size(); ++i) out.plot.emplace_back(s.axis[i], s.values[i]);
  out.plot_xlabel = "drive power Omega (MHz)";
  out.plot_ylabel = "normalized PL";

  std::vector<std::vector<std::string>> rows;
  for (double w : out.results["expected_resonance_powers_MHz"].get<std::vector<double>>()) {
    const auto it = std::min_element(s.axis.begin(), s.axis.end(),
                                     [&](double a, double b) { return std::abs(a - w) < std::abs(b - w); });
    const std::size_t i = static_cast<std::size_t>(it - s.axis.begin());
    rows.push_back({fixed(w, 3), fixed(s.values[i], 6)});
  }
  out.summary = aligned({"resonance Omega (MHz)", "PL at nearest point"}, rows);
  out.results["points"] = s.size();
  return out;
}

// ---------------------------------------------------------------- deer
Output run_deer(const ExperimentConfig& c) {
  const auto& d = c.deer;
  const std::vector<double> axis = grid(d.start_MHz, d.stop_MHz, d.step_MHz);
  const std::vector<EnsembleMember> members = members_from_thetas(d.thetas_rad);
  Spectrum s = deer_spectrum(c.target, members, d.field_G, axis, {d.fwhm_MHz, d.contrast});
  if (c.background.enabled) {
    s = subtract_dips(s, background_lines(background_model(c), BackgroundMode::deer, d.field_G, axis));
  }
  Output out;
  out.table = spectrum_table(s, "axis_MHz", {"zfesr DEER sweep: axis_MHz = probe frequency, pl = normalized PL"});
  for (std::size_t i = 0; i < s.size(); ++i) out.plot.emplace_back(s.axis[i], s.values[i]);
  out.plot_xlabel = "probe frequency (MHz)";
  out.plot_ylabel = "normalized PL";

  json per_theta = json::array();
  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < members.size(); ++k) {
    TargetSpinSystem sys = c.target;
    sys.hyperfine.orientation =
        euler_from_matrix(rotation_matrix(members[k].orientation) * rotation_matrix(c.target.hyperfine.orientation));
    std::vector<double> f;
    std::string list;
    for (const auto& l : deer_lines(sys, d.field_G)) {
      f.push_back(l.frequency);
      list += (list.empty() ? "" : " ") + fixed(l.frequency, 2);
    }
    per_theta.push_back({{"theta_deg", d.thetas_rad[k] * 180.0 / std::numbers::pi}, {"lines_MHz", f}});
    rows.push_back({fixed(d.thetas_rad[k] * 180.0 / std::numbers::pi, 2), list});
  }
  out.results["field_G"] = d.field_G;
  out.results["lines"] = per_theta;
  if (c.background.enabled) {
    out.results["background_center_MHz"] = c.background.model.g_factor * kBohrMHzPerGauss * d.field_G;
  }
  out.summary = aligned({"theta (deg)", "DEER lines (MHz)"}, rows);
  return out;
}

// ---------------------------------------------------------------- fit
Spectrum fit_input(const ExperimentConfig& c, const RunOptions& o, std::uint64_t seed, int workers, Output& out) {
  const auto input = o.input ? o.input : c.fit.input;
  Spectrum s;
  if (input) {
    s = read_spectrum_csv(*input);
    out.results["input"] = input->string();
  } else {
    s = synthesize_zf(c, seed, workers, out);
    out.results["input"] = "synthesized";
  }
  switch (c.fit.calibration) {
    case CalibrationRule::model:
      s = calibrate_baseline(s, c.channels().nv_T1rho, c.sweep.tau_us);
      break;
    case CalibrationRule::self:
      s = calibrate_baseline(s, std::nullopt, c.sweep.tau_us);
      break;
    case CalibrationRule::none:
      break;
  }
  return s;
}

Output run_fit(const ExperimentConfig& c, const RunOptions& o, std::uint64_t seed, int workers) {
  Output out;
  const Spectrum s = fit_input(c, o, seed, workers, out);
  const FitResult fit = fit_gaussian_peaks(s, c.fit.n_peaks);

  out.table.comments = {"zfesr Gaussian fit: axis_MHz = drive power, pl = data, model = fitted curve"};
  out.table.columns = {"axis_MHz", "pl", "model"};
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double model = 1.0 - gaussian_dips(s.axis[i], fit.peaks);
    out.table.rows.push_back({s.axis[i], s.values[i], model});
    out.plot.emplace_back(s.axis[i], model);
  }
  out.plot_xlabel = "drive power Omega (MHz)";
  out.plot_ylabel = "fitted PL";

  out.results["peaks"] = peaks_json(fit);
  out.results["residual_norm"] = fit.residual_norm;
  out.results["iterations"] = fit.iterations;
  out.results["degenerate"] = fit.degenerate;
  out.results["diagnostics"] = fit.diagnostics;
  for (const auto& d : fit.diagnostics) out.warnings.push_back(d);

  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < fit.peaks.size(); ++k) {
    rows.push_back({fixed(fit.peaks[k].center_MHz, 2), fixed(fit.center_errors[k], 2), fixed(fit.peaks[k].fwhm_MHz, 2),
                    fixed(100.0 * fit.peaks[k].depth, 3)});
  }
  out.summary = aligned({"center (MHz)", "+/- (MHz)", "FWHM (MHz)", "depth (%)"}, rows);
  if (fit.peaks.size() == 3 && !fit.degenerate) {
    try {
      const HyperfineEstimate est = extract_hyperfine(observations_from_fit(fit), c.invert.model, c.invert.max_residual_MHz);
      out.results["hyperfine"] = estimate_json(est);
    } catch (const Error& e) {
      out.warnings.push_back(std::string("hyperfine inversion skipped: ") + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------- invert
Output run_invert(const ExperimentConfig& c, const RunOptions& o, std::uint64_t seed, int workers) {
  Output out;
  std::vector<CenterObservation> obs;
  const std::vector<double> centers = o.centers_MHz ? *o.centers_MHz : c.invert.centers_MHz;
  if (!centers.empty()) {
    const bool with_errors = !o.centers_MHz && !c.invert.errors_MHz.empty();
    for (std::size_t k = 0; k < centers.size(); ++k) {
      obs.push_back({centers[k], with_errors ? c.invert.errors_MHz[k] : 0.0, std::nullopt});
    }
    out.results["source"] = "centers";
  } else {
    const Spectrum s = fit_input(c, o, seed, workers, out);
    const FitResult fit = fit_gaussian_peaks(s, c.fit.n_peaks);
    if (fit.degenerate) {
      for (const auto& d : fit.diagnostics) out.warnings.push_back(d);
    }
    obs = observations_from_fit(fit);
    out.results["source"] = "fit";
    out.results["peaks"] = peaks_json(fit);
  }
  const HyperfineEstimate est = extract_hyperfine(obs, c.invert.model, c.invert.max_residual_MHz);
  out.results["hyperfine"] = estimate_json(est);

  out.table.comments = {"zfesr hyperfine inversion: center_MHz = input resonance power, predicted_MHz = forward model"};
  out.table.columns = {"center_MHz", "error_MHz", "predicted_MHz"};
  for (std::size_t k = 0; k < obs.size(); ++k) {
    out.table.rows.push_back({obs[k].center_MHz, obs[k].error_MHz, est.predicted_MHz[k]});
    out.plot.emplace_back(obs[k].center_MHz, est.predicted_MHz[k]);
  }
  out.plot_xlabel = "measured resonance power (MHz)";
  out.plot_ylabel = "model resonance power (MHz)";
  out.plot_style = "points";

  std::vector<std::vector<std::string>> rows;
  if (est.model == HyperfineModel::axial) {
    rows = {{"A_perp", fixed(est.values(0), 3), fixed(est.errors(0), 3)},
            {"A_zz", fixed(est.values(1), 3), fixed(est.errors(1), 3)}};
  } else {
    for (Eigen::Index k = 0; k < 3; ++k) {
      rows.push_back({"|A_" + std::to_string(k + 1) + "|", fixed(est.values(k), 3), fixed(est.errors(k), 3)});
    }
  }
  rows.push_back({"residual RMS", fixed(est.residual_rms_MHz, 3), ""});
  out.summary = aligned({"parameter", "value (MHz)", "error (MHz)"}, rows);
  return out;
}

// ---------------------------------------------------------------- budget
Output run_budget(const ExperimentConfig& c, const RunOptions& o) {
  DetectionAreaParams p = c.budget.params;
  p.C0_angular_MHz_nm3 = c.coupling.C0_angular_MHz_nm3;
  if (o.r0_nm) p.r0_nm = *o.r0_nm;
  const Budget b = budget_table(p, c.budget.contrast);

  Output out;
  out.table.comments = {"zfesr detection-area budget: outer signal of spins beyond r0, dominance = 1 - outer/contrast"};
  out.table.columns = {"class", "eta_sq", "outer_signal_percent", "quadrature_percent", "dominance_percent"};
  json rows_json = json::array();
  std::vector<std::vector<std::string>> rows;
  for (const auto& row : b.rows) {
    DetectionAreaParams q = p;
    q.eta_sq_mean = row.eta_sq;
    const double quad = outer_signal_quadrature(q.r0_nm, q);
    out.table.labels.push_back(line_class_name(row.line_class));
    out.table.rows.push_back({row.eta_sq, 100.0 * row.outer_signal, 100.0 * quad, 100.0 * row.dominance});
    rows_json.push_back({{"class", line_class_name(row.line_class)},
                         {"eta_sq", row.eta_sq},
                         {"outer_signal_percent", 100.0 * row.outer_signal},
                         {"quadrature_percent", 100.0 * quad},
                         {"dominance_percent", 100.0 * row.dominance}});
    rows.push_back({line_class_name(row.line_class), fixed(row.eta_sq, 3), fixed(100.0 * row.outer_signal, 5),
                    fixed(100.0 * row.dominance, 2)});
  }
  const LinewidthBudget lw = linewidth_budget(c.nv, c.budget.target_T2star_us, c.budget.residual_field_G);
  out.results["r0_nm"] = p.r0_nm;
  out.results["contrast_percent"] = 100.0 * b.contrast;
  out.results["expected_spin_count"] = b.expected_count;
  out.results["rows"] = rows_json;
  out.results["linewidth"] = {{"dephasing_MHz", lw.dephasing_MHz}, {"zeeman_splitting_MHz", lw.zeeman_splitting_MHz}};

  DetectionAreaParams curve = p;
  for (double r0 = 5.0; r0 <= 50.0 + 1e-9; r0 += 0.5) {
    curve.eta_sq_mean = published_eta_sq(LineClass::left);
    out.plot.emplace_back(r0, 100.0 * outer_signal(r0, curve));
  }
  out.plot_xlabel = "r0 (nm)";
  out.plot_ylabel = "outer signal, outer lines (%)";

  out.summary = aligned({"class", "eta^2", "outer (%)", "dominance (%)"}, rows) +
                "expected spins within r0 = " + fixed(p.r0_nm, 2) + " nm: " + fixed(b.expected_count, 3) + "\n" +
                "dephasing linewidth: " + fixed(lw.dephasing_MHz, 3) + " MHz, Zeeman splitting: " +
                fixed(lw.zeeman_splitting_MHz, 3) + " MHz\n";
  return out;
}

// ---------------------------------------------------------------- peaks
Output run_peaks(const ExperimentConfig& c) {
  const EigenSystem eig = diagonalize(hyperfine_hamiltonian(c.target, true));
  const TransitionTable table = transition_table(eig, electron_operators(c.target));
  const std::vector<ResonancePower> powers = resonance_powers(table);

  Output out;
  out.table.comments = {"zfesr zero-field transition table: frequency_MHz = level spacing, omega_MHz = 2 x frequency"};
  out.table.columns = {"i", "j", "frequency_MHz", "weight_x", "weight_y", "weight_z", "forbidden", "degenerate", "omega_MHz"};
  for (const auto& r : table.rows) {
    out.table.rows.push_back({static_cast<double>(r.i), static_cast<double>(r.j), r.frequency, r.weight_x, r.weight_y,
                              r.weight_z, r.forbidden ? 1.0 : 0.0, r.degenerate ? 1.0 : 0.0, 2.0 * r.frequency});
  }
  json lines = json::array();
  std::vector<std::vector<std::string>> rows;
  for (const auto& p : powers) {
    lines.push_back({{"frequency_MHz", p.transition_frequency_MHz}, {"omega_MHz", p.omega_MHz}, {"weight", p.weight}});
    rows.push_back({fixed(p.transition_frequency_MHz, 3), fixed(p.omega_MHz, 3), fixed(p.weight, 4)});
    out.plot.emplace_back(p.omega_MHz, p.weight);
  }
  out.plot_xlabel = "resonance power Omega (MHz)";
  out.plot_ylabel = "dipole weight";
  out.plot_style = "impulses";
  out.results["energies_MHz"] = std::vector<double>(eig.energies.data(), eig.energies.data() + eig.energies.size());
  out.results["lines"] = lines;
  out.summary = aligned({"transition (MHz)", "Omega (MHz)", "weight"}, rows);
  return out;
}

std::string gnuplot_script(const std::string& dat_name, const Output& out, const std::string& title) {
  std::ostringstream os;
  os << "# gnuplot script written by zfesr\n"
     << "set title \"" << title << "\"\n"
     << "set xlabel \"" << out.plot_xlabel << "\"\n"
     << "set ylabel \"" << out.plot_ylabel << "\"\n"
     << "plot \"" << dat_name << "\" using 1:2 with " << out.plot_style << " notitle\n";
  return os.str();
}

}  // namespace

const char* version_string() { return ZFESR_VERSION_STRING; }

bool is_subcommand(const std::string& name) {
  return std::any_of(std::begin(kSubcommands), std::end(kSubcommands), [&](const char* s) { return name == s; });
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunReport run_subcommand(const std::string& sub, const ExperimentConfig& config, const std::string& config_text,
                         const RunOptions& o) {
  if (!is_subcommand(sub)) throw invalid_argument("unknown subcommand '" + sub + "'");
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t seed = o.seed.value_or(config.seed);
  const int workers = std::max(1, o.workers.value_or(config.workers));
  const OutputFormat format = o.format.value_or(config.output.format);
  const std::filesystem::path dir = o.out_dir.value_or(config.output.dir);

  // Everything that can change the data goes into the digest; workers and
  // output location do not.
  std::string digest_src = config_text + "\n#seed=" + std::to_string(seed);
  if (o.r0_nm) digest_src += "\n#r0=" + format_number(*o.r0_nm);
  if (o.centers_MHz) {
    digest_src += "\n#centers=";
    for (double v : *o.centers_MHz) digest_src += format_number(v) + ",";
  }
  if (o.input) digest_src += "\n#input=" + o.input->string();
  const std::string digest = fnv1a_hex(digest_src);

  Output out;
  try {
    if (sub == "rabi") {
      out = run_rabi(config, seed, workers);
    } else if (sub == "spinlock") {
      out = run_spinlock(config, seed, workers);
    } else if (sub == "zf-sweep") {
      out = run_zf_sweep(config, seed, workers);
    } else if (sub == "deer") {
      out = run_deer(config);
    } else if (sub == "fit") {
      out = run_fit(config, o, seed, workers);
    } else if (sub == "invert") {
      out = run_invert(config, o, seed, workers);
    } else if (sub == "budget") {
      out = run_budget(config, o);
    } else {
      out = run_peaks(config);
    }
  } catch (const Error& e) {
    throw Error(e.category(), sub + ": " + e.what());
  }

  if (!std::filesystem::exists(dir)) {
    if (!config.output.create_dir) throw io_error(sub + ": output directory '" + dir.string() + "' does not exist");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error(sub + ": cannot create output directory '" + dir.string() + "': " + ec.message());
  }

  const std::string stem = digest + "_" + sub;
  RunReport rep;
  rep.subcommand = sub;
  rep.digest = digest;
  rep.csv = csv_text(out.table);
  const std::vector<std::string> names{stem + ".csv", stem + ".json", stem + ".dat", stem + ".gp"};

  json doc;
  doc["tool"] = "zfesr";
  doc["version"] = version_string();
  doc["subcommand"] = sub;
  doc["config_digest"] = digest;
  doc["seed"] = seed;
  doc["files"] = names;
  doc["results"] = out.results;
  doc["warnings"] = out.warnings;
  if (config.output.timing) {
    doc["timing"] = {{"elapsed_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
                     {"workers", workers}};
  }
  rep.json = doc.dump(2) + "\n";

  std::string dat = "# " + out.plot_xlabel + "\t" + out.plot_ylabel + "\n";
  for (const auto& [x, y] : out.plot) dat += format_number(x) + "\t" + format_number(y) + "\n";

  write_text_file(dir / names[0], rep.csv);
  write_text_file(dir / names[1], rep.json);
  write_text_file(dir / names[2], dat);
  write_text_file(dir / names[3], gnuplot_script(names[2], out, "zfesr " + sub));
  for (const auto& n : names) rep.files.push_back(dir / n);

  std::string summary = out.summary;
  for (const auto& w : out.warnings) summary += "warning: " + w + "\n";
  rep.summary = format == OutputFormat::json ? rep.json : summary;
  return rep;
}

}  // namespace zfesr
