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

#include "zfesr/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace zfesr {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

enum class Dim { frequency, time, length, field, angle, rate, density, coupling, gyro, fraction, none };

const char* dim_name(Dim d) {
  switch (d) {
    case Dim::frequency:
      return "frequency (Hz, kHz, MHz, GHz)";
    case Dim::time:
      return "time (ns, us, ms, s)";
    case Dim::length:
      return "length (A, nm, um)";
    case Dim::field:
      return "field (G, mT, T)";
    case Dim::angle:
      return "angle (deg, rad)";
    case Dim::rate:
      return "rate (per_us, per_ms, per_s, MHz, kHz)";
    case Dim::density:
      return "areal density (per_nm2, per_cm2)";
    case Dim::coupling:
      return "coupling C0/2pi (MHz*nm^3)";
    case Dim::gyro:
      return "gyromagnetic ratio (MHz/G, kHz/G)";
    case Dim::fraction:
      return "fraction (bare number or %)";
    case Dim::none:
      return "dimensionless";
  }
  return "?";
}

const std::map<std::string, double>& unit_table(Dim d) {
  static const std::map<Dim, std::map<std::string, double>> table{
      {Dim::frequency, {{"Hz", 1e-6}, {"kHz", 1e-3}, {"MHz", 1.0}, {"GHz", 1e3}}},
      {Dim::time, {{"ns", 1e-3}, {"us", 1.0}, {"ms", 1e3}, {"s", 1e6}}},
      {Dim::length, {{"A", 0.1}, {"nm", 1.0}, {"um", 1e3}}},
      {Dim::field, {{"G", 1.0}, {"mT", 10.0}, {"T", 1e4}}},
      {Dim::angle, {{"deg", kDeg}, {"rad", 1.0}}},
      {Dim::rate, {{"per_us", 1.0}, {"per_ms", 1e-3}, {"per_s", 1e-6}, {"MHz", 1.0}, {"kHz", 1e-3}}},
      {Dim::density, {{"per_nm2", 1.0}, {"per_cm2", 1e-14}}},
      {Dim::coupling, {{"MHz*nm^3", 1.0}}},
      {Dim::gyro, {{"MHz/G", 1.0}, {"kHz/G", 1e-3}}},
      {Dim::fraction, {{"%", 0.01}}},
      {Dim::none, {}},
  };
  return table.at(d);
}

bool unit_optional(Dim d) { return d == Dim::fraction || d == Dim::none; }

std::optional<double> to_number(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string t; is >> t;) out.push_back(t);
  return out;
}

struct Entry {
  std::string section;
  std::string key;
  std::string raw;
  std::vector<std::string> tokens;
  int line = 0;

  std::string name() const { return section + "." + key; }
};

class Reader {
 public:
  explicit Reader(std::string origin) : origin_(std::move(origin)) {}

  void error(int line, const std::string& msg) { errors_.push_back(origin_ + ":" + std::to_string(line) + ": " + msg); }
  const std::vector<std::string>& errors() const { return errors_; }
  const std::string& origin() const { return origin_; }

  // Numbers with unit tokens; a unit applies to the bare numbers before it.
  std::optional<std::vector<double>> quantities(const Entry& e, Dim d, std::span<const std::string> tokens) {
    std::vector<double> out;
    std::size_t pending = 0;
    for (const auto& tok : tokens) {
      if (auto v = to_number(tok)) {
        out.push_back(*v);
        ++pending;
        continue;
      }
      const auto& units = unit_table(d);
      const auto it = units.find(tok);
      if (it == units.end()) {
        error(e.line, e.name() + ": unit '" + tok + "' is not a " + dim_name(d) + " unit");
        return std::nullopt;
      }
      if (pending == 0) {
        error(e.line, e.name() + ": unit '" + tok + "' has no number before it");
        return std::nullopt;
      }
      for (std::size_t k = out.size() - pending; k < out.size(); ++k) out[k] *= it->second;
      pending = 0;
    }
    if (pending > 0 && !unit_optional(d)) {
      error(e.line, e.name() + ": missing unit, expected " + dim_name(d));
      return std::nullopt;
    }
    if (out.empty()) {
      error(e.line, e.name() + ": expected a value");
      return std::nullopt;
    }
    return out;
  }

  std::optional<std::vector<double>> quantities(const Entry& e, Dim d) { return quantities(e, d, e.tokens); }

  std::optional<double> scalar(const Entry& e, Dim d) {
    auto v = quantities(e, d);
    if (!v) return std::nullopt;
    if (v->size() != 1) {
      error(e.line, e.name() + ": expected one value, got " + std::to_string(v->size()));
      return std::nullopt;
    }
    return v->front();
  }

  std::optional<Eigen::Vector3d> vector3(const Entry& e, Dim d) {
    auto v = quantities(e, d);
    if (!v) return std::nullopt;
    if (v->size() != 3) {
      error(e.line, e.name() + ": expected three values, got " + std::to_string(v->size()));
      return std::nullopt;
    }
    return Eigen::Vector3d((*v)[0], (*v)[1], (*v)[2]);
  }

  std::optional<std::int64_t> integer(const Entry& e, std::int64_t min_value) {
    if (e.tokens.size() != 1) {
      error(e.line, e.name() + ": expected one integer");
      return std::nullopt;
    }
    std::int64_t v = 0;
    const auto& s = e.tokens.front();
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      error(e.line, e.name() + ": '" + s + "' is not an integer");
      return std::nullopt;
    }
    if (v < min_value) {
      error(e.line, e.name() + " must be >= " + std::to_string(min_value) + " (got " + s + ")");
      return std::nullopt;
    }
    return v;
  }

  std::optional<std::string> word(const Entry& e, std::initializer_list<const char*> allowed) {
    std::string list;
    for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
    if (e.tokens.size() == 1) {
      for (const char* a : allowed) {
        if (e.tokens.front() == a) return e.tokens.front();
      }
    }
    error(e.line, e.name() + ": expected one of {" + list + "}, got '" + e.raw + "'");
    return std::nullopt;
  }

  std::optional<bool> boolean(const Entry& e) {
    auto w = word(e, {"true", "false"});
    if (!w) return std::nullopt;
    return *w == "true";
  }

  // Range check helper: reports `name must be <what> (got value unit)`.
  bool check(const Entry& e, bool ok, const std::string& what, double value, const std::string& unit = "") {
    if (ok) return true;
    std::ostringstream os;
    os << e.name() << " must be " << what << " (got " << value << (unit.empty() ? "" : " " + unit) << ")";
    error(e.line, os.str());
    return false;
  }

 private:
  std::string origin_;
  std::vector<std::string> errors_;
};

struct KeyDef {
  bool repeatable = false;
  std::function<void(const Entry&)> apply;
};

using Schema = std::map<std::string, std::map<std::string, KeyDef>>;

std::optional<double> parse_phase(Reader& rd, const Entry& e, std::span<const std::string> toks, std::size_t& used) {
  if (toks.empty()) return std::nullopt;
  const std::string& p = toks[0];
  used = 1;
  if (p == "x") return phase_radians(PhaseLabel::x);
  if (p == "y") return phase_radians(PhaseLabel::y);
  if (p == "-y" || p == "minus_y") return phase_radians(PhaseLabel::minus_y);
  if (toks.size() >= 2 && to_number(p)) {
    used = 2;
    auto v = rd.quantities(e, Dim::angle, toks.first(2));
    if (v) return v->front();
    return std::nullopt;
  }
  rd.error(e.line, e.name() + ": phase must be x, y, -y or an angle, got '" + p + "'");
  return std::nullopt;
}

std::optional<Segment> parse_segment(Reader& rd, const Entry& e) {
  const auto& t = e.tokens;
  if (t.empty()) {
    rd.error(e.line, e.name() + ": empty segment");
    return std::nullopt;
  }
  const std::span<const std::string> rest(t.begin() + 1, t.end());
  if (t[0] == "polarize" && rest.empty()) return PolarizeNV{};
  if (t[0] == "readout" && rest.empty()) return Readout{};
  if (t[0] == "wait") {
    auto d = rd.quantities(e, Dim::time, rest);
    if (!d || d->size() != 1) {
      if (d) rd.error(e.line, e.name() + ": wait takes one duration");
      return std::nullopt;
    }
    if (!rd.check(e, d->front() >= 0.0, "a non-negative wait duration", d->front(), "us")) return std::nullopt;
    return Wait{d->front()};
  }
  if (t[0] == "mw") {
    // mw <power> <freq unit> <phase> <duration> <time unit>
    if (rest.size() < 5) {
      rd.error(e.line, e.name() + ": mw needs power, phase and duration, e.g. 'mw 148 MHz x 10 us'");
      return std::nullopt;
    }
    auto power = rd.quantities(e, Dim::frequency, rest.first(2));
    std::size_t used = 0;
    auto phase = parse_phase(rd, e, rest.subspan(2), used);
    const auto dur_tokens = rest.subspan(2 + used);
    auto dur = rd.quantities(e, Dim::time, dur_tokens);
    if (!power || !phase || !dur) return std::nullopt;
    if (power->size() != 1 || dur->size() != 1) {
      rd.error(e.line, e.name() + ": mw takes one power and one duration");
      return std::nullopt;
    }
    bool ok = rd.check(e, power->front() >= 0.0, "a non-negative mw power", power->front(), "MHz");
    ok = rd.check(e, dur->front() >= 0.0, "a non-negative mw duration", dur->front(), "us") && ok;
    if (!ok) return std::nullopt;
    return MwPulse{power->front(), *phase, dur->front()};
  }
  rd.error(e.line, e.name() + ": unknown segment '" + e.raw + "' (polarize, mw, wait, readout)");
  return std::nullopt;
}

Schema build_schema(ExperimentConfig& c, Reader& rd, std::set<std::string>& seen_lists) {
  Schema s;
  // Setters for common shapes.
  auto positive = [&](double& field, Dim d, const char* unit) {
    return KeyDef{false, [&field, &rd, d, unit](const Entry& e) {
                    if (auto v = rd.scalar(e, d); v && rd.check(e, *v > 0.0, "> 0", *v, unit)) field = *v;
                  }};
  };
  auto non_negative = [&](double& field, Dim d, const char* unit) {
    return KeyDef{false, [&field, &rd, d, unit](const Entry& e) {
                    if (auto v = rd.scalar(e, d); v && rd.check(e, *v >= 0.0, ">= 0", *v, unit)) field = *v;
                  }};
  };
  auto any_value = [&](double& field, Dim d) {
    return KeyDef{false, [&field, &rd, d](const Entry& e) {
                    if (auto v = rd.scalar(e, d)) field = *v;
                  }};
  };
  auto fraction_open = [&](double& field) {
    return KeyDef{false, [&field, &rd](const Entry& e) {
                    if (auto v = rd.scalar(e, Dim::fraction); v && rd.check(e, *v > 0.0 && *v < 1.0, "in (0, 1)", *v))
                      field = *v;
                  }};
  };
  auto count = [&](std::int64_t& field) {
    return KeyDef{false, [&field, &rd](const Entry& e) {
                    if (auto v = rd.integer(e, 0)) field = *v;
                  }};
  };

  s["run"]["seed"] = {false, [&](const Entry& e) {
                        if (auto v = rd.integer(e, 0)) c.seed = static_cast<std::uint64_t>(*v);
                      }};
  s["run"]["workers"] = {false, [&](const Entry& e) {
                           if (auto v = rd.integer(e, 1)) c.workers = static_cast<int>(std::min<std::int64_t>(*v, 256));
                         }};

  s["target"]["electron"] = {false, [&](const Entry& e) {
                               if (auto w = rd.word(e, {"electron"})) c.target.electron = species_by_name(*w);
                             }};
  s["target"]["nucleus"] = {false, [&](const Entry& e) {
                              if (auto w = rd.word(e, {"15N", "14N", "1H"})) {
                                c.nucleus_name = *w;
                                c.target.nucleus = species_by_name(*w);
                              }
                            }};
  s["target"]["A"] = {false, [&](const Entry& e) {
                        if (auto v = rd.vector3(e, Dim::frequency)) c.target.hyperfine.principal_values = *v;
                      }};
  s["target"]["euler"] = {false, [&](const Entry& e) {
                            if (auto v = rd.vector3(e, Dim::angle)) c.target.hyperfine.orientation = {(*v)(0), (*v)(1), (*v)(2)};
                          }};
  s["target"]["quadrupole"] = any_value(c.target.quadrupole_MHz, Dim::frequency);

  s["nv"]["D"] = positive(c.nv.zero_field_splitting_MHz, Dim::frequency, "MHz");
  s["nv"]["gamma"] = any_value(c.nv.gyromagnetic_ratio_MHz_per_G, Dim::gyro);
  s["nv"]["T2star"] = positive(c.nv.dephasing_T2star_us, Dim::time, "us");
  s["nv"]["T1rho"] = positive(c.nv.rotating_T1rho.constant_us, Dim::time, "us");
  s["nv"]["t1rho_point"] = {true, [&](const Entry& e) {
                              auto f = rd.quantities(e, Dim::frequency, std::span(e.tokens).first(std::min<std::size_t>(2, e.tokens.size())));
                              auto t = e.tokens.size() > 2 ? rd.quantities(e, Dim::time, std::span(e.tokens).subspan(2))
                                                           : std::nullopt;
                              if (!f || !t || f->size() != 1 || t->size() != 1) {
                                if (f && e.tokens.size() <= 2) rd.error(e.line, e.name() + ": expected '<Omega> MHz <T1rho> us'");
                                return;
                              }
                              if (!rd.check(e, t->front() > 0.0, "a positive T1rho", t->front(), "us")) return;
                              auto& table = c.nv.rotating_T1rho.table;
                              if (!table.empty() && !(f->front() > table.back().first)) {
                                rd.error(e.line, e.name() + ": points must have strictly increasing Omega");
                                return;
                              }
                              table.emplace_back(f->front(), t->front());
                            }};
  s["nv"]["leak_split"] = {false, [&](const Entry& e) {
                             if (auto v = rd.scalar(e, Dim::none); v && rd.check(e, *v >= 0.0 && *v <= 1.0, "in [0, 1]", *v))
                               c.leak_split = *v;
                           }};

  s["coupling"]["separation"] = {false, [&](const Entry& e) {
                                   if (auto v = rd.vector3(e, Dim::length);
                                       v && rd.check(e, v->norm() > 0.0, "non-zero", v->norm(), "nm"))
                                     c.coupling.separation_nm = *v;
                                 }};
  s["coupling"]["C0"] = {false, [&](const Entry& e) {
                           if (auto v = rd.scalar(e, Dim::coupling); v && rd.check(e, *v > 0.0, "> 0", *v, "MHz*nm^3"))
                             c.coupling.C0_angular_MHz_nm3 = 2.0 * std::numbers::pi * *v;
                         }};
  s["coupling"]["nv_axis"] = {false, [&](const Entry& e) {
                                if (auto v = rd.vector3(e, Dim::none); v && rd.check(e, v->norm() > 0.0, "non-zero", v->norm()))
                                  c.nv_axis = v->normalized();
                              }};
  s["coupling"]["target_gamma"] = non_negative(c.target_gamma_per_us, Dim::rate, "per_us");

  s["sequence"]["segment"] = {true, [&](const Entry& e) {
                                if (!seen_lists.count("sequence.segment")) {
                                  seen_lists.insert("sequence.segment");
                                  c.sequence.segments.clear();
                                }
                                if (auto seg = parse_segment(rd, e)) c.sequence.segments.push_back(*seg);
                              }};

  s["rabi"]["power"] = positive(c.rabi.power_MHz, Dim::frequency, "MHz");
  s["rabi"]["t_start"] = non_negative(c.rabi.t_start_us, Dim::time, "us");
  s["rabi"]["t_stop"] = non_negative(c.rabi.t_stop_us, Dim::time, "us");
  s["rabi"]["t_step"] = positive(c.rabi.t_step_us, Dim::time, "us");
  s["rabi"]["repetitions"] = count(c.rabi.repetitions);
  s["rabi"]["modulation_scale"] = {false, [&](const Entry& e) {
                                     if (auto v = rd.quantities(e, Dim::none)) c.rabi.modulation_scale = *v;
                                   }};
  s["rabi"]["modulation_weight"] = {false, [&](const Entry& e) {
                                      if (auto v = rd.quantities(e, Dim::none)) c.rabi.modulation_weight = *v;
                                    }};

  s["spinlock"]["pi_half_power"] = positive(c.spinlock.pi_half_power_MHz, Dim::frequency, "MHz");
  s["spinlock"]["power"] = positive(c.spinlock.power_MHz, Dim::frequency, "MHz");
  s["spinlock"]["tau_start"] = non_negative(c.spinlock.tau_start_us, Dim::time, "us");
  s["spinlock"]["tau_stop"] = non_negative(c.spinlock.tau_stop_us, Dim::time, "us");
  s["spinlock"]["tau_step"] = positive(c.spinlock.tau_step_us, Dim::time, "us");
  s["spinlock"]["repetitions"] = count(c.spinlock.repetitions);

  s["sweep"]["start"] = positive(c.sweep.start_MHz, Dim::frequency, "MHz");
  s["sweep"]["stop"] = positive(c.sweep.stop_MHz, Dim::frequency, "MHz");
  s["sweep"]["step"] = positive(c.sweep.step_MHz, Dim::frequency, "MHz");
  s["sweep"]["tau"] = positive(c.sweep.tau_us, Dim::time, "us");
  s["sweep"]["mode"] = {false, [&](const Entry& e) {
                          if (auto w = rd.word(e, {"fast", "exact"}))
                            c.sweep.mode = *w == "fast" ? ZfSpectrumOptions::Mode::fast : ZfSpectrumOptions::Mode::exact;
                        }};
  s["sweep"]["fwhm"] = positive(c.sweep.fwhm_MHz, Dim::frequency, "MHz");
  s["sweep"]["contrast"] = {false, [&](const Entry& e) {
                              if (e.tokens.size() == 1 && e.tokens[0] == "off") {
                                c.sweep.contrast.reset();
                              } else if (auto v = rd.scalar(e, Dim::fraction);
                                         v && rd.check(e, *v > 0.0 && *v < 1.0, "in (0, 1) or 'off'", *v)) {
                                c.sweep.contrast = *v;
                              }
                            }};
  s["sweep"]["repetitions"] = count(c.sweep.repetitions);
  s["sweep"]["nuisance_peak"] = {true, [&](const Entry& e) {
                                   // <center> MHz <fwhm> MHz <depth>
                                   const std::span<const std::string> t(e.tokens);
                                   if (t.size() != 5 && t.size() != 6) {
                                     rd.error(e.line, e.name() + ": expected '<center> MHz <fwhm> MHz <depth>'");
                                     return;
                                   }
                                   auto f = rd.quantities(e, Dim::frequency, t.first(4));
                                   auto d = rd.quantities(e, Dim::fraction, t.subspan(4));
                                   if (!f || !d || f->size() != 2 || d->size() != 1) return;
                                   bool ok = rd.check(e, (*f)[1] > 0.0, "a positive nuisance FWHM", (*f)[1], "MHz");
                                   ok = rd.check(e, (*d)[0] > 0.0 && (*d)[0] < 1.0, "a nuisance depth in (0, 1)", (*d)[0]) && ok;
                                   if (ok) c.sweep.nuisance_peaks.push_back({(*f)[0], (*f)[1], (*d)[0]});
                                 }};

  s["ensemble"]["count"] = {false, [&](const Entry& e) {
                              if (auto v = rd.integer(e, 1)) c.ensemble.count = static_cast<int>(std::min<std::int64_t>(*v, 1000000));
                            }};
  s["ensemble"]["orientation"] = {false, [&](const Entry& e) {
                                    if (auto w = rd.word(e, {"fixed", "random"}))
                                      c.ensemble.orientation_rule = *w == "fixed" ? EnsembleSpec::Orientation::fixed
                                                                                  : EnsembleSpec::Orientation::random;
                                  }};
  s["ensemble"]["euler"] = {true, [&](const Entry& e) {
                              if (!seen_lists.count("ensemble.euler")) {
                                seen_lists.insert("ensemble.euler");
                                c.ensemble.orientations.clear();
                              }
                              if (auto v = rd.vector3(e, Dim::angle)) c.ensemble.orientations.push_back({(*v)(0), (*v)(1), (*v)(2)});
                            }};
  s["ensemble"]["radial"] = {false, [&](const Entry& e) {
                               if (auto w = rd.word(e, {"fixed", "annulus"}))
                                 c.ensemble.radial_rule =
                                     *w == "fixed" ? EnsembleSpec::Radial::fixed : EnsembleSpec::Radial::annulus;
                             }};
  s["ensemble"]["position"] = {true, [&](const Entry& e) {
                                 if (!seen_lists.count("ensemble.position")) {
                                   seen_lists.insert("ensemble.position");
                                   c.ensemble.positions_nm.clear();
                                 }
                                 if (auto v = rd.vector3(e, Dim::length);
                                     v && rd.check(e, v->norm() > 0.0, "away from the NV", v->norm(), "nm"))
                                   c.ensemble.positions_nm.push_back(*v);
                               }};
  s["ensemble"]["r_min"] = positive(c.ensemble.r_min_nm, Dim::length, "nm");
  s["ensemble"]["r_max"] = positive(c.ensemble.r_max_nm, Dim::length, "nm");
  s["ensemble"]["plane_normal"] = {false, [&](const Entry& e) {
                                     if (auto v = rd.vector3(e, Dim::none); v && rd.check(e, v->norm() > 0.0, "non-zero", v->norm()))
                                       c.ensemble.plane_normal = *v;
                                   }};

  s["deer"]["field"] = positive(c.deer.field_G, Dim::field, "G");
  s["deer"]["start"] = non_negative(c.deer.start_MHz, Dim::frequency, "MHz");
  s["deer"]["stop"] = positive(c.deer.stop_MHz, Dim::frequency, "MHz");
  s["deer"]["step"] = positive(c.deer.step_MHz, Dim::frequency, "MHz");
  s["deer"]["theta"] = {false, [&](const Entry& e) {
                          if (auto v = rd.quantities(e, Dim::angle)) c.deer.thetas_rad = *v;
                        }};
  s["deer"]["fwhm"] = positive(c.deer.fwhm_MHz, Dim::frequency, "MHz");
  s["deer"]["contrast"] = fraction_open(c.deer.contrast);

  s["background"]["enabled"] = {false, [&](const Entry& e) {
                                  if (auto b = rd.boolean(e)) c.background.enabled = *b;
                                }};
  s["background"]["density"] = positive(c.background.model.areal_density_per_nm2, Dim::density, "per_nm2");
  s["background"]["g"] = positive(c.background.model.g_factor, Dim::none, "");
  s["background"]["linewidth"] = positive(c.background.model.correlation_linewidth_MHz, Dim::frequency, "MHz");
  s["background"]["depth"] = positive(c.background.model.depth_nm, Dim::length, "nm");
  s["background"]["tau"] = positive(c.background.model.tau_us, Dim::time, "us");

  s["fit"]["peaks"] = {false, [&](const Entry& e) {
                         if (auto v = rd.integer(e, 1)) c.fit.n_peaks = static_cast<int>(std::min<std::int64_t>(*v, 64));
                       }};
  s["fit"]["input"] = {false, [&](const Entry& e) {
                         if (e.raw.empty()) {
                           rd.error(e.line, e.name() + ": expected a path");
                         } else {
                           c.fit.input = e.raw;
                         }
                       }};
  s["fit"]["calibration"] = {false, [&](const Entry& e) {
                               if (auto w = rd.word(e, {"model", "self", "none"}))
                                 c.fit.calibration = *w == "model"  ? CalibrationRule::model
                                                     : *w == "self" ? CalibrationRule::self
                                                                    : CalibrationRule::none;
                             }};

  s["invert"]["model"] = {false, [&](const Entry& e) {
                            if (auto w = rd.word(e, {"axial", "full"}))
                              c.invert.model = *w == "axial" ? HyperfineModel::axial : HyperfineModel::full;
                          }};
  s["invert"]["centers"] = {false, [&](const Entry& e) {
                              if (auto v = rd.quantities(e, Dim::frequency)) {
                                bool ok = true;
                                for (double x : *v) ok = rd.check(e, x >= 0.0, "non-negative", x, "MHz") && ok;
                                if (ok) c.invert.centers_MHz = *v;
                              }
                            }};
  s["invert"]["errors"] = {false, [&](const Entry& e) {
                             if (auto v = rd.quantities(e, Dim::frequency)) {
                               bool ok = true;
                               for (double x : *v) ok = rd.check(e, x >= 0.0, "non-negative", x, "MHz") && ok;
                               if (ok) c.invert.errors_MHz = *v;
                             }
                           }};
  s["invert"]["max_residual"] = positive(c.invert.max_residual_MHz, Dim::frequency, "MHz");

  s["budget"]["sigma"] = positive(c.budget.params.areal_density_per_nm2, Dim::density, "per_nm2");
  s["budget"]["gamma"] = positive(c.budget.params.gamma_per_us, Dim::rate, "per_us");
  s["budget"]["tau"] = non_negative(c.budget.params.tau_us, Dim::time, "us");
  s["budget"]["r0"] = positive(c.budget.params.r0_nm, Dim::length, "nm");
  s["budget"]["contrast"] = fraction_open(c.budget.contrast);
  s["budget"]["residual_field"] = non_negative(c.budget.residual_field_G, Dim::field, "G");
  s["budget"]["target_T2star"] = positive(c.budget.target_T2star_us, Dim::time, "us");

  s["output"]["dir"] = {false, [&](const Entry& e) {
                          if (e.raw.empty()) {
                            rd.error(e.line, e.name() + ": expected a path");
                          } else {
                            c.output.dir = e.raw;
                          }
                        }};
  s["output"]["format"] = {false, [&](const Entry& e) {
                             if (auto w = rd.word(e, {"csv", "json"}))
                               c.output.format = *w == "csv" ? OutputFormat::csv : OutputFormat::json;
                           }};
  s["output"]["create_dir"] = {false, [&](const Entry& e) {
                                 if (auto b = rd.boolean(e)) c.output.create_dir = *b;
                               }};
  s["output"]["timing"] = {false, [&](const Entry& e) {
                             if (auto b = rd.boolean(e)) c.output.timing = *b;
                           }};
  return s;
}

// Cross-field checks after all keys were applied.
void validate_config(const ExperimentConfig& c, Reader& rd, const std::map<std::string, int>& lines) {
  auto at = [&](const std::string& key) {
    const auto it = lines.find(key);
    return it == lines.end() ? 0 : it->second;
  };
  auto guard = [&](const std::string& key, auto&& fn) {
    try {
      fn();
    } catch (const Error& err) {
      rd.error(at(key), err.what());
    }
  };
  if (c.rabi.t_stop_us < c.rabi.t_start_us) rd.error(at("rabi.t_stop"), "rabi.t_stop must be >= rabi.t_start");
  if (c.spinlock.tau_stop_us < c.spinlock.tau_start_us) {
    rd.error(at("spinlock.tau_stop"), "spinlock.tau_stop must be >= spinlock.tau_start");
  }
  if (c.sweep.stop_MHz < c.sweep.start_MHz) rd.error(at("sweep.stop"), "sweep.stop must be >= sweep.start");
  if (c.deer.stop_MHz < c.deer.start_MHz) rd.error(at("deer.stop"), "deer.stop must be >= deer.start");
  if (c.rabi.modulation_scale.size() != c.rabi.modulation_weight.size()) {
    rd.error(at("rabi.modulation_weight"), "rabi.modulation_scale and rabi.modulation_weight lengths differ");
  }
  if (!c.invert.errors_MHz.empty() && c.invert.errors_MHz.size() != c.invert.centers_MHz.size()) {
    rd.error(at("invert.errors"), "invert.errors must have one entry per center");
  }
  guard("sequence.segment", [&] { c.sequence.validate(); });
  guard("ensemble.count", [&] { c.ensemble.validate(); });
  if (c.ensemble.r_max_nm < c.ensemble.r_min_nm) rd.error(at("ensemble.r_max"), "ensemble.r_max must be >= ensemble.r_min");
  if (c.target.dim() * 3 > kMaxHilbertDim) rd.error(at("target.nucleus"), "target too large for the joint NV space");
}

}  // namespace

SpinSpecies species_by_name(const std::string& name) {
  if (name == "electron") return SpinSpecies::electron();
  if (name == "15N") return SpinSpecies::nitrogen15();
  if (name == "14N") return SpinSpecies::nitrogen14();
  if (name == "1H") return SpinSpecies{1, 4.2577e-3};
  throw invalid_argument("unknown spin species '" + name + "'");
}

ExperimentConfig::ExperimentConfig() {
  // A handful of randomly oriented P1 centers in the (100) layer around the NV.
  ensemble.count = 10;
  ensemble.orientation_rule = EnsembleSpec::Orientation::random;
  ensemble.radial_rule = EnsembleSpec::Radial::annulus;
  ensemble.r_min_nm = 5.0;
  ensemble.r_max_nm = 15.0;
  deer.thetas_rad = {0.0, 90.0 * kDeg};
}

RelaxationChannels ExperimentConfig::channels() const {
  RelaxationChannels ch = RelaxationChannels::from(nv, target_gamma_per_us);
  ch.leak_split = leak_split;
  return ch;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  Reader rd(origin);
  std::set<std::string> seen_lists;
  const Schema schema = build_schema(cfg, rd, seen_lists);

  std::map<std::string, int> first_line;
  std::istringstream in(text);
  std::string section;
  bool section_known = true;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        rd.error(line_no, "malformed section header '" + line + "'");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      section_known = schema.count(section) > 0;
      if (!section_known) rd.error(line_no, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      rd.error(line_no, "expected 'key = value', got '" + line + "'");
      continue;
    }
    Entry e;
    e.section = section;
    e.key = trim(line.substr(0, eq));
    e.raw = trim(line.substr(eq + 1));
    e.tokens = split_ws(e.raw);
    e.line = line_no;
    if (section.empty()) {
      rd.error(line_no, "key '" + e.key + "' appears before any section header");
      continue;
    }
    if (!section_known) continue;
    const auto& keys = schema.at(section);
    const auto it = keys.find(e.key);
    if (it == keys.end()) {
      rd.error(line_no, "unknown key '" + e.key + "' in [" + section + "]");
      continue;
    }
    const auto [pos, inserted] = first_line.emplace(e.name(), line_no);
    if (!inserted && !it->second.repeatable) {
      rd.error(line_no, "duplicate key '" + e.name() + "' (first defined at " + origin + ":" +
                            std::to_string(pos->second) + ")");
      continue;
    }
    try {
      it->second.apply(e);
    } catch (const Error& err) {
      rd.error(line_no, e.name() + ": " + err.what());
    }
  }
  validate_config(cfg, rd, first_line);

  if (!rd.errors().empty()) {
    std::string msg;
    for (const auto& m : rd.errors()) msg += (msg.empty() ? "" : "\n") + m;
    throw Error(ErrorCategory::Config, msg);
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::Io, "cannot read config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

namespace {

std::string num(double v) {
  if (std::isinf(v)) return "inf";
  // Strip the rounding noise left by degree/radian round trips.
  const double r = std::abs(v) > 0.0 ? std::round(v * 1e9) / 1e9 : 0.0;
  if (std::abs(r - v) < 1e-11 * std::max(1.0, std::abs(v))) v = r;
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string nums(std::span<const double> v, double scale = 1.0) {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : " ") + num(x * scale);
  return out;
}

std::string phase_text(double rad) {
  if (std::abs(rad - phase_radians(PhaseLabel::x)) < 1e-15) return "x";
  if (std::abs(rad - phase_radians(PhaseLabel::y)) < 1e-15) return "y";
  if (std::abs(rad - phase_radians(PhaseLabel::minus_y)) < 1e-15) return "-y";
  return num(rad) + " rad";
}

}  // namespace

std::string default_config_text() {
  const ExperimentConfig c;
  std::ostringstream os;
  const auto& a = c.target.hyperfine.principal_values;
  const auto& o = c.target.hyperfine.orientation;
  os << "# zfesr experiment configuration (all defaults)\n"
     << "\n[run]\n"
     << "seed = " << c.seed << "\n"
     << "workers = " << c.workers << "\n"
     << "\n[target]\n"
     << "electron = electron\n"
     << "nucleus = " << c.nucleus_name << "\n"
     << "A = " << num(a(0)) << " " << num(a(1)) << " " << num(a(2)) << " MHz\n"
     << "euler = " << num(o.alpha / kDeg) << " " << num(o.beta / kDeg) << " " << num(o.gamma / kDeg) << " deg\n"
     << "quadrupole = " << num(c.target.quadrupole_MHz) << " MHz\n"
     << "\n[nv]\n"
     << "D = " << num(c.nv.zero_field_splitting_MHz) << " MHz\n"
     << "gamma = " << num(c.nv.gyromagnetic_ratio_MHz_per_G) << " MHz/G\n"
     << "T2star = " << num(c.nv.dephasing_T2star_us) << " us\n"
     << "T1rho = " << num(c.nv.rotating_T1rho.constant_us) << " us\n"
     << "# t1rho_point = <Omega> MHz <T1rho> us   (repeatable; overrides T1rho)\n"
     << "leak_split = " << num(c.leak_split) << "\n"
     << "\n[coupling]\n"
     << "separation = " << nums(std::span(c.coupling.separation_nm.data(), 3)) << " nm\n"
     << "C0 = " << num(c.coupling.C0_angular_MHz_nm3 / (2.0 * std::numbers::pi)) << " MHz*nm^3\n"
     << "nv_axis = " << nums(std::span(c.nv_axis.data(), 3)) << "\n"
     << "target_gamma = " << num(c.target_gamma_per_us) << " per_us\n"
     << "\n[sequence]\n";
  for (const auto& seg : c.sequence.segments) {
    os << "segment = ";
    if (std::holds_alternative<PolarizeNV>(seg)) {
      os << "polarize";
    } else if (const auto* mw = std::get_if<MwPulse>(&seg)) {
      os << "mw " << num(mw->power_MHz) << " MHz " << phase_text(mw->phase_rad) << " " << num(mw->duration_us) << " us";
    } else if (const auto* w = std::get_if<Wait>(&seg)) {
      os << "wait " << num(w->duration_us) << " us";
    } else {
      os << "readout";
    }
    os << "\n";
  }
  os << "\n[rabi]\n"
     << "power = " << num(c.rabi.power_MHz) << " MHz\n"
     << "t_start = " << num(c.rabi.t_start_us) << " us\n"
     << "t_stop = " << num(c.rabi.t_stop_us) << " us\n"
     << "t_step = " << num(c.rabi.t_step_us) << " us\n"
     << "repetitions = " << c.rabi.repetitions << "\n"
     << "modulation_scale = " << nums(c.rabi.modulation_scale) << "\n"
     << "modulation_weight = " << nums(c.rabi.modulation_weight) << "\n"
     << "\n[spinlock]\n"
     << "pi_half_power = " << num(c.spinlock.pi_half_power_MHz) << " MHz\n"
     << "power = " << num(c.spinlock.power_MHz) << " MHz\n"
     << "tau_start = " << num(c.spinlock.tau_start_us) << " us\n"
     << "tau_stop = " << num(c.spinlock.tau_stop_us) << " us\n"
     << "tau_step = " << num(c.spinlock.tau_step_us) << " us\n"
     << "repetitions = " << c.spinlock.repetitions << "\n"
     << "\n[sweep]\n"
     << "start = " << num(c.sweep.start_MHz) << " MHz\n"
     << "stop = " << num(c.sweep.stop_MHz) << " MHz\n"
     << "step = " << num(c.sweep.step_MHz) << " MHz\n"
     << "tau = " << num(c.sweep.tau_us) << " us\n"
     << "mode = " << (c.sweep.mode == ZfSpectrumOptions::Mode::fast ? "fast" : "exact") << "\n"
     << "fwhm = " << num(c.sweep.fwhm_MHz) << " MHz\n"
     << "contrast = " << (c.sweep.contrast ? num(*c.sweep.contrast * 100.0) + " %" : std::string("off")) << "\n"
     << "repetitions = " << c.sweep.repetitions << "\n"
     << "# nuisance_peak = <center> MHz <fwhm> MHz <depth>   (repeatable)\n"
     << "\n[ensemble]\n"
     << "count = " << c.ensemble.count << "\n"
     << "orientation = " << (c.ensemble.orientation_rule == EnsembleSpec::Orientation::fixed ? "fixed" : "random") << "\n";
  for (const auto& e : c.ensemble.orientations) {
    os << "euler = " << num(e.alpha / kDeg) << " " << num(e.beta / kDeg) << " " << num(e.gamma / kDeg) << " deg\n";
  }
  os << "radial = " << (c.ensemble.radial_rule == EnsembleSpec::Radial::fixed ? "fixed" : "annulus") << "\n";
  for (const auto& p : c.ensemble.positions_nm) os << "position = " << nums(std::span(p.data(), 3)) << " nm\n";
  os << "r_min = " << num(c.ensemble.r_min_nm) << " nm\n"
     << "r_max = " << num(c.ensemble.r_max_nm) << " nm\n"
     << "plane_normal = " << nums(std::span(c.ensemble.plane_normal.data(), 3)) << "\n"
     << "\n[deer]\n"
     << "field = " << num(c.deer.field_G) << " G\n"
     << "start = " << num(c.deer.start_MHz) << " MHz\n"
     << "stop = " << num(c.deer.stop_MHz) << " MHz\n"
     << "step = " << num(c.deer.step_MHz) << " MHz\n"
     << "theta = " << nums(c.deer.thetas_rad, 1.0 / kDeg) << " deg\n"
     << "fwhm = " << num(c.deer.fwhm_MHz) << " MHz\n"
     << "contrast = " << num(c.deer.contrast * 100.0) << " %\n"
     << "\n[background]\n"
     << "enabled = " << (c.background.enabled ? "true" : "false") << "\n"
     << "density = " << num(c.background.model.areal_density_per_nm2) << " per_nm2\n"
     << "g = " << num(c.background.model.g_factor) << "\n"
     << "linewidth = " << num(c.background.model.correlation_linewidth_MHz) << " MHz\n"
     << "depth = " << num(c.background.model.depth_nm) << " nm\n"
     << "tau = " << num(c.background.model.tau_us) << " us\n"
     << "\n[fit]\n"
     << "peaks = " << c.fit.n_peaks << "\n"
     << "# input = <path to a CSV spectrum>   (default: synthesize from [sweep])\n"
     << "calibration = model\n"
     << "\n[invert]\n"
     << "model = " << (c.invert.model == HyperfineModel::axial ? "axial" : "full") << "\n"
     << "# centers = <c1> <c2> <c3> MHz   (default: fit a synthesized spectrum)\n"
     << "# errors = <e1> <e2> <e3> MHz\n"
     << "max_residual = " << num(c.invert.max_residual_MHz) << " MHz\n"
     << "\n[budget]\n"
     << "sigma = " << num(c.budget.params.areal_density_per_nm2) << " per_nm2\n"
     << "gamma = " << num(c.budget.params.gamma_per_us) << " per_us\n"
     << "tau = " << num(c.budget.params.tau_us) << " us\n"
     << "r0 = " << num(c.budget.params.r0_nm) << " nm\n"
     << "contrast = " << num(c.budget.contrast * 100.0) << " %\n"
     << "residual_field = " << num(c.budget.residual_field_G) << " G\n"
     << "target_T2star = " << num(c.budget.target_T2star_us) << " us\n"
     << "\n[output]\n"
     << "dir = " << c.output.dir.string() << "\n"
     << "format = " << (c.output.format == OutputFormat::csv ? "csv" : "json") << "\n"
     << "create_dir = " << (c.output.create_dir ? "true" : "false") << "\n"
     << "timing = " << (c.output.timing ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace zfesr
