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

#include "zfesr/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "zfesr/least_squares.hpp"

namespace zfesr {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

OperatorMatrix kron(const OperatorMatrix& a, const OperatorMatrix& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

Eigen::Map<const Eigen::VectorXcd> vec(const OperatorMatrix& m) {
  return Eigen::Map<const Eigen::VectorXcd>(m.data(), m.size());
}

}  // namespace

DensityMatrix::DensityMatrix(OperatorMatrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() == 0) throw invalid_argument("density matrix must be square and non-empty");
}

DensityMatrix DensityMatrix::pure(const StateVector& psi) {
  const double n = psi.norm();
  if (!(n > 0.0)) throw invalid_argument("pure state needs a non-zero vector");
  const StateVector v = psi / n;
  return DensityMatrix(v * v.adjoint());
}

DensityMatrix DensityMatrix::maximally_mixed(int dim) {
  if (dim <= 0) throw invalid_argument("dimension must be positive");
  return DensityMatrix(OperatorMatrix::Identity(dim, dim) / static_cast<double>(dim));
}

double DensityMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(0.5 * (m_ + m_.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double DensityMatrix::hermiticity_error() const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff(); }

double DensityMatrix::population(const StateVector& psi) const {
  return (psi.adjoint() * m_ * psi)(0, 0).real();
}

void DensityMatrix::check(double tol) const {
  std::ostringstream msg;
  if (hermiticity_error() > tol) msg << "density matrix is not Hermitian; ";
  if (std::abs(trace() - 1.0) > tol) msg << "trace " << trace() << " != 1; ";
  if (min_eigenvalue() < -tol) msg << "negative eigenvalue " << min_eigenvalue() << "; ";
  if (!msg.str().empty()) throw numeric_error(msg.str());
}

DensityMatrix tensor_product(const DensityMatrix& a, const DensityMatrix& b) {
  return DensityMatrix(kron(a.matrix(), b.matrix()));
}

OperatorMatrix trace_out_second(const OperatorMatrix& rho, int da, int db) {
  OperatorMatrix out = OperatorMatrix::Zero(da, da);
  for (int i = 0; i < da; ++i)
    for (int j = 0; j < da; ++j)
      for (int k = 0; k < db; ++k) out(i, j) += rho(i * db + k, j * db + k);
  return out;
}

Eigen::MatrixXcd liouvillian(const OperatorMatrix& h, std::span<const OperatorMatrix> jumps) {
  const Eigen::Index n = h.rows();
  const OperatorMatrix id = OperatorMatrix::Identity(n, n);
  const Complex minus_i2pi(0.0, -kTwoPi);
  // vec(A rho B) = (B^T (x) A) vec(rho)
  Eigen::MatrixXcd l = minus_i2pi * (kron(id, h) - kron(h.transpose(), id));
  for (const auto& lk : jumps) {
    const OperatorMatrix ldl = lk.adjoint() * lk;
    l += kron(lk.conjugate(), lk);
    l -= 0.5 * kron(id, ldl);
    l -= 0.5 * kron(ldl.transpose(), id);
  }
  return l;
}

DensityMatrix propagate(const DensityMatrix& rho, const OperatorMatrix& h, double t, std::span<const OperatorMatrix> jumps) {
  if (h.rows() != rho.dim() || h.cols() != rho.dim()) throw invalid_argument("propagate: dimension mismatch");
  for (const auto& lk : jumps) {
    if (lk.rows() != rho.dim() || lk.cols() != rho.dim()) throw invalid_argument("propagate: jump operator dimension mismatch");
  }
  if (!(t > 0.0)) throw invalid_argument("propagate: time must be positive");
  if (jumps.empty()) {
    const OperatorMatrix u = (Complex(0.0, -kTwoPi * t) * h).exp();
    OperatorMatrix out = u * rho.matrix() * u.adjoint();
    return DensityMatrix(0.5 * (out + out.adjoint()));
  }
  const Eigen::MatrixXcd prop = (liouvillian(h, jumps) * t).exp();
  const Eigen::VectorXcd v = prop * vec(rho.matrix());
  OperatorMatrix out = Eigen::Map<const OperatorMatrix>(v.data(), rho.dim(), rho.dim());
  return DensityMatrix(0.5 * (out + out.adjoint()));
}

RelaxationChannels RelaxationChannels::from(const NVCenter& nv, double gamma) {
  RelaxationChannels c;
  c.nv_T1rho = nv.rotating_T1rho;
  c.nv_T2star_us = nv.dephasing_T2star_us;
  c.target_Gamma_per_us = gamma;
  return c;
}

void RelaxationChannels::validate() const {
  if (!(nv_T1rho.constant_us > 0.0)) throw invalid_argument("T1rho must be positive");
  for (const auto& [om, t] : nv_T1rho.table) {
    (void)om;
    if (!(t > 0.0)) throw invalid_argument("T1rho table values must be positive");
  }
  if (!(nv_T2star_us > 0.0)) throw invalid_argument("NV T2* must be positive");
  if (target_Gamma_per_us < 0.0) throw invalid_argument("target Gamma must be non-negative");
  if (leak_split < 0.0 || leak_split > 1.0) throw invalid_argument("leak_split must lie in [0, 1]");
}

double DipolarCoupling::prefactor_MHz() const {
  const double r = distance_nm();
  if (!(r > 0.0)) throw invalid_argument("dipolar coupling: separation must be non-zero");
  return C0_angular_MHz_nm3 / kTwoPi / (r * r * r);
}

Eigen::Vector3d dipolar_vector(const DipolarCoupling& c, const Eigen::Vector3d& nv_axis) {
  const double j = c.prefactor_MHz();
  const Eigen::Vector3d n = c.separation_nm.normalized();
  const Eigen::Vector3d a = nv_axis.normalized();
  return j * (a - 3.0 * a.dot(n) * n);
}

OperatorMatrix dipolar_hamiltonian(const DipolarCoupling& c, const Eigen::Vector3d& nv_axis, const TargetSpinSystem& sys) {
  if (3 * sys.dim() > kMaxHilbertDim) throw invalid_argument("joint NV-target dimension exceeds 64");
  const Eigen::Vector3d g = dipolar_vector(c, nv_axis);
  const SpinOperators s = electron_operators(sys);
  const OperatorMatrix target = g.x() * s.x + g.y() * s.y + g.z() * s.z;
  return kron(nv_spin_operators().z, target);
}

void PulseSequence::validate() const {
  if (segments.empty() || !std::holds_alternative<PolarizeNV>(segments.front())) {
    throw invalid_argument("pulse sequence must begin with polarize");
  }
  if (!std::holds_alternative<Readout>(segments.back())) throw invalid_argument("pulse sequence must end with readout");
  for (const auto& seg : segments) {
    if (const auto* mw = std::get_if<MwPulse>(&seg)) {
      if (!(mw->power_MHz >= 0.0) || !(mw->duration_us >= 0.0)) {
        throw invalid_argument("mw pulse power and duration must be non-negative");
      }
    } else if (const auto* w = std::get_if<Wait>(&seg)) {
      if (!(w->duration_us >= 0.0)) throw invalid_argument("wait duration must be non-negative");
    }
  }
}

PulseSequence PulseSequence::rabi(double omega, double t) {
  return PulseSequence{{PolarizeNV{}, MwPulse{omega, 0.0, t}, Readout{}}};
}

PulseSequence PulseSequence::spin_lock(double omega0, double omega, double tau) {
  const double t90 = pi_half_duration_us(omega0);
  return PulseSequence{{PolarizeNV{}, MwPulse{omega0, phase_radians(PhaseLabel::y), t90},
                        MwPulse{omega, 0.0, tau}, MwPulse{omega0, phase_radians(PhaseLabel::minus_y), t90},
                        Readout{}}};
}

namespace {

// Operators and dissipators of the NV (x) target space for one sequence run.
class JointModel {
 public:
  JointModel(const NVCenter& nv, const RelaxationChannels& ch, const std::optional<CoupledTarget>& target)
      : nv_(nv), ch_(ch), target_dim_(target ? target->system.dim() : 1) {
    const int n = 3 * target_dim_;
    if (n > kMaxHilbertDim) throw invalid_argument("joint NV-target dimension exceeds 64");
    id_t_ = OperatorMatrix::Identity(target_dim_, target_dim_);
    static_ = OperatorMatrix::Zero(n, n);
    if (target) {
      const OperatorMatrix ht = hyperfine_hamiltonian(target->system, true);
      static_ += kron(OperatorMatrix::Identity(3, 3), ht);
      static_ += dipolar_hamiltonian(target->coupling, target->nv_axis, target->system);
      if (ch.target_Gamma_per_us > 0.0) {
        const EigenSystem eig = diagonalize(ht);
        const double amp = std::sqrt(ch.target_Gamma_per_us);
        for (int k = 0; k < target_dim_; ++k) {
          const StateVector v = eig.states.col(k);
          target_jumps_.push_back(amp * kron(OperatorMatrix::Identity(3, 3), v * v.adjoint()));
        }
      }
    }
  }

  int dim() const { return 3 * target_dim_; }
  int target_dim() const { return target_dim_; }

  DensityMatrix polarized() const {
    StateVector zero = StateVector::Zero(3);
    zero(1) = 1.0;
    return tensor_product(DensityMatrix::pure(zero), DensityMatrix::maximally_mixed(target_dim_));
  }

  DensityMatrix apply(const DensityMatrix& rho, const MwPulse& mw) const {
    if (mw.duration_us <= 0.0) return rho;
    const DriveField drive{mw.power_MHz, mw.phase_rad, nv_.zero_field_splitting_MHz};
    const OperatorMatrix h = kron(rotating_frame_hamiltonian(drive, nv_.zero_field_splitting_MHz), id_t_) + static_;
    std::vector<OperatorMatrix> jumps = target_jumps_;
    const double t1 = ch_.nv_T1rho.at(mw.power_MHz);
    const bool locking = std::abs(std::remainder(mw.phase_rad, 2.0 * std::numbers::pi)) < 1e-12;
    if (locking && mw.power_MHz > 0.0 && std::isfinite(t1)) {
      const DressedBasis b = dressed_basis(mw.power_MHz);
      const OperatorMatrix to_zero = b.zero() * b.minus().adjoint();
      const OperatorMatrix to_plus = b.plus() * b.minus().adjoint();
      if (ch_.leak_split > 0.0) jumps.push_back(std::sqrt(ch_.leak_split / t1) * kron(to_zero, id_t_));
      if (ch_.leak_split < 1.0) jumps.push_back(std::sqrt((1.0 - ch_.leak_split) / t1) * kron(to_plus, id_t_));
    }
    return propagate(rho, h, mw.duration_us, jumps);
  }

  DensityMatrix apply(const DensityMatrix& rho, const Wait& w) const {
    if (w.duration_us <= 0.0) return rho;
    std::vector<OperatorMatrix> jumps = target_jumps_;
    if (std::isfinite(ch_.nv_T2star_us)) {
      jumps.push_back(std::sqrt(2.0 / ch_.nv_T2star_us) * kron(nv_spin_operators().z, id_t_));
    }
    return propagate(rho, static_, w.duration_us, jumps);
  }

  double readout(const DensityMatrix& rho) const {
    return trace_out_second(rho.matrix(), 3, target_dim_)(1, 1).real();
  }

 private:
  const NVCenter& nv_;
  const RelaxationChannels& ch_;
  int target_dim_;
  OperatorMatrix id_t_;
  OperatorMatrix static_;
  std::vector<OperatorMatrix> target_jumps_;
};

}  // namespace

double run_sequence(const PulseSequence& seq, const NVCenter& nv, const RelaxationChannels& channels,
                    const std::optional<CoupledTarget>& target) {
  seq.validate();
  nv.validate();
  channels.validate();
  const JointModel model(nv, channels, target);
  DensityMatrix rho = model.polarized();
  double pl = 1.0;
  for (const auto& seg : seq.segments) {
    if (std::holds_alternative<PolarizeNV>(seg)) {
      rho = model.polarized();
    } else if (const auto* mw = std::get_if<MwPulse>(&seg)) {
      rho = model.apply(rho, *mw);
    } else if (const auto* w = std::get_if<Wait>(&seg)) {
      rho = model.apply(rho, *w);
    } else {
      pl = model.readout(rho);
    }
  }
  return pl;
}

double flip_flop_transfer(const NVCenter& nv, const TargetSpinSystem& sys, const DipolarCoupling& c, double omega,
                          double tau, const RelaxationChannels& channels, const Eigen::Vector3d& nv_axis) {
  if (3 * sys.dim() > kMaxHilbertDim) throw invalid_argument("joint NV-target dimension exceeds 64");
  const CoupledTarget target{sys, c, nv_axis};
  return 1.0 - run_sequence(PulseSequence::spin_lock(omega, omega, tau), nv, channels, target);
}

std::vector<double> rabi_trace(double omega, std::span<const double> durations,
                               const std::optional<RabiModulation>& modulation) {
  if (!(omega > 0.0)) throw invalid_argument("rabi_trace: Omega must be positive");
  const RabiModulation mod = modulation.value_or(RabiModulation{});
  if (mod.scale.size() != mod.weight.size() || mod.scale.empty()) {
    throw invalid_argument("rabi_trace: modulation scale and weight lists must match");
  }
  double wsum = 0.0;
  for (double w : mod.weight) wsum += w;
  if (!(wsum > 0.0)) throw invalid_argument("rabi_trace: modulation weights must sum to a positive value");

  const NVCenter nv;
  const RelaxationChannels none = RelaxationChannels::none();
  std::vector<double> out;
  out.reserve(durations.size());
  for (double t : durations) {
    double pl = 0.0;
    for (std::size_t k = 0; k < mod.scale.size(); ++k) {
      pl += mod.weight[k] * run_sequence(PulseSequence::rabi(omega * mod.scale[k], t), nv, none);
    }
    out.push_back(pl / wsum);
  }
  return out;
}

std::vector<double> spinlock_trace(const NVCenter& nv, const RelaxationChannels& channels, double omega0, double omega,
                                   std::span<const double> taus) {
  std::vector<double> out;
  out.reserve(taus.size());
  for (double tau : taus) out.push_back(run_sequence(PulseSequence::spin_lock(omega0, omega, tau), nv, channels));
  return out;
}

NoisyTrace apply_shot_noise(std::span<const double> pl, std::int64_t reps, std::mt19937_64& rng) {
  if (reps <= 0) throw invalid_argument("shot noise needs a positive repetition count");
  NoisyTrace out;
  for (double p : pl) {
    const double q = std::clamp(p, 0.0, 1.0);
    std::binomial_distribution<std::int64_t> dist(reps, q);
    const double est = static_cast<double>(dist(rng)) / static_cast<double>(reps);
    out.values.push_back(est);
    out.sem.push_back(std::sqrt(std::max(q * (1.0 - q), 0.0) / static_cast<double>(reps)));
  }
  return out;
}

RabiFit fit_rabi(std::span<const double> t, std::span<const double> y) {
  if (t.size() != y.size() || t.size() < 5) throw invalid_argument("fit_rabi: need at least 5 matching samples");
  const std::size_t n = t.size();
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);
  const double span_t = t.back() - t.front();
  if (!(span_t > 0.0)) throw invalid_argument("fit_rabi: time axis must increase");
  // Periodogram scan up to the Nyquist frequency of the mean sample spacing.
  const double nyquist = 0.5 * static_cast<double>(n - 1) / span_t;
  const double df = 0.1 / span_t;
  double best_f = df, best_power = -1.0;
  for (double f = df; f <= nyquist; f += df) {
    Complex acc(0.0, 0.0);
    for (std::size_t k = 0; k < n; ++k) acc += (y[k] - mean) * std::polar(1.0, -kTwoPi * f * t[k]);
    if (std::norm(acc) > best_power) {
      best_power = std::norm(acc);
      best_f = f;
    }
  }
  Complex acc(0.0, 0.0);
  for (std::size_t k = 0; k < n; ++k) acc += (y[k] - mean) * std::polar(1.0, -kTwoPi * best_f * t[k]);
  const double amp0 = 2.0 * std::abs(acc) / static_cast<double>(n);
  const double phase0 = std::arg(acc);

  const ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    r.resize(static_cast<Eigen::Index>(n));
    if (jac) jac->resize(static_cast<Eigen::Index>(n), 4);
    for (std::size_t k = 0; k < n; ++k) {
      const double arg = kTwoPi * p(0) * t[k] + p(3);
      const double c = std::cos(arg), s = std::sin(arg);
      const auto i = static_cast<Eigen::Index>(k);
      r(i) = p(1) + p(2) * c - y[k];
      if (jac) {
        (*jac)(i, 0) = -p(2) * s * kTwoPi * t[k];
        (*jac)(i, 1) = 1.0;
        (*jac)(i, 2) = c;
        (*jac)(i, 3) = -p(2) * s;
      }
    }
  };
  Eigen::VectorXd p0(4);
  p0 << best_f, mean, amp0, phase0;
  const LsqResult res = levenberg_marquardt(fn, p0);
  RabiFit fit;
  fit.frequency_MHz = res.params(0);
  fit.offset = res.params(1);
  fit.amplitude = res.params(2);
  fit.phase_rad = res.params(3);
  if (fit.amplitude < 0.0) {
    fit.amplitude = -fit.amplitude;
    fit.phase_rad += std::numbers::pi;
  }
  fit.phase_rad = std::remainder(fit.phase_rad, kTwoPi);
  const double dof = std::max<double>(1.0, static_cast<double>(n) - 4.0);
  fit.frequency_error_MHz = std::sqrt(std::max(0.0, res.covariance(0, 0) * 2.0 * res.cost / dof));
  return fit;
}

DecayFit fit_decay(std::span<const double> t, std::span<const double> y) {
  if (t.size() != y.size() || t.size() < 3) throw invalid_argument("fit_decay: need at least 3 matching samples");
  const std::size_t n = t.size();
  // Log-linear initial guess from positive samples.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (y[k] <= 0.0) continue;
    const double ly = std::log(y[k]);
    sx += t[k];
    sy += ly;
    sxx += t[k] * t[k];
    sxy += t[k] * ly;
    ++m;
  }
  double slope = -1.0, icpt = 0.0;
  const double den = m * sxx - sx * sx;
  if (m >= 2 && den > 0.0) {
    slope = (m * sxy - sx * sy) / den;
    icpt = (sy - slope * sx) / m;
  }
  const double t0 = slope < 0.0 ? -1.0 / slope : (t.back() - t.front() + 1.0);
  const ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    r.resize(static_cast<Eigen::Index>(n));
    if (jac) jac->resize(static_cast<Eigen::Index>(n), 2);
    for (std::size_t k = 0; k < n; ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      const double e = std::exp(-t[k] / p(1));
      r(i) = p(0) * e - y[k];
      if (jac) {
        (*jac)(i, 0) = e;
        (*jac)(i, 1) = p(0) * e * t[k] / (p(1) * p(1));
      }
    }
  };
  Eigen::VectorXd p0(2);
  p0 << std::exp(icpt), t0;
  LsqOptions opt;
  opt.lower = Eigen::Vector2d(-kInf, 1e-12);
  const LsqResult res = levenberg_marquardt(fn, p0, opt);
  const double dof = std::max<double>(1.0, static_cast<double>(n) - 2.0);
  return DecayFit{res.params(0), res.params(1), std::sqrt(std::max(0.0, res.covariance(1, 1) * 2.0 * res.cost / dof))};
}

}  // namespace zfesr
