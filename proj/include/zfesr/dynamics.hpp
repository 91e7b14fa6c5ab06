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

// Density-matrix propagation, pulse sequences on the NV (optionally coupled
// to one target spin system), and the joint NV-target flip-flop simulation.
//
// Times are in microseconds and Hamiltonians in MHz (ordinary frequency);
// propagators use exp(-i 2 pi H t). Relaxation rates are ordinary rates in
// 1/us, so a coherence with rate Gamma decays as exp(-Gamma t).

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "zfesr/nv_dressed.hpp"
#include "zfesr/spin_core.hpp"

namespace zfesr {

class DensityMatrix {
 public:
  explicit DensityMatrix(OperatorMatrix m);

  static DensityMatrix pure(const StateVector& psi);
  static DensityMatrix maximally_mixed(int dim);

  const OperatorMatrix& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }
  double trace() const { return m_.trace().real(); }
  double min_eigenvalue() const;
  double hermiticity_error() const;
  /// <psi| rho |psi>
  double population(const StateVector& psi) const;
  /// Throws Numeric unless Hermitian, unit trace and PSD within `tol`.
  void check(double tol = 1e-9) const;

 private:
  OperatorMatrix m_;
};

DensityMatrix tensor_product(const DensityMatrix& a, const DensityMatrix& b);

/// Partial trace over the second factor of a (dim_a x dim_b) product space.
OperatorMatrix trace_out_second(const OperatorMatrix& rho, int dim_a, int dim_b);

/// Lindblad generator on column-major vec(rho), for
/// d rho/dt = -i 2 pi [H, rho] + sum_k (L_k rho L_k^dag - {L_k^dag L_k, rho}/2).
/// Jump operators carry sqrt(rate) with rates in 1/us.
Eigen::MatrixXcd liouvillian(const OperatorMatrix& h, std::span<const OperatorMatrix> jumps);

/// Exact propagation over `t_us` (> 0). Unitary conjugation when there are no
/// jumps, superoperator exponential otherwise.
DensityMatrix propagate(const DensityMatrix& rho, const OperatorMatrix& h, double t_us,
                        std::span<const OperatorMatrix> jumps = {});

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct RelaxationChannels {
  T1rhoModel nv_T1rho{kInf, {}};
  double nv_T2star_us = kInf;
  double target_Gamma_per_us = 0.0;
  // Share of locked-state leakage sent to |0>_d; the rest goes to |1>_d.
  double leak_split = 0.5;

  static RelaxationChannels none() { return {}; }
  static RelaxationChannels from(const NVCenter& nv, double target_Gamma_per_us);
  void validate() const;
};

struct DipolarCoupling {
  Eigen::Vector3d separation_nm{0.0, 0.0, 5.0};
  double C0_angular_MHz_nm3 = 2.0 * 3.14159265358979323846 * 52.0;

  double distance_nm() const { return separation_nm.norm(); }
  /// C0 / (2 pi r^3) in MHz.
  double prefactor_MHz() const;
};

/// NV-secular dipolar vector J (a - 3 (a.n) n) in MHz, with a the NV axis and
/// n the unit separation. The coupling is S_z^NV (J . S_target).
Eigen::Vector3d dipolar_vector(const DipolarCoupling& c, const Eigen::Vector3d& nv_axis);

/// S_z^NV (x) (J . S_electron) on the NV (x) electron (x) nucleus space.
OperatorMatrix dipolar_hamiltonian(const DipolarCoupling& c, const Eigen::Vector3d& nv_axis,
                                   const TargetSpinSystem& sys);

struct PolarizeNV {};
struct MwPulse {
  double power_MHz = 0.0;
  double phase_rad = 0.0;
  double duration_us = 0.0;
};
struct Wait {
  double duration_us = 0.0;
};
struct Readout {};
using Segment = std::variant<PolarizeNV, MwPulse, Wait, Readout>;

struct PulseSequence {
  std::vector<Segment> segments;

  /// Throws InvalidArgument unless it starts with polarize and ends with
  /// readout, with non-negative durations and powers.
  void validate() const;

  static PulseSequence rabi(double omega_MHz, double duration_us);
  /// y pi/2 (power omega0), x lock (power omega, length tau), -y pi/2, readout.
  static PulseSequence spin_lock(double omega0_MHz, double omega_MHz, double tau_us);
};

struct CoupledTarget {
  TargetSpinSystem system;
  DipolarCoupling coupling;
  Eigen::Vector3d nv_axis = Eigen::Vector3d::UnitZ();
};

/// Runs the sequence and returns the normalized PL, the NV |0> population at
/// readout. Polarization resets the NV to |0><0| and the target (if any) to
/// the maximally mixed state.
double run_sequence(const PulseSequence& seq, const NVCenter& nv, const RelaxationChannels& channels,
                    const std::optional<CoupledTarget>& target = std::nullopt);

/// Population that left the locked dressed state after the full spin-lock
/// sequence with the NV coupled to `sys` (pi/2 pulses at the lock power).
double flip_flop_transfer(const NVCenter& nv, const TargetSpinSystem& sys, const DipolarCoupling& c,
                          double omega_MHz, double tau_us, const RelaxationChannels& channels,
                          const Eigen::Vector3d& nv_axis = Eigen::Vector3d::UnitZ());

/// Distribution of relative drive amplitudes across NV orientations.
struct RabiModulation {
  std::vector<double> scale{1.0};
  std::vector<double> weight{1.0};
};

std::vector<double> rabi_trace(double omega_MHz, std::span<const double> durations_us,
                               const std::optional<RabiModulation>& modulation = std::nullopt);

/// Spin-lock decay trace: PL after the y pi/2, x lock, -y pi/2 sequence for each tau.
std::vector<double> spinlock_trace(const NVCenter& nv, const RelaxationChannels& channels, double omega0_MHz,
                                   double omega_MHz, std::span<const double> taus_us);

struct NoisyTrace {
  std::vector<double> values;
  std::vector<double> sem;
};

/// Binomial photon-shot noise with `repetitions` shots per point.
NoisyTrace apply_shot_noise(std::span<const double> pl, std::int64_t repetitions, std::mt19937_64& rng);

struct RabiFit {
  double frequency_MHz = 0.0;
  double offset = 0.0;
  double amplitude = 0.0;
  double phase_rad = 0.0;
  double frequency_error_MHz = 0.0;
};

/// Least-squares fit of offset + amplitude cos(2 pi f t + phase); the initial
/// frequency comes from a periodogram scan.
RabiFit fit_rabi(std::span<const double> t_us, std::span<const double> pl);

struct DecayFit {
  double amplitude = 0.0;
  double time_constant_us = 0.0;
  double time_constant_error_us = 0.0;
};

/// Least-squares fit of amplitude exp(-t / T).
DecayFit fit_decay(std::span<const double> t_us, std::span<const double> pl);

}  // namespace zfesr
