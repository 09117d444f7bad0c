#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include <boost/random/normal_distribution.hpp>

namespace mdd::noise {

using Rng = std::mt19937_64;

enum class InitMode { zero, stationary, fixed };

/// Ornstein-Uhlenbeck parameters: correlation time tau_c (us) and diffusion
/// constant c, giving stationary variance c*tau_c/2.
struct OUParams {
  double tau_c = 25.0;
  double diffusion = 0.0;
  InitMode init = InitMode::stationary;
  double init_value = 0.0;  // used when init == fixed
};

/// How the magnetic diffusion constant is derived from T2*.
///   literal:     c = 4 / (T2* tau_c)
///   dimensional: c = 4 / (T2*^2 tau_c), i.e. stationary variance 2/T2*^2, so
///                that quasi-static Gaussian dephasing crosses the 1/e point at T2*.
enum class MagneticCalibration { literal, dimensional };

double magnetic_diffusion(double t2_star, double tau_c, MagneticCalibration cal);

/// Noise environment: magnetic detuning delta(t) plus relative amplitude
/// errors eps1(t), eps2(t) of the two drives.
struct NoiseConfig {
  OUParams magnetic;
  double drive1_rel_err = 0.005;
  double drive2_rel_err = 0.005;
  double drive_tau = 500.0;
  InitMode drive_init = InitMode::stationary;
  double t2_star = 3.0;
  MagneticCalibration calibration = MagneticCalibration::dimensional;

  /// Defaults for NV-center storage experiments: tau_c = 25 us, T2* = 3 us,
  /// drive errors 0.005 with 500 us correlation time.
  static NoiseConfig defaults(MagneticCalibration cal = MagneticCalibration::dimensional);

  /// Recomputes magnetic.diffusion from t2_star, magnetic.tau_c and calibration.
  void recalibrate();

  OUParams drive1() const;
  OUParams drive2() const;
  void validate() const;
};

struct NoiseTraces {
  double dt = 0.0;
  std::vector<double> delta;  // rad/us
  std::vector<double> eps1;
  std::vector<double> eps2;

  std::size_t size() const { return delta.size(); }
};

/// sqrt(c * tau_c / 2).
double stationary_std(const OUParams& p);

/// Parameters of a relative-error process with stationary std `rel_err`:
/// c = 2 rel_err^2 / tau.
OUParams relative_error_params(double rel_err, double tau, InitMode init = InitMode::stationary);

/// Exact one-step update x(t+dt) given x(t).
double ou_step(double x, double dt, const OUParams& p, Rng& rng);

/// Precomputed exact update for a fixed step.
class OUStepper {
 public:
  OUStepper(const OUParams& p, double dt);
  double operator()(double x, Rng& rng) {
    return x * decay_ + (scale_ > 0.0 ? scale_ * gauss_(rng) : 0.0);
  }
  double initial(Rng& rng);

 private:
  OUParams params_;
  double decay_;
  double scale_;
  boost::random::normal_distribution<double> gauss_{0.0, 1.0};
};

/// Sample path of length n (first entry is the initial value).
std::vector<double> ou_path(const OUParams& p, std::size_t n, double dt, Rng& rng);

/// Deterministic seed for an independent stream, mixed from (master, a, b).
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

enum TraceId : std::uint64_t { kDelta = 0, kEps1 = 1, kEps2 = 2 };

/// Three independent OU paths on a common grid. Each trace draws from its own
/// stream stream_seed(seed, trace_id), so disabling one process leaves the
/// others bit-identical.
NoiseTraces make_traces(const NoiseConfig& cfg, std::size_t n_steps, double dt, std::uint64_t seed);

/// Sample autocorrelation at `lag` (mean removed, normalized by lag-0).
double autocorrelation(const std::vector<double>& x, std::size_t lag);

/// Bartlett standard error of the lag-k sample autocorrelation of an AR(1)
/// sequence with coefficient phi and n samples.
double ar1_autocorr_stderr(double phi, std::size_t lag, std::size_t n);

/// CSV dump: t_us, delta_rad_per_us, eps1, eps2.
void write_traces_csv(std::ostream& os, const NoiseTraces& traces);

}  // namespace mdd::noise
