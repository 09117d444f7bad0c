#include "mdd/ounoise.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace mdd::noise {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_params(const OUParams& p) {
  if (!(p.tau_c > 0.0) || !std::isfinite(p.tau_c)) throw std::invalid_argument("OU tau_c must be > 0");
  if (!(p.diffusion >= 0.0) || !std::isfinite(p.diffusion))
    throw std::invalid_argument("OU diffusion must be >= 0");
}

}  // namespace

double magnetic_diffusion(double t2_star, double tau_c, MagneticCalibration cal) {
  if (!(t2_star > 0.0) || !(tau_c > 0.0)) throw std::invalid_argument("T2* and tau_c must be > 0");
  switch (cal) {
    case MagneticCalibration::literal:
      return 4.0 / (t2_star * tau_c);
    case MagneticCalibration::dimensional:
      return 4.0 / (t2_star * t2_star * tau_c);
  }
  throw std::invalid_argument("unknown calibration");
}

NoiseConfig NoiseConfig::defaults(MagneticCalibration cal) {
  NoiseConfig cfg;
  cfg.calibration = cal;
  cfg.magnetic.tau_c = 25.0;
  cfg.recalibrate();
  return cfg;
}

void NoiseConfig::recalibrate() { magnetic.diffusion = magnetic_diffusion(t2_star, magnetic.tau_c, calibration); }

OUParams NoiseConfig::drive1() const { return relative_error_params(drive1_rel_err, drive_tau, drive_init); }
OUParams NoiseConfig::drive2() const { return relative_error_params(drive2_rel_err, drive_tau, drive_init); }

void NoiseConfig::validate() const {
  check_params(magnetic);
  if (!(drive1_rel_err >= 0.0) || !(drive2_rel_err >= 0.0))
    throw std::invalid_argument("drive relative errors must be >= 0");
  if (!(drive_tau > 0.0)) throw std::invalid_argument("drive_tau must be > 0");
}

double stationary_std(const OUParams& p) {
  check_params(p);
  return std::sqrt(0.5 * p.diffusion * p.tau_c);
}

OUParams relative_error_params(double rel_err, double tau, InitMode init) {
  OUParams p;
  p.tau_c = tau;
  p.diffusion = 2.0 * rel_err * rel_err / tau;
  p.init = init;
  return p;
}

double ou_step(double x, double dt, const OUParams& p, Rng& rng) {
  check_params(p);
  if (!(dt > 0.0)) throw std::invalid_argument("ou_step: dt must be > 0");
  const double decay = std::exp(-dt / p.tau_c);
  const double var = 0.5 * p.diffusion * p.tau_c * (1.0 - std::exp(-2.0 * dt / p.tau_c));
  if (var <= 0.0) return x * decay;
  boost::random::normal_distribution<double> gauss(0.0, 1.0);
  return x * decay + std::sqrt(var) * gauss(rng);
}

OUStepper::OUStepper(const OUParams& p, double dt) : params_(p) {
  check_params(p);
  if (!(dt > 0.0)) throw std::invalid_argument("OUStepper: dt must be > 0");
  decay_ = std::exp(-dt / p.tau_c);
  // -expm1 keeps precision for dt << tau_c
  scale_ = std::sqrt(0.5 * p.diffusion * p.tau_c * -std::expm1(-2.0 * dt / p.tau_c));
}

double OUStepper::initial(Rng& rng) {
  switch (params_.init) {
    case InitMode::zero:
      return 0.0;
    case InitMode::fixed:
      return params_.init_value;
    case InitMode::stationary: {
      const double sd = stationary_std(params_);
      return sd > 0.0 ? sd * gauss_(rng) : 0.0;
    }
  }
  return 0.0;
}

std::vector<double> ou_path(const OUParams& p, std::size_t n, double dt, Rng& rng) {
  OUStepper step(p, dt);
  std::vector<double> out(n);
  if (n == 0) return out;
  out[0] = step.initial(rng);
  for (std::size_t i = 1; i < n; ++i) out[i] = step(out[i - 1], rng);
  return out;
}

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ splitmix64(a + 0x632be59bd9b4e019ULL));
  h = splitmix64(h ^ splitmix64(b + 0x8cb92ba72f3d8dd7ULL));
  return h;
}

NoiseTraces make_traces(const NoiseConfig& cfg, std::size_t n_steps, double dt, std::uint64_t seed) {
  if (n_steps < 1) throw std::invalid_argument("make_traces: n_steps must be >= 1");
  cfg.validate();
  NoiseTraces tr;
  tr.dt = dt;
  Rng rd(stream_seed(seed, kDelta));
  Rng r1(stream_seed(seed, kEps1));
  Rng r2(stream_seed(seed, kEps2));
  tr.delta = ou_path(cfg.magnetic, n_steps, dt, rd);
  tr.eps1 = ou_path(cfg.drive1(), n_steps, dt, r1);
  tr.eps2 = ou_path(cfg.drive2(), n_steps, dt, r2);
  return tr;
}

double autocorrelation(const std::vector<double>& x, std::size_t lag) {
  if (lag >= x.size()) throw std::invalid_argument("autocorrelation: lag exceeds sample count");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double c0 = 0.0;
  double ck = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean;
    c0 += d * d;
    if (i + lag < x.size()) ck += d * (x[i + lag] - mean);
  }
  if (c0 == 0.0) throw std::invalid_argument("autocorrelation: constant sequence");
  return ck / c0;
}

double ar1_autocorr_stderr(double phi, std::size_t lag, std::size_t n) {
  if (n == 0) throw std::invalid_argument("ar1_autocorr_stderr: n must be > 0");
  const double p2 = phi * phi;
  const double k = static_cast<double>(lag);
  const double p2k = std::pow(p2, k);
  const double var = ((1.0 + p2) * (1.0 - p2k) / (1.0 - p2) - 2.0 * k * p2k) / static_cast<double>(n);
  return std::sqrt(std::max(var, 0.0));
}

void write_traces_csv(std::ostream& os, const NoiseTraces& traces) {
  os << "t_us,delta_rad_per_us,eps1,eps2\n";
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    os << static_cast<double>(i) * traces.dt << ',' << traces.delta[i] << ',' << traces.eps1[i] << ','
       << traces.eps2[i] << '\n';
  }
  os.precision(old);
}

}  // namespace mdd::noise
