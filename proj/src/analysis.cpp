#include "mdd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/QR>
#include <unsupported/Eigen/LevenbergMarquardt>

namespace mdd::analysis {

T2Result t2_threshold(const evolve::EnsembleCurve& curve, double limit, double threshold) {
  const auto& t = curve.times;
  const auto& y = curve.mean;
  if (t.size() < 2 || y.size() != t.size()) throw std::invalid_argument("t2_threshold needs at least 2 samples");
  if (!(threshold > limit) || !(threshold < 1.0)) {
    throw std::invalid_argument("t2_threshold: threshold must lie between limit and 1");
  }
  T2Result r;
  r.method = T2Method::fidelity_threshold;
  r.threshold = threshold;
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t[i] < t[i - 1]) throw std::invalid_argument("t2_threshold: sample times must be sorted");
    if (y[i - 1] >= threshold && y[i] < threshold) {
      const double w = (y[i - 1] - threshold) / (y[i - 1] - y[i]);
      r.t2 = t[i - 1] + w * (t[i] - t[i - 1]);
      r.crossed = true;
      return r;
    }
  }
  r.t2 = t.back();
  return r;
}

double theoretical_theta(SensingKind kind, double g, double delta, double t) {
  if (t < 0.0) throw std::invalid_argument("theoretical_theta needs t >= 0");
  if (kind == SensingKind::continuous) return 0.5 * g * t;
  if (delta == 0.0) return g * t;
  const double w = std::abs(delta);
  const double x = w * t;
  const double n = std::floor(x / std::numbers::pi);
  const double rem = x - n * std::numbers::pi;
  const double partial = rem <= 0.5 * std::numbers::pi ? std::sin(rem) : 2.0 - std::sin(rem);
  return g / w * (2.0 * n + partial);
}

std::vector<SpectrumPoint> periodogram(const std::vector<double>& t, const std::vector<double>& y, int oversample) {
  if (t.size() < 2 || y.size() != t.size()) throw std::invalid_argument("periodogram needs matching samples");
  const double span = t.back() - t.front();
  if (!(span > 0.0)) throw std::invalid_argument("periodogram needs a positive time span");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());

  const double step = 2.0 * std::numbers::pi / (span * oversample);
  const double nyquist = std::numbers::pi * static_cast<double>(t.size() - 1) / span;
  std::vector<SpectrumPoint> out;
  for (double w = step; w <= nyquist; w += step) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) acc += (y[i] - mean) * std::polar(1.0, -w * (t[i] - t.front()));
    out.push_back({w, std::norm(acc) / static_cast<double>(t.size())});
  }
  return out;
}

namespace {

// params: offset, amplitude, omega, phase, rate
struct DampedCosine : Eigen::DenseFunctor<double> {
  const std::vector<double>& t;
  const std::vector<double>& y;
  double t0;

  DampedCosine(const std::vector<double>& t_, const std::vector<double>& y_)
      : Eigen::DenseFunctor<double>(5, static_cast<int>(t_.size())), t(t_), y(y_), t0(t_.front()) {}

  int operator()(const InputType& p, ValueType& f) const {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double s = t[i] - t0;
      f[i] = p[0] + p[1] * std::cos(p[2] * s + p[3]) * std::exp(-p[4] * s) - y[i];
    }
    return 0;
  }

  int df(const InputType& p, JacobianType& j) const {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double s = t[i] - t0;
      const double e = std::exp(-p[4] * s);
      const double c = std::cos(p[2] * s + p[3]);
      const double sn = std::sin(p[2] * s + p[3]);
      const auto r = static_cast<Eigen::Index>(i);
      j(r, 0) = 1.0;
      j(r, 1) = c * e;
      j(r, 2) = -p[1] * s * sn * e;
      j(r, 3) = -p[1] * sn * e;
      j(r, 4) = -p[1] * s * c * e;
    }
    return 0;
  }
};

double rms(const DampedCosine& f, const Eigen::VectorXd& p) {
  Eigen::VectorXd r(f.values());
  f(p, r);
  return std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
}

}  // namespace

OscFit fit_damped_cosine(const evolve::EnsembleCurve& curve) {
  const auto& t = curve.times;
  const auto& y = curve.mean;
  if (t.size() < 8 || y.size() != t.size()) throw std::invalid_argument("fit_damped_cosine needs at least 8 samples");

  auto spectrum = periodogram(t, y);
  // Curves flat to round-off carry no oscillation to fit.
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  if (!(*hi - *lo > kFlatCurveTolerance)) throw FitFailed("curve is flat; nothing to fit", std::move(spectrum));
  if (spectrum.empty()) throw FitFailed("no resolvable frequencies", std::move(spectrum));
  std::vector<double> powers;
  for (const auto& p : spectrum) powers.push_back(p.power);
  auto peak = std::max_element(spectrum.begin(), spectrum.end(),
                               [](const SpectrumPoint& a, const SpectrumPoint& b) { return a.power < b.power; });
  std::nth_element(powers.begin(), powers.begin() + static_cast<std::ptrdiff_t>(powers.size() / 2), powers.end());
  const double floor = powers[powers.size() / 2];
  if (!(peak->power > 10.0 * floor) || !(peak->power > 0.0)) {
    throw FitFailed("no spectral peak above the noise floor", std::move(spectrum));
  }

  const double t0 = t.front();
  const double span = t.back() - t0;
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  std::complex<double> acc = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) acc += (y[i] - mean) * std::polar(1.0, -peak->omega * (t[i] - t0));
  const double amp0 = 2.0 * std::abs(acc) / static_cast<double>(t.size());
  const double phase0 = std::arg(acc);

  DampedCosine functor(t, y);
  Eigen::VectorXd best;
  double best_rms = std::numeric_limits<double>::infinity();
  for (double rate0 : {0.0, 1.0 / span, 3.0 / span}) {
    Eigen::VectorXd p(5);
    p << mean, amp0 * (1.0 + rate0 * span / 2.0), peak->omega, phase0, rate0;
    Eigen::LevenbergMarquardt<DampedCosine> lm(functor);
    lm.setMaxfev(2000);
    lm.minimize(p);
    if (!p.allFinite()) continue;
    const double r = rms(functor, p);
    if (r < best_rms) {
      best_rms = r;
      best = p;
    }
  }
  if (best.size() == 0) throw FitFailed("least-squares fit diverged", std::move(spectrum));

  OscFit fit;
  fit.offset = best[0];
  fit.amplitude = best[1];
  fit.angular_frequency = best[2];
  fit.phase = best[3];
  if (fit.angular_frequency < 0.0) {
    fit.angular_frequency = -fit.angular_frequency;
    fit.phase = -fit.phase;
  }
  if (fit.amplitude < 0.0) {
    fit.amplitude = -fit.amplitude;
    fit.phase += std::numbers::pi;
  }
  // report the phase relative to t = 0 rather than the first sample
  fit.phase = std::remainder(fit.phase - fit.angular_frequency * t0, 2.0 * std::numbers::pi);
  fit.decay_time = best[4] > 0.0 ? 1.0 / best[4] : std::numeric_limits<double>::infinity();
  if (t0 != 0.0 && std::isfinite(fit.decay_time)) fit.amplitude *= std::exp(t0 / fit.decay_time);
  fit.residual_rms = best_rms;
  return fit;
}

OscFit fit_fixed_frequency(const evolve::EnsembleCurve& curve, double omega, double decay_time) {
  const auto& t = curve.times;
  const auto& y = curve.mean;
  if (t.size() < 8 || y.size() != t.size()) throw std::invalid_argument("fit_fixed_frequency needs at least 8 samples");
  if (!(decay_time > 0.0)) throw std::invalid_argument("fit_fixed_frequency needs decay_time > 0");
  const bool damped = std::isfinite(decay_time);
  const Eigen::Index n = static_cast<Eigen::Index>(t.size());
  const Eigen::Index cols = damped ? 4 : 3;
  Eigen::MatrixXd a(n, cols);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = t[static_cast<std::size_t>(i)];
    const double e = damped ? std::exp(-s / decay_time) : 1.0;
    a(i, 0) = 1.0;
    a(i, 1) = e * std::cos(omega * s);
    a(i, 2) = e * std::sin(omega * s);
    if (damped) a(i, 3) = e;
    b(i) = y[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd x = a.colPivHouseholderQr().solve(b);
  OscFit fit;
  fit.angular_frequency = omega;
  fit.decay_time = decay_time;
  fit.offset = x(0);
  fit.amplitude = std::hypot(x(1), x(2));
  fit.phase = std::atan2(-x(2), x(1));
  fit.residual_rms = std::sqrt((a * x - b).squaredNorm() / static_cast<double>(n));
  return fit;
}

T2Result sensing_t2(const evolve::EnsembleCurve& curve, const OscFit& fit, double threshold) {
  T2Result r;
  r.method = T2Method::population_envelope;
  r.threshold = threshold;
  const double excess = threshold - 0.5;
  const double peak = 0.5 * fit.amplitude;
  if (!(peak > excess) || !std::isfinite(fit.decay_time) || !(excess > 0.0)) {
    r.t2 = curve.times.empty() ? 0.0 : curve.times.back();
    return r;
  }
  r.t2 = fit.decay_time * std::log(peak / excess);
  r.crossed = true;
  return r;
}

}  // namespace mdd::analysis
