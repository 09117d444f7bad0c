#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "mdd/analysis.hpp"

using namespace mdd::analysis;
using mdd::evolve::EnsembleCurve;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2 * kPi;

EnsembleCurve make_curve(std::vector<double> t, std::vector<double> y) {
  EnsembleCurve c;
  c.times = std::move(t);
  c.mean = std::move(y);
  c.std_error.assign(c.times.size(), 0.0);
  return c;
}

EnsembleCurve damped(double omega, double decay, double amp, double phase, double offset, double step, double span,
                     double noise = 0.0, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> t, y;
  for (double s = 0.0; s <= span + 1e-9; s += step) {
    t.push_back(s);
    y.push_back(offset + amp * std::cos(omega * s + phase) * std::exp(-s / decay) + noise * n(rng));
  }
  return make_curve(t, y);
}

// Composite Simpson quadrature of g |cos(delta t)| as an oracle.
double theta_quadrature(double g, double delta, double t) {
  const int n = 200'000;
  const double h = t / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s += w * std::abs(std::cos(delta * i * h));
  }
  return g * s * h / 3.0;
}

}  // namespace

TEST(T2Threshold, InterpolatesFirstCrossing) {
  const auto r = t2_threshold(make_curve({0, 100, 200}, {1.0, 0.9, 0.75}));
  EXPECT_TRUE(r.crossed);
  EXPECT_NEAR(r.t2, 100 + 100 * (0.9 - 0.79) / 0.15, 1e-9);
  EXPECT_NEAR(r.t2, 173.3, 0.05);
  EXPECT_EQ(r.method, T2Method::fidelity_threshold);
}

TEST(T2Threshold, NoCrossing) {
  const auto r = t2_threshold(make_curve({0, 50, 100}, {1.0, 1.0, 1.0}));
  EXPECT_FALSE(r.crossed);
  EXPECT_EQ(r.t2, 100.0);
}

TEST(T2Threshold, InvalidInput) {
  EXPECT_THROW(t2_threshold(make_curve({0}, {1.0})), std::invalid_argument);
  EXPECT_THROW(t2_threshold(make_curve({0, 1}, {1.0, 0.5}), 0.8, 0.79), std::invalid_argument);
  EXPECT_THROW(t2_threshold(make_curve({0, 2, 1}, {1.0, 0.9, 0.5})), std::invalid_argument);
}

TEST(T2Threshold, ScalesWithTime) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> t, y;
    double f = 1.0;
    for (int i = 0; i < 50; ++i) {
      t.push_back(i * 3.0);
      y.push_back(f);
      f -= 0.02 * u(rng);
    }
    const auto base = t2_threshold(make_curve(t, y));
    for (double s : {0.1, 7.0}) {
      std::vector<double> ts = t;
      for (double& v : ts) v *= s;
      const auto scaled = t2_threshold(make_curve(ts, y));
      EXPECT_EQ(scaled.crossed, base.crossed);
      EXPECT_NEAR(scaled.t2, s * base.t2, 1e-9 * s * base.t2);
    }
  }
}

TEST(Theta, PulsedHalfPeriodAndLongTime) {
  const double g = kTwoPi * 0.00692, d = kTwoPi * 0.02;
  EXPECT_NEAR(theoretical_theta(SensingKind::pulsed, g, d, kPi / d), 2 * g / d, 1e-12);
  const double t = 3000.0;
  EXPECT_NEAR(theoretical_theta(SensingKind::pulsed, g, d, t) / (2 / kPi * g * t), 1.0, 0.01);
}

TEST(Theta, PulsedMatchesQuadrature) {
  const double g = 0.05, d = 0.37;
  for (double t : {0.0, 1.3, 4.24, 8.49, 17.0, 55.5}) {
    EXPECT_NEAR(theoretical_theta(SensingKind::pulsed, g, d, t), theta_quadrature(g, d, t), 1e-9) << t;
  }
}

TEST(Theta, PulsedPeriodicIncrementAndMonotone) {
  const double g = kTwoPi * 0.00692, d = kTwoPi * 0.02;
  double prev = 0.0;
  for (double t = 0.0; t < 400.0; t += 0.7) {
    const double th = theoretical_theta(SensingKind::pulsed, g, d, t);
    EXPECT_GE(th, prev - 1e-15);
    prev = th;
    EXPECT_NEAR(theoretical_theta(SensingKind::pulsed, g, d, t + kPi / d) - th, 2 * g / d, 1e-12);
  }
}

TEST(Theta, Continuous) {
  const double g = kTwoPi * 0.00246;
  EXPECT_NEAR(theoretical_theta(SensingKind::continuous, g, 0.0, 813.0), g * 813.0 / 2, 1e-12);
  EXPECT_NEAR(theoretical_theta(SensingKind::continuous, g, 0.0, 813.0), 6.28, 0.01);
  EXPECT_THROW(theoretical_theta(SensingKind::continuous, g, 0.0, -1.0), std::invalid_argument);
}

TEST(Fit, SyntheticDampedCosine) {
  const auto c = damped(0.0277, 1050.0, 1.0, 0.0, 0.0, 25.0, 3000.0);
  const auto f = fit_damped_cosine(c);
  EXPECT_NEAR(f.angular_frequency / 0.0277, 1.0, 0.01);
  EXPECT_NEAR(f.decay_time / 1050.0, 1.0, 0.05);
  EXPECT_NEAR(f.amplitude, 1.0, 0.01);
  EXPECT_LT(f.residual_rms, 1e-6);
}

TEST(Fit, RandomDraws) {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> om(0.01, 0.05), dec(800.0, 4000.0), amp(0.4, 1.0), ph(-kPi, kPi),
      off(-0.1, 0.1);
  int failures = 0;
  for (int k = 0; k < 100; ++k) {
    const double w = om(rng), tau = dec(rng), a = amp(rng), p = ph(rng), o = off(rng);
    const auto c = damped(w, tau, a, p, o, 20.0, 3000.0, 0.002, 1000 + k);
    const auto f = fit_damped_cosine(c);
    const bool ok = std::abs(f.angular_frequency / w - 1) < 0.01 && std::abs(f.decay_time / tau - 1) < 0.05;
    if (!ok) {
      ++failures;
      ADD_FAILURE() << "draw " << k << ": w " << w << " -> " << f.angular_frequency << ", decay " << tau << " -> "
                    << f.decay_time;
    }
  }
  EXPECT_EQ(failures, 0);
}

TEST(Fit, UndampedGivesInfiniteOrHugeDecay) {
  const auto c = damped(0.03, std::numeric_limits<double>::infinity(), 0.8, 0.4, 0.1, 10.0, 2000.0);
  const auto f = fit_damped_cosine(c);
  EXPECT_NEAR(f.angular_frequency, 0.03, 3e-4);
  EXPECT_GT(f.decay_time, 1e6);
}

TEST(Fit, NoPeakThrowsWithSpectrum) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> t, y;
  for (int i = 0; i < 200; ++i) {
    t.push_back(i);
    y.push_back(n(rng));
  }
  try {
    fit_damped_cosine(make_curve(t, y));
    FAIL() << "expected FitFailed";
  } catch (const FitFailed& e) {
    EXPECT_FALSE(e.spectrum().empty());
  }
  EXPECT_THROW(fit_damped_cosine(make_curve({0, 1, 2}, {0, 1, 0})), std::invalid_argument);
}

TEST(SensingT2, EnvelopeCrossing) {
  const auto c = make_curve({0, 3000}, {1, 1});
  OscFit f;
  f.amplitude = 1.0;
  f.decay_time = 1050.0;
  const auto r = sensing_t2(c, f);
  EXPECT_TRUE(r.crossed);
  EXPECT_NEAR(r.t2, 1050 * std::log(0.5 / 0.18), 1e-9);
  EXPECT_NEAR(r.t2, 1072.0, 1.0);
  EXPECT_EQ(r.method, T2Method::population_envelope);

  f.decay_time = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(sensing_t2(c, f).crossed);
  f.decay_time = 100.0;
  f.amplitude = 0.3;  // envelope starts below the threshold
  EXPECT_FALSE(sensing_t2(c, f).crossed);
}

TEST(FixedFrequencyFit, RecoversAmplitudeUnderDecoherenceDrift) {
  const double w = 0.0077, tau = 4000.0;
  std::vector<double> t, y;
  for (double s = 0.0; s <= 10000.0; s += 80.0) {
    t.push_back(s);
    // oscillation of amplitude 0.3 riding on a non-oscillating decay
    y.push_back(0.05 + 0.3 * std::cos(w * s + 0.7) * std::exp(-s / tau) + 0.6 * std::exp(-s / tau));
  }
  const auto f = fit_fixed_frequency(make_curve(t, y), w, tau);
  EXPECT_NEAR(f.amplitude, 0.3, 1e-9);
  EXPECT_NEAR(f.phase, 0.7, 1e-9);
  EXPECT_NEAR(f.offset, 0.05, 1e-9);

  // pure decay has no component at the signal frequency
  for (auto& v : y) v = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) y[i] = std::exp(-t[i] / tau);
  EXPECT_LT(fit_fixed_frequency(make_curve(t, y), w, tau).amplitude, 1e-9);
}

TEST(FixedFrequencyFit, Undamped) {
  const auto c = damped(0.02, std::numeric_limits<double>::infinity(), 0.5, -1.0, 0.2, 10.0, 1000.0);
  const auto f = fit_fixed_frequency(c, 0.02, std::numeric_limits<double>::infinity());
  EXPECT_NEAR(f.amplitude, 0.5, 1e-9);
  EXPECT_NEAR(f.phase, -1.0, 1e-9);
  EXPECT_THROW(fit_fixed_frequency(c, 0.02, 0.0), std::invalid_argument);
}
