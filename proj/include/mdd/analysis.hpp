#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mdd/evolve.hpp"

namespace mdd::analysis {

enum class T2Method { fidelity_threshold, population_envelope };

struct T2Result {
  double t2 = 0.0;  // us
  T2Method method = T2Method::fidelity_threshold;
  double threshold = 0.0;
  bool crossed = false;
};

inline constexpr double kFidelityThreshold = 0.79;
inline constexpr double kFidelityLimit = 2.0 / 3.0;
inline constexpr double kPopulationThreshold = 0.68;
/// Peak-to-peak range below which fit_damped_cosine treats a curve as flat.
inline constexpr double kFlatCurveTolerance = 1e-8;

/// First downward crossing of `threshold` by curve.mean, linearly
/// interpolated. `limit` is the long-time value (must be below threshold).
T2Result t2_threshold(const evolve::EnsembleCurve& curve, double limit = kFidelityLimit,
                      double threshold = kFidelityThreshold);

enum class SensingKind { pulsed, continuous };

/// Accumulated signal phase: integral of g|cos(delta t')| for pulsed, g t / 2
/// for continuous.
double theoretical_theta(SensingKind kind, double g, double delta, double t);

/// mean(t) ~ offset + amplitude cos(omega t + phase) exp(-t / decay_time)
struct OscFit {
  double angular_frequency = 0.0;  // rad/us
  double amplitude = 0.0;
  double decay_time = 0.0;  // us, +inf when undamped
  double phase = 0.0;
  double offset = 0.0;
  double residual_rms = 0.0;
};

struct SpectrumPoint {
  double omega;
  double power;
};

class FitFailed : public std::runtime_error {
 public:
  FitFailed(const std::string& what, std::vector<SpectrumPoint> spectrum)
      : std::runtime_error(what), spectrum_(std::move(spectrum)) {}
  const std::vector<SpectrumPoint>& spectrum() const { return spectrum_; }

 private:
  std::vector<SpectrumPoint> spectrum_;
};

/// Periodogram of the mean-subtracted samples on a frequency grid
/// oversampled `oversample` times relative to 2 pi / span.
std::vector<SpectrumPoint> periodogram(const std::vector<double>& t, const std::vector<double>& y,
                                       int oversample = 8);

/// Levenberg-Marquardt fit started from the periodogram peak.
/// Throws std::invalid_argument for fewer than 8 samples, FitFailed when no
/// spectral peak stands above the noise floor.
OscFit fit_damped_cosine(const evolve::EnsembleCurve& curve);

/// Amplitude and phase of an oscillation at a known angular frequency and decay
/// time, by linear least squares on {1, e, e cos(omega t), e sin(omega t)} with
/// e = exp(-t / decay_time). The non-oscillating e term absorbs plain
/// decoherence. Throws std::invalid_argument for fewer than 8 samples.
OscFit fit_fixed_frequency(const evolve::EnsembleCurve& curve, double omega, double decay_time);

/// Time when the population envelope 0.5 + 0.5 A exp(-t/decay) reaches
/// `threshold`, where A is the fitted sigma_z amplitude.
T2Result sensing_t2(const evolve::EnsembleCurve& curve, const OscFit& fit,
                    double threshold = kPopulationThreshold);

}  // namespace mdd::analysis
