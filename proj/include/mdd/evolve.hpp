#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "mdd/ounoise.hpp"
#include "mdd/schedule.hpp"
#include "mdd/su2.hpp"

namespace mdd::evolve {

/// Static noise values held for the whole run.
struct FrozenNoise {
  double delta = 0.0;
  double eps1 = 0.0;
  double eps2 = 0.0;
};

using NoiseModel = std::variant<noise::NoiseConfig, FrozenNoise>;

enum class Integrator {
  /// One exponential per step, deterministic coefficients at the step midpoint.
  midpoint,
  /// Fourth-order commutator-free Magnus (two exponentials per step, Gauss nodes).
  magnus4,
};

struct RunConfig {
  schedule::DriveSchedule schedule;
  NoiseModel noise = noise::NoiseConfig::defaults();
  std::optional<schedule::SignalParams> signal;
  double dt = 0.01;        // us
  double noise_dt = 0.0;   // grid of the noise traces, a multiple of dt; 0 means dt
  std::vector<double> sample_times;  // us, sorted, multiples of dt
  std::size_t realizations = 300;
  std::uint64_t master_seed = 1;
  unsigned threads = 0;  // 0: std::thread::hardware_concurrency()
  Integrator integrator = Integrator::magnus4;

  double effective_noise_dt() const { return noise_dt > 0.0 ? noise_dt : dt; }
};

/// Ensemble mean and standard error per sample time.
struct EnsembleCurve {
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<double> std_error;
  std::size_t n_realizations = 0;
  std::uint64_t seed = 0;
};

/// Throws std::invalid_argument for grid/timing violations and
/// mdd::PhysicsError when the step-accuracy guard dt*max(|Omega1|, 3 sigma_delta) < 0.3
/// is violated.
void validate(const RunConfig& cfg);

/// Generator of the first-interaction-basis Hamiltonian at time t. Noise
/// samples are taken from the trace grid point at or before t.
PauliCoeffs hamiltonian_at(const RunConfig& cfg, const noise::NoiseTraces& traces, double t);

/// Noise traces covering the run, for realization `r`.
noise::NoiseTraces realization_traces(const RunConfig& cfg, std::size_t r);

/// Time-ordered propagator from t = 0 sampled at cfg.sample_times.
std::vector<Unitary2> propagate(const RunConfig& cfg, const noise::NoiseTraces& traces);

/// exp(+i Omega1 t sigma_x / 2) u: removes the first-drive rotation.
Unitary2 frame_to_I2(const Unitary2& u, double t, double omega1);

/// Noise-free, signal-free propagator at sample time t (same schedule and stepping).
Unitary2 reference_propagator(const RunConfig& cfg, double t);
/// reference_propagator at every sample time.
std::vector<Unitary2> reference_propagators(const RunConfig& cfg);

/// Axial fidelity of the second-interaction-basis propagator, averaged over
/// cfg.realizations noise realizations. Identical for any thread count.
EnsembleCurve ensemble_fidelity(const RunConfig& cfg);

struct SensingCurves {
  EnsembleCurve sigma_z;     // <sigma_z> after reference correction
  EnsembleCurve ground_pop;  // corrected ground-state population
};

/// Evolves the ground state under noise plus signal and reports populations
/// corrected by the reference propagator.
SensingCurves ensemble_sensing(const RunConfig& cfg);

/// Sample times at multiples of `stride` from 0 up to `total` inclusive,
/// snapped to the dt grid.
std::vector<double> strided_times(double stride, double total, double dt);

}  // namespace mdd::evolve
