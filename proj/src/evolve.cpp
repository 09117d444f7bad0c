#include "mdd/evolve.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "mdd/errors.hpp"

namespace mdd::evolve {

namespace {

using schedule::SignalParams;

struct CompiledSegment {
  std::size_t n_steps;
  double omega2;
  double phase;
};

// Schedule unrolled onto the integer step grid.
struct Grid {
  double dt = 0.0;
  std::size_t n_steps = 0;
  std::size_t noise_stride = 1;
  std::vector<CompiledSegment> segments;
  std::vector<std::size_t> sample_steps;
};

std::size_t to_steps(double duration, double dt, const std::string& what) {
  const double ratio = duration / dt;
  const double n = std::round(ratio);
  if (!(n >= 0.0) || std::abs(ratio - n) > 1e-7 * std::max(1.0, n)) {
    std::ostringstream msg;
    msg << what << " (" << duration << " us) is not an integer multiple of dt = " << dt << " us";
    throw std::invalid_argument(msg.str());
  }
  return static_cast<std::size_t>(n);
}

Grid compile(const RunConfig& cfg) {
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw std::invalid_argument("dt must be > 0");
  if (cfg.schedule.segments.empty()) throw std::invalid_argument("schedule has no segments");
  Grid g;
  g.dt = cfg.dt;
  g.noise_stride = to_steps(cfg.effective_noise_dt(), cfg.dt, "noise_dt");
  if (g.noise_stride == 0) throw std::invalid_argument("noise_dt must be >= dt");

  std::vector<CompiledSegment> cycle;
  for (std::size_t i = 0; i < cfg.schedule.segments.size(); ++i) {
    const auto& s = cfg.schedule.segments[i];
    if (!(s.duration > 0.0)) throw std::invalid_argument("segment durations must be > 0");
    cycle.push_back({to_steps(s.duration, cfg.dt, "segment " + std::to_string(i) + " duration"), s.omega2, s.phase});
  }
  for (std::size_t c = 0; c < cfg.schedule.repeat_count; ++c) {
    for (const auto& s : cycle) {
      g.segments.push_back(s);
      g.n_steps += s.n_steps;
    }
  }

  std::size_t prev = 0;
  for (std::size_t i = 0; i < cfg.sample_times.size(); ++i) {
    const std::size_t k = to_steps(cfg.sample_times[i], cfg.dt, "sample time");
    if (k > g.n_steps) throw std::invalid_argument("sample time beyond schedule duration");
    if (i > 0 && k < prev) throw std::invalid_argument("sample times must be sorted");
    g.sample_steps.push_back(k);
    prev = k;
  }
  return g;
}

double sigma_delta(const NoiseModel& model) {
  if (const auto* nc = std::get_if<noise::NoiseConfig>(&model)) return noise::stationary_std(nc->magnetic);
  return std::abs(std::get<FrozenNoise>(model).delta) / 3.0;
}

struct NoiseView {
  const double* delta;
  const double* eps1;
  const double* eps2;
  std::size_t size;
};

NoiseView view(const noise::NoiseTraces& tr) {
  if (tr.size() == 0 || tr.eps1.size() != tr.size() || tr.eps2.size() != tr.size()) {
    throw std::invalid_argument("noise traces must be non-empty and of equal length");
  }
  return {tr.delta.data(), tr.eps1.data(), tr.eps2.data(), tr.size()};
}

struct StepContext {
  double omega1;
  double omega2;
  double phase;
  double delta;
  double eps1;
  double eps2;
  const SignalParams* signal;

  PauliCoeffs at(double t) const {
    PauliCoeffs h;
    h.hz = delta;
    h.hx = omega1 * (1.0 + eps1);
    h.hy = omega2 != 0.0 ? 2.0 * omega2 * (1.0 + eps2) * std::cos(omega1 * t + phase) : 0.0;
    if (signal != nullptr && signal->g != 0.0) {
      const double arg = signal->delta * t + signal->xi;
      h.hx += signal->g * std::cos(arg);
      h.hy += signal->g * std::sin(arg);
    }
    return h;
  }
};

// Fourth-order commutator-free Magnus weights.
const double kSqrt3 = std::sqrt(3.0);
const double kNode1 = 0.5 - kSqrt3 / 6.0;
const double kNode2 = 0.5 + kSqrt3 / 6.0;
const double kWeightA = (3.0 - 2.0 * kSqrt3) / 12.0;
const double kWeightB = (3.0 + 2.0 * kSqrt3) / 12.0;

PauliCoeffs mix(const PauliCoeffs& a, double wa, const PauliCoeffs& b, double wb) {
  return {wa * a.h0 + wb * b.h0, wa * a.hx + wb * b.hx, wa * a.hy + wb * b.hy, wa * a.hz + wb * b.hz};
}

constexpr std::size_t kReunitarizeEvery = 4096;

template <class OnSample>
void run_steps(const Grid& g, double omega1, const NoiseView& nz, const SignalParams* signal, Integrator integrator,
               OnSample&& on_sample) {
  Unitary2 u = Unitary2::identity();
  std::size_t next = 0;
  auto emit = [&](std::size_t step) {
    while (next < g.sample_steps.size() && g.sample_steps[next] == step) {
      on_sample(next, u);
      ++next;
    }
  };
  emit(0);

  const double dt = g.dt;
  std::size_t k = 0;
  for (const auto& seg : g.segments) {
    for (std::size_t j = 0; j < seg.n_steps; ++j, ++k) {
      const std::size_t idx = std::min(k / g.noise_stride, nz.size - 1);
      const StepContext ctx{omega1, seg.omega2, seg.phase, nz.delta[idx], nz.eps1[idx], nz.eps2[idx], signal};
      const double t0 = static_cast<double>(k) * dt;
      if (integrator == Integrator::midpoint) {
        u = compose(pauli_expm(ctx.at(t0 + 0.5 * dt), dt), u);
      } else {
        const PauliCoeffs h1 = ctx.at(t0 + kNode1 * dt);
        const PauliCoeffs h2 = ctx.at(t0 + kNode2 * dt);
        u = compose(pauli_expm(mix(h1, kWeightB, h2, kWeightA), dt), u);
        u = compose(pauli_expm(mix(h1, kWeightA, h2, kWeightB), dt), u);
      }
      if ((k + 1) % kReunitarizeEvery == 0) u = reunitarize_if_drifted(u);
      if (next < g.sample_steps.size() && g.sample_steps[next] == k + 1) {
        u = reunitarize_if_drifted(u);
        emit(k + 1);
      }
    }
  }
}

std::size_t noise_length(const Grid& g) { return g.n_steps == 0 ? 1 : (g.n_steps - 1) / g.noise_stride + 1; }

noise::NoiseTraces traces_for(const RunConfig& cfg, const Grid& g, std::size_t r) {
  if (const auto* nc = std::get_if<noise::NoiseConfig>(&cfg.noise)) {
    return noise::make_traces(*nc, noise_length(g), cfg.effective_noise_dt(), noise::stream_seed(cfg.master_seed, r));
  }
  const auto& fz = std::get<FrozenNoise>(cfg.noise);
  noise::NoiseTraces tr;
  tr.dt = cfg.effective_noise_dt();
  tr.delta = {fz.delta};
  tr.eps1 = {fz.eps1};
  tr.eps2 = {fz.eps2};
  return tr;
}

std::vector<Unitary2> propagate_compiled(const RunConfig& cfg, const Grid& g, const noise::NoiseTraces& traces,
                                         const SignalParams* signal) {
  std::vector<Unitary2> out(g.sample_steps.size());
  run_steps(g, cfg.schedule.omega1, view(traces), signal, cfg.integrator,
            [&](std::size_t i, const Unitary2& u) { out[i] = u; });
  return out;
}

std::vector<Unitary2> reference_compiled(const RunConfig& cfg, const Grid& g) {
  noise::NoiseTraces zero;
  zero.dt = cfg.effective_noise_dt();
  zero.delta = {0.0};
  zero.eps1 = {0.0};
  zero.eps2 = {0.0};
  return propagate_compiled(cfg, g, zero, nullptr);
}

unsigned worker_count(const RunConfig& cfg, std::size_t jobs) {
  unsigned n = cfg.threads != 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

// Runs fn(r) for r in [0, n) on `threads` workers; rethrows the first exception.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= n) return;
      try {
        fn(r);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

// Reduction in fixed realization order.
EnsembleCurve reduce(const RunConfig& cfg, const std::vector<std::vector<double>>& per_realization) {
  EnsembleCurve c;
  c.times = cfg.sample_times;
  c.n_realizations = per_realization.size();
  c.seed = cfg.master_seed;
  const std::size_t n_samples = cfg.sample_times.size();
  const double R = static_cast<double>(per_realization.size());
  c.mean.assign(n_samples, 0.0);
  c.std_error.assign(n_samples, 0.0);
  for (std::size_t s = 0; s < n_samples; ++s) {
    double sum = 0.0;
    for (const auto& row : per_realization) sum += row[s];
    const double mean = sum / R;
    double ss = 0.0;
    for (const auto& row : per_realization) ss += (row[s] - mean) * (row[s] - mean);
    c.mean[s] = mean;
    c.std_error[s] = R > 1.0 ? std::sqrt(ss / (R - 1.0) / R) : 0.0;
  }
  return c;
}

}  // namespace

void validate(const RunConfig& cfg) {
  compile(cfg);
  if (const auto* nc = std::get_if<noise::NoiseConfig>(&cfg.noise)) nc->validate();
  const double rate = std::max(std::abs(cfg.schedule.omega1), 3.0 * sigma_delta(cfg.noise));
  if (cfg.dt * rate >= 0.3) {
    std::ostringstream msg;
    msg << "step-accuracy guard dt*max(|Omega1|, 3 sigma_delta) < 0.3 rad violated: " << cfg.dt * rate << " rad";
    throw PhysicsError(msg.str());
  }
}

PauliCoeffs hamiltonian_at(const RunConfig& cfg, const noise::NoiseTraces& traces, double t) {
  const auto level = schedule::schedule_at(cfg.schedule, t);
  const NoiseView nz = view(traces);
  const double ndt = traces.dt > 0.0 ? traces.dt : cfg.effective_noise_dt();
  const auto idx = std::min(static_cast<std::size_t>(std::floor(t / ndt + 1e-9)), nz.size - 1);
  const SignalParams* signal = cfg.signal ? &*cfg.signal : nullptr;
  const StepContext ctx{cfg.schedule.omega1, level.omega2, level.phase, nz.delta[idx], nz.eps1[idx], nz.eps2[idx],
                        signal};
  return ctx.at(t);
}

noise::NoiseTraces realization_traces(const RunConfig& cfg, std::size_t r) { return traces_for(cfg, compile(cfg), r); }

std::vector<Unitary2> propagate(const RunConfig& cfg, const noise::NoiseTraces& traces) {
  validate(cfg);
  const Grid g = compile(cfg);
  return propagate_compiled(cfg, g, traces, cfg.signal ? &*cfg.signal : nullptr);
}

Unitary2 frame_to_I2(const Unitary2& u, double t, double omega1) {
  return compose(pauli_expm(PauliCoeffs{0.0, -omega1, 0.0, 0.0}, t), u);
}

Unitary2 reference_propagator(const RunConfig& cfg, double t) {
  RunConfig single = cfg;
  single.sample_times = {t};
  validate(single);
  return reference_compiled(single, compile(single)).front();
}

std::vector<Unitary2> reference_propagators(const RunConfig& cfg) {
  validate(cfg);
  return reference_compiled(cfg, compile(cfg));
}

EnsembleCurve ensemble_fidelity(const RunConfig& cfg) {
  validate(cfg);
  if (cfg.realizations < 2) throw std::invalid_argument("ensemble_fidelity needs at least 2 realizations");
  const Grid g = compile(cfg);
  const SignalParams* signal = cfg.signal ? &*cfg.signal : nullptr;
  const double omega1 = cfg.schedule.omega1;

  std::vector<std::vector<double>> values(cfg.realizations);
  parallel_for(cfg.realizations, worker_count(cfg, cfg.realizations), [&](std::size_t r) {
    const auto traces = traces_for(cfg, g, r);
    std::vector<double> row(g.sample_steps.size());
    run_steps(g, omega1, view(traces), signal, cfg.integrator, [&](std::size_t i, const Unitary2& u) {
      const double t = static_cast<double>(g.sample_steps[i]) * g.dt;
      row[i] = fidelity_axial(frame_to_I2(u, t, omega1));
    });
    values[r] = std::move(row);
  });
  return reduce(cfg, values);
}

SensingCurves ensemble_sensing(const RunConfig& cfg) {
  validate(cfg);
  if (!cfg.signal) throw std::invalid_argument("ensemble_sensing requires a signal");
  if (cfg.realizations < 2) throw std::invalid_argument("ensemble_sensing needs at least 2 realizations");
  const Grid g = compile(cfg);
  const auto reference = reference_compiled(cfg, g);

  std::vector<std::vector<double>> pops(cfg.realizations);
  parallel_for(cfg.realizations, worker_count(cfg, cfg.realizations), [&](std::size_t r) {
    const auto traces = traces_for(cfg, g, r);
    std::vector<double> row(g.sample_steps.size());
    run_steps(g, cfg.schedule.omega1, view(traces), &*cfg.signal, cfg.integrator,
              [&](std::size_t i, const Unitary2& u) {
                // corrected state V rho_z V^dagger with V = U0^dagger U; ground population |V00|^2
                const Unitary2 v = compose(adjoint(reference[i]), u);
                row[i] = std::norm(v(0, 0));
              });
    pops[r] = std::move(row);
  });

  SensingCurves out;
  out.ground_pop = reduce(cfg, pops);
  out.sigma_z = out.ground_pop;
  for (std::size_t s = 0; s < out.sigma_z.mean.size(); ++s) {
    out.sigma_z.mean[s] = 2.0 * out.ground_pop.mean[s] - 1.0;
    out.sigma_z.std_error[s] = 2.0 * out.ground_pop.std_error[s];
  }
  return out;
}

std::vector<double> strided_times(double stride, double total, double dt) {
  if (!(stride > 0.0) || !(dt > 0.0)) throw std::invalid_argument("stride and dt must be > 0");
  const std::size_t stride_steps = to_steps(stride, dt, "sample stride");
  const auto total_steps = static_cast<std::size_t>(std::floor(total / dt + 1e-7));
  std::vector<double> out;
  for (std::size_t k = 0; k <= total_steps; k += stride_steps) out.push_back(static_cast<double>(k) * dt);
  return out;
}

}  // namespace mdd::evolve
