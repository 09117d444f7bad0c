#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mdd/analysis.hpp"
#include "mdd/closedform.hpp"
#include "mdd/errors.hpp"
#include "mdd/evolve.hpp"

using namespace mdd;
using namespace mdd::evolve;
using schedule::SequenceName;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2 * kPi;
const double kOmega1 = kTwoPi * 2.0;

RunConfig storage_cfg(schedule::StorageKind kind, double total, std::size_t realizations) {
  RunConfig c;
  const double w2 = kind == schedule::StorageKind::cdd ? 0.0 : kTwoPi * 0.2;
  const double T = kind == schedule::StorageKind::mdd ? 2.5 : 0.0;
  const double tau = kind == schedule::StorageKind::mdd ? 0.5 : 0.0;
  c.schedule = schedule::build_storage(kind, kOmega1, w2, T, tau, schedule::phase_program(SequenceName::UR10), total);
  c.realizations = realizations;
  c.master_seed = 2024;
  return c;
}

// Right-hand side of dU/dt = -i H(t) U with H written out from the model:
// hx = W1(1+e1) + g cos(D t + xi), hy = 2 W2(1+e2) cos(W1 t + phi) + g sin(D t + xi), hz = delta.
Mat2 rhs(const RunConfig& cfg, const FrozenNoise& n, const schedule::Segment& seg, double t, const Mat2& u) {
  double hx = cfg.schedule.omega1 * (1 + n.eps1);
  double hy = 2 * seg.omega2 * (1 + n.eps2) * std::cos(cfg.schedule.omega1 * t + seg.phase);
  if (cfg.signal) {
    hx += cfg.signal->g * std::cos(cfg.signal->delta * t + cfg.signal->xi);
    hy += cfg.signal->g * std::sin(cfg.signal->delta * t + cfg.signal->xi);
  }
  const Mat2 h = cplx(hx / 2) * Mat2::pauli_x() + cplx(hy / 2) * Mat2::pauli_y() + cplx(n.delta / 2) * Mat2::pauli_z();
  return cplx(0, -1) * (h * u);
}

// Classical RK4 over the whole schedule; steps never straddle a segment edge.
Mat2 rk4_oracle(const RunConfig& cfg, const FrozenNoise& n, int substeps) {
  Mat2 u = Mat2::identity();
  const double h = cfg.dt / substeps;
  double t0 = 0.0;
  for (std::size_t c = 0; c < cfg.schedule.repeat_count; ++c) {
    for (const auto& seg : cfg.schedule.segments) {
      const auto steps = std::lround(seg.duration / h);
      for (long k = 0; k < steps; ++k) {
        const double t = t0 + static_cast<double>(k) * h;
        auto f = [&](double s, const Mat2& x) { return rhs(cfg, n, seg, s, x); };
        const Mat2 k1 = f(t, u);
        const Mat2 k2 = f(t + h / 2, u + cplx(h / 2) * k1);
        const Mat2 k3 = f(t + h / 2, u + cplx(h / 2) * k2);
        const Mat2 k4 = f(t + h, u + cplx(h) * k3);
        u = u + cplx(h / 6) * (k1 + cplx(2) * k2 + cplx(2) * k3 + k4);
      }
      t0 += seg.duration;
    }
  }
  return u;
}

}  // namespace

TEST(Hamiltonian, BareFirstDrive) {
  auto cfg = storage_cfg(schedule::StorageKind::cdd, 10.0, 2);
  cfg.noise = FrozenNoise{};
  const auto tr = realization_traces(cfg, 0);
  const auto h = hamiltonian_at(cfg, tr, 3.3);
  EXPECT_EQ(h.h0, 0.0);
  EXPECT_EQ(h.hx, kOmega1);
  EXPECT_EQ(h.hy, 0.0);
  EXPECT_EQ(h.hz, 0.0);
}

TEST(Hamiltonian, PhaseSignOfSecondDrive) {
  auto cfg = storage_cfg(schedule::StorageKind::mdd, 30.0, 2);
  cfg.noise = FrozenNoise{0.0, 0.0, 0.05};
  const auto tr = realization_traces(cfg, 0);
  // second pulse starts at 3 us with phase 4 pi / 5; pick t so that cos(W1 t + phi) = -1
  const double phi = 4 * kPi / 5;
  const double t = (kPi - phi + kTwoPi * 7) / kOmega1;
  ASSERT_GT(t, 3.0);
  ASSERT_LT(t, 5.5);
  const auto h = hamiltonian_at(cfg, tr, t);
  EXPECT_NEAR(h.hy, -2 * kTwoPi * 0.2 * 1.05, 1e-12);
}

TEST(Hamiltonian, SignalAtTimeZero) {
  RunConfig cfg;
  const schedule::SignalParams sig{kTwoPi * 0.00692, kTwoPi * 0.02, 0.0};
  cfg.schedule = schedule::build_sensing(schedule::SensingKind::pulsed, kOmega1, kTwoPi * 0.2, 22.5,
                                         schedule::phase_program(SequenceName::UR10), sig, 250.0)
                     .drive;
  cfg.signal = sig;
  cfg.noise = FrozenNoise{};
  const auto h = hamiltonian_at(cfg, realization_traces(cfg, 0), 0.0);
  EXPECT_NEAR(h.hx, kOmega1 + kTwoPi * 0.00692, 1e-15);
}

TEST(Propagate, ConstantGeneratorIsExact) {
  auto cfg = storage_cfg(schedule::StorageKind::cdd, 5.0, 2);
  cfg.noise = FrozenNoise{};
  cfg.sample_times = {0.5, 5.0};
  const auto us = propagate(cfg, realization_traces(cfg, 0));
  EXPECT_LT(max_abs_diff(us[0].m, pauli_expm({0, kOmega1, 0, 0}, 0.5).m), 1e-12);
  EXPECT_LT(max_abs_diff(us[1].m, pauli_expm({0, kOmega1, 0, 0}, 5.0).m), 1e-11);
}

TEST(Propagate, MatchesRungeKuttaOracle) {
  for (auto integ : {Integrator::magnus4, Integrator::midpoint}) {
    RunConfig cfg;
    cfg.schedule = schedule::build_storage(schedule::StorageKind::mdd, kOmega1, kTwoPi * 0.25, 2.0, 0.5,
                                           schedule::phase_program(SequenceName::UR4), 10.0);
    cfg.signal = schedule::SignalParams{0.05, 0.3, 0.4};
    const FrozenNoise n{0.4, 0.01, -0.03};
    cfg.noise = n;
    cfg.integrator = integ;
    cfg.sample_times = {10.0};
    const auto u = propagate(cfg, realization_traces(cfg, 0)).front();
    const Mat2 ref = rk4_oracle(cfg, n, 10);
    const double tol = integ == Integrator::magnus4 ? 1e-7 : 5e-4;
    EXPECT_LT(max_abs_diff(u.m, ref), tol) << (integ == Integrator::magnus4 ? "magnus4" : "midpoint");
  }
}

TEST(Propagate, SameSeedIsBitwiseIdentical) {
  auto cfg = storage_cfg(schedule::StorageKind::mdd, 30.0, 2);
  cfg.sample_times = strided_times(3.0, 30.0, cfg.dt);
  const auto a = propagate(cfg, realization_traces(cfg, 1));
  const auto b = propagate(cfg, realization_traces(cfg, 1));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].m.e, b[i].m.e);
}

TEST(FrameToI2, Examples) {
  const auto u = pauli_expm({0, 0.3, 1.2, -0.4}, 0.7);
  EXPECT_LT(max_abs_diff(frame_to_I2(u, 0.0, kOmega1).m, u.m), 1e-15);
  const double t = 0.37;
  EXPECT_LT(max_abs_diff(frame_to_I2(pauli_expm({0, kOmega1, 0, 0}, t), t, kOmega1).m, Mat2::identity()), 1e-14);
  const double full = kTwoPi / kOmega1;
  const auto w = frame_to_I2(u, full, kOmega1);
  EXPECT_LT(max_abs_diff(w.m, cplx(-1) * u.m), 1e-14);
  EXPECT_NEAR(fidelity_axial(w), fidelity_axial(u), 1e-14);
}

TEST(Reference, IdentityAtStartAndFullCycle) {
  auto cfg = storage_cfg(schedule::StorageKind::mdd, 30.0, 2);
  cfg.sample_times = {0.0, 30.0};
  const auto refs = reference_propagators(cfg);
  EXPECT_LT(max_abs_diff(refs[0].m, Mat2::identity()), 1e-15);
  EXPECT_GT(fidelity_axial(refs[1]), 0.999);
  EXPECT_GT(fidelity_axial(reference_propagator(cfg, 30.0)), 0.999);
}

TEST(Reference, CorrectionRestoresGroundStateWithoutSignal) {
  RunConfig cfg;
  const schedule::SignalParams sig{0.0, kTwoPi * 0.02, 0.0};
  cfg.schedule = schedule::build_sensing(schedule::SensingKind::pulsed, kOmega1, kTwoPi * 0.2, 22.5,
                                         schedule::phase_program(SequenceName::UR10), sig, 250.0)
                     .drive;
  cfg.signal = sig;
  cfg.noise = FrozenNoise{};
  cfg.realizations = 2;
  cfg.sample_times = strided_times(25.0, 250.0, cfg.dt);
  // one pulse plus gap inverts the bare populations
  EXPECT_LT(std::norm(reference_propagator(cfg, 25.0)(0, 0)), 1e-3);
  const auto s = ensemble_sensing(cfg);
  for (double p : s.ground_pop.mean) EXPECT_NEAR(p, 1.0, 1e-10);
  for (double z : s.sigma_z.mean) EXPECT_NEAR(z, 1.0, 1e-10);
}

TEST(Ensemble, ZeroNoiseGivesUnitFidelity) {
  auto cfg = storage_cfg(schedule::StorageKind::mdd, 300.0, 2);
  cfg.noise = FrozenNoise{};
  cfg.sample_times = strided_times(30.0, 300.0, cfg.dt);
  const auto c = ensemble_fidelity(cfg);
  for (std::size_t i = 0; i < c.mean.size(); ++i) {
    EXPECT_GE(c.mean[i], 0.999) << c.times[i];
    EXPECT_EQ(c.std_error[i], 0.0);
  }
}

TEST(Ensemble, ThreadCountDoesNotChangeResults) {
  auto cfg = storage_cfg(schedule::StorageKind::mdd, 60.0, 16);
  cfg.sample_times = strided_times(30.0, 60.0, cfg.dt);
  cfg.threads = 1;
  const auto a = ensemble_fidelity(cfg);
  cfg.threads = 8;
  const auto b = ensemble_fidelity(cfg);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std_error, b.std_error);
}

TEST(Ensemble, DephasingNearT2Star) {
  RunConfig cfg;
  cfg.schedule = schedule::build_storage(schedule::StorageKind::cdd, 0.0, 0.0, 0.0, 0.0, {}, 10.0);
  cfg.realizations = 200;
  cfg.sample_times = strided_times(0.1, 10.0, cfg.dt);
  const auto r = analysis::t2_threshold(ensemble_fidelity(cfg));
  ASSERT_TRUE(r.crossed);
  EXPECT_NEAR(r.t2, 3.0, 0.6);
}

TEST(Ensemble, ProtocolOrderingAt200us) {
  auto fid = [](schedule::StorageKind k) {
    auto cfg = storage_cfg(k, 210.0, 40);
    cfg.sample_times = {0.0, 210.0};
    return ensemble_fidelity(cfg).mean.back();
  };
  const double cdd = fid(schedule::StorageKind::cdd);
  const double ccdd = fid(schedule::StorageKind::ccdd);
  const double mdd = fid(schedule::StorageKind::mdd);
  EXPECT_GT(mdd, ccdd);
  EXPECT_GT(ccdd, cdd);
}

TEST(Ensemble, FrozenUr4MatchesClosedForm) {
  RunConfig cfg;
  const double w2 = kOmega1 * 0.01;
  cfg.schedule = schedule::build_storage(schedule::StorageKind::mdd, kOmega1, w2, kPi / w2, 0.0,
                                         schedule::phase_program(SequenceName::UR4), 100.0);
  const closedform::StaticErrors e{0.3, 0.1};
  cfg.noise = FrozenNoise{0.0, e.eps1_tilde * w2 / kOmega1, e.eps2};
  cfg.realizations = 2;
  cfg.sample_times = {100.0};
  const double engine = ensemble_fidelity(cfg).mean.front();
  const auto layout = closedform::pulse_layout(schedule::phase_program(SequenceName::UR4));
  const double exact = fidelity_axial(closedform::sequence_propagator(layout, e));
  EXPECT_NEAR(engine, exact, 1e-3);
}

TEST(Validate, GuardsAndGrid) {
  auto cfg = storage_cfg(schedule::StorageKind::cdd, 10.0, 2);
  cfg.sample_times = {0.0, 5.005};
  EXPECT_THROW(validate(cfg), std::invalid_argument);
  cfg.sample_times = {0.0, 11.0};
  EXPECT_THROW(validate(cfg), std::invalid_argument);
  cfg.sample_times = {0.0, 5.0};
  EXPECT_NO_THROW(validate(cfg));
  cfg.dt = 0.025;
  EXPECT_THROW(validate(cfg), PhysicsError);
  cfg.dt = 0.01;
  cfg.noise_dt = 0.015;
  EXPECT_THROW(validate(cfg), std::invalid_argument);
}

TEST(Validate, CoarseNoiseGridHoldsValues) {
  auto cfg = storage_cfg(schedule::StorageKind::cdd, 10.0, 2);
  cfg.noise_dt = 0.1;
  const auto tr = realization_traces(cfg, 0);
  EXPECT_EQ(tr.size(), 100u);
  const auto a = hamiltonian_at(cfg, tr, 0.2);
  const auto b = hamiltonian_at(cfg, tr, 0.29);
  EXPECT_EQ(a.hz, b.hz);
  EXPECT_EQ(a.hz, tr.delta[2]);
}

TEST(StridedTimes, SnapsToGrid) {
  const auto t = strided_times(0.1, 1.0, 0.01);
  ASSERT_EQ(t.size(), 11u);
  EXPECT_EQ(t.front(), 0.0);
  EXPECT_NEAR(t.back(), 1.0, 1e-12);
  EXPECT_THROW(strided_times(0.015, 1.0, 0.01), std::invalid_argument);
}
