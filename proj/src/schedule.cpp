#include "mdd/schedule.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mdd/errors.hpp"

namespace mdd::schedule {

namespace {

constexpr double kTwoPi = 2.0 * kPi;

bool same_phase(double a, double b) { return std::abs(std::remainder(a - b, kTwoPi)) < 1e-12; }

// Folds x into (-pi/2, pi/2].
double fold_mod_pi(double x) { return x - kPi * std::ceil(x / kPi - 0.5); }

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be > 0");
}

struct Named {
  const char* name;
  SequenceName value;
};

constexpr Named kNames[] = {{"cp", SequenceName::CP},   {"cpmg", SequenceName::CPMG}, {"xy4", SequenceName::XY4},
                            {"xy8", SequenceName::XY8}, {"ur4", SequenceName::UR4},   {"ur10", SequenceName::UR10}};

// Appends whole program cycles of `cycle` and records a warning when total_time
// is not an integer number of cycles.
DriveSchedule repeat_to_cover(double omega1, std::vector<Segment> cycle, double total_time) {
  DriveSchedule s;
  s.omega1 = omega1;
  s.segments = std::move(cycle);
  const double len = s.cycle_duration();
  const double ratio = total_time / len;
  const double whole = std::floor(ratio + 1e-9);
  if (whole < 1.0) {
    throw std::invalid_argument("total_time " + std::to_string(total_time) + " us is shorter than one program cycle (" +
                                std::to_string(len) + " us)");
  }
  s.repeat_count = static_cast<std::size_t>(whole);
  if (std::abs(ratio - whole) > 1e-9) {
    std::ostringstream msg;
    msg << "total_time " << total_time << " us is not an integer number of " << len
        << " us program cycles; last partial cycle truncated (covering " << s.total_duration() << " us)";
    s.warnings.push_back(msg.str());
  }
  return s;
}

}  // namespace

std::string to_string(SequenceName name) {
  switch (name) {
    case SequenceName::CP: return "CP";
    case SequenceName::CPMG: return "CPMG";
    case SequenceName::XY4: return "XY4";
    case SequenceName::XY8: return "XY8";
    case SequenceName::UR4: return "UR4";
    case SequenceName::UR10: return "UR10";
  }
  return "?";
}

PhaseProgram phase_program(SequenceName name) {
  constexpr double h = kPi / 2.0;
  PhaseProgram p;
  p.name = name;
  switch (name) {
    case SequenceName::CP:
      p.phases = {0.0, 0.0};
      break;
    case SequenceName::CPMG:
      p.phases = {h, h};
      break;
    case SequenceName::XY4:
      p.phases = {0.0, h, 0.0, h};
      break;
    case SequenceName::XY8:
      p.phases = {0.0, h, 0.0, h, h, 0.0, h, 0.0};
      break;
    case SequenceName::UR4:
      p.phases = {0.0, kPi, kPi, 0.0};
      break;
    case SequenceName::UR10:
      for (int k : {0, 4, 2, 4, 0, 0, 4, 2, 4, 0}) p.phases.push_back(k * kPi / 5.0);
      break;
  }
  return p;
}

PhaseProgram phase_program(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (const auto& n : kNames) {
    if (lower == n.name) return phase_program(n.value);
  }
  std::string supported;
  for (const auto& n : kNames) supported += (supported.empty() ? "" : ", ") + std::string(n.name);
  throw NotImplemented("unsupported phase program '" + std::string(name) + "'; supported: " + supported);
}

double DriveSchedule::cycle_duration() const {
  double d = 0.0;
  for (const auto& s : segments) d += s.duration;
  return d;
}

double DriveSchedule::total_duration() const { return static_cast<double>(repeat_count) * cycle_duration(); }

DriveSchedule build_storage(StorageKind kind, double omega1, double omega2, double pulse_T, double gap_tau,
                            const PhaseProgram& program, double total_time) {
  require_positive(total_time, "total_time");
  if (!std::isfinite(omega1)) throw std::invalid_argument("omega1 must be finite");
  switch (kind) {
    case StorageKind::cdd: {
      if (omega2 != 0.0) throw std::invalid_argument("cdd schedule requires omega2 = 0");
      return repeat_to_cover(omega1, {Segment{total_time, 0.0, 0.0}}, total_time);
    }
    case StorageKind::ccdd: {
      if (gap_tau != 0.0) throw std::invalid_argument("ccdd schedule requires gap_tau = 0");
      require_positive(omega2, "omega2");
      return repeat_to_cover(omega1, {Segment{total_time, omega2, 0.0}}, total_time);
    }
    case StorageKind::mdd: {
      require_positive(omega2, "omega2");
      require_positive(pulse_T, "pulse_T");
      if (gap_tau < 0.0) throw std::invalid_argument("gap_tau must be >= 0");
      if (std::abs(omega2 * pulse_T - kPi) > 1e-9) {
        std::ostringstream msg;
        msg << "pi-pulse condition Omega2*T = pi violated: Omega2*T = " << omega2 * pulse_T << " rad";
        throw PhysicsError(msg.str());
      }
      if (program.phases.empty()) throw std::invalid_argument("empty phase program");
      std::vector<Segment> cycle;
      for (double phi : program.phases) {
        cycle.push_back({pulse_T, omega2, phi});
        if (gap_tau > 0.0) cycle.push_back({gap_tau, 0.0, phi});
      }
      return repeat_to_cover(omega1, std::move(cycle), total_time);
    }
  }
  throw std::invalid_argument("unknown storage kind");
}

SensingSchedule build_sensing(SensingKind kind, double omega1, double omega2, double gap_tau,
                              const PhaseProgram& program, const SignalParams& signal, double total_time) {
  require_positive(omega2, "omega2");
  require_positive(total_time, "total_time");
  if (signal.g < 0.0) throw std::invalid_argument("signal amplitude g must be >= 0");
  if (program.phases.empty()) throw std::invalid_argument("empty phase program");
  const double T = kPi / omega2;

  std::vector<Segment> cycle;
  if (kind == SensingKind::pulsed) {
    if (!(gap_tau > 0.0)) throw std::invalid_argument("pulsed sensing requires gap_tau > 0");
    const double resonance = signal.delta * (gap_tau + T);
    if (std::abs(resonance - kPi) > 1e-6) {
      std::ostringstream msg;
      msg << "resonance condition Delta*(tau+T) = pi violated: Delta*(tau+T) = " << resonance << " rad";
      throw PhysicsError(msg.str());
    }
    for (double phi : program.phases) {
      cycle.push_back({0.5 * gap_tau, 0.0, phi});
      cycle.push_back({T, omega2, phi});
      cycle.push_back({0.5 * gap_tau, 0.0, phi});
    }
  } else {
    if (gap_tau != 0.0) throw PhysicsError("continuous sensing requires zero pulse separation (tau = 0)");
    if (std::abs(signal.delta - omega2) > 1e-6 * omega2) {
      std::ostringstream msg;
      msg << "resonance condition Delta = Omega2 violated: Delta = " << signal.delta << ", Omega2 = " << omega2
          << " rad/us";
      throw PhysicsError(msg.str());
    }
    for (double phi : program.phases) cycle.push_back({T, omega2, phi});
  }
  return SensingSchedule{repeat_to_cover(omega1, std::move(cycle), total_time), signal};
}

DriveLevel schedule_at(const DriveSchedule& sched, double t) {
  const double total = sched.total_duration();
  if (!(t >= 0.0) || !(t < total)) {
    throw std::invalid_argument("schedule_at: t = " + std::to_string(t) + " outside [0, " + std::to_string(total) +
                                ")");
  }
  const double len = sched.cycle_duration();
  const double cycles = std::floor(t / len);
  double local = t - cycles * len;
  // Absorb rounding so that exact boundaries resolve to the later segment.
  constexpr double eps = 1e-12;
  double start = 0.0;
  for (const auto& s : sched.segments) {
    const double end = start + s.duration;
    if (local < end - eps * std::max(1.0, end)) return {s.omega2, s.phase};
    start = end;
  }
  const auto& first = sched.segments.front();
  return {first.omega2, first.phase};
}

Alignment validate_phase_alignment(const DriveSchedule& sched, const SignalParams& signal) {
  double omega2 = 0.0;
  for (const auto& s : sched.segments) omega2 = std::max(omega2, std::abs(s.omega2));
  if (omega2 == 0.0) throw std::invalid_argument("validate_phase_alignment: schedule has no second drive");

  // Collect phase-change instants over the whole schedule.
  std::vector<double> changes;
  double t = 0.0;
  double current = sched.segments.front().phase;
  for (std::size_t c = 0; c < sched.repeat_count; ++c) {
    for (const auto& s : sched.segments) {
      if (!same_phase(s.phase, current)) {
        changes.push_back(t);
        current = s.phase;
      }
      t += s.duration;
    }
  }
  if (changes.empty()) throw std::invalid_argument("validate_phase_alignment: schedule has no phase change");

  auto xi_at = [&](double instant) { return signal.xi + omega2 * instant; };
  Alignment out;
  out.residual = fold_mod_pi(xi_at(changes.front()));
  out.aligned = std::abs(out.residual) < 1e-6;
  for (std::size_t k = 1; k < changes.size() && out.aligned; ++k) {
    if (std::abs(fold_mod_pi(xi_at(changes[k]) - xi_at(changes.front()))) >= 1e-6) out.aligned = false;
  }
  return out;
}

DriveSchedule align_first_period(const DriveSchedule& sched, const SignalParams& signal) {
  if (sched.segments.size() < 2 || same_phase(sched.segments[0].phase, sched.segments[1].phase)) {
    throw std::invalid_argument("align_first_period: first constant-phase period must be a single segment");
  }
  double omega2 = 0.0;
  for (const auto& s : sched.segments) omega2 = std::max(omega2, std::abs(s.omega2));
  if (omega2 == 0.0) throw std::invalid_argument("align_first_period: schedule has no second drive");
  // smallest t1 > 0 with xi + omega2 t1 = 0 (mod pi)
  double rem = std::fmod(signal.xi, kPi);
  if (rem < 0.0) rem += kPi;
  const double t1 = (kPi - rem) / omega2;

  DriveSchedule out;
  out.omega1 = sched.omega1;
  out.warnings = sched.warnings;
  out.repeat_count = 1;
  for (std::size_t c = 0; c < sched.repeat_count; ++c) {
    for (const auto& s : sched.segments) out.segments.push_back(s);
  }
  out.segments.front().duration = t1;
  return out;
}

double cycle_pulse_area(const DriveSchedule& sched) {
  double a = 0.0;
  for (const auto& s : sched.segments) a += std::abs(s.omega2) * s.duration;
  return a;
}

double mean_square_omega2(const DriveSchedule& sched) {
  double a = 0.0;
  for (const auto& s : sched.segments) a += s.omega2 * s.omega2 * s.duration;
  return a / sched.cycle_duration();
}

nlohmann::json to_json(const DriveSchedule& sched) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : sched.segments) {
    segs.push_back({{"dur_us", s.duration}, {"omega2_MHz", s.omega2 / kTwoPi}, {"phase_rad", s.phase}});
  }
  return {{"omega1_MHz", sched.omega1 / kTwoPi}, {"segments", segs}, {"repeat", sched.repeat_count}};
}

DriveSchedule schedule_from_json(const nlohmann::json& j) {
  DriveSchedule s;
  s.omega1 = j.at("omega1_MHz").get<double>() * kTwoPi;
  for (const auto& seg : j.at("segments")) {
    s.segments.push_back({seg.at("dur_us").get<double>(), seg.at("omega2_MHz").get<double>() * kTwoPi,
                          seg.at("phase_rad").get<double>()});
  }
  s.repeat_count = j.at("repeat").get<std::size_t>();
  return s;
}

}  // namespace mdd::schedule
