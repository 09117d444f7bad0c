#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mdd::schedule {

inline constexpr double kPi = 3.14159265358979323846;

enum class SequenceName { CP, CPMG, XY4, XY8, UR4, UR10 };

std::string to_string(SequenceName name);

/// Phases of the second-drive pi pulses, applied cyclically.
struct PhaseProgram {
  SequenceName name = SequenceName::CP;
  std::vector<double> phases;  // rad
};

PhaseProgram phase_program(SequenceName name);
/// Case-insensitive lookup ("ur10", "XY8", ...). Throws mdd::NotImplemented
/// listing the supported names.
PhaseProgram phase_program(std::string_view name);

struct Segment {
  double duration = 0.0;  // us
  double omega2 = 0.0;    // rad/us
  double phase = 0.0;     // rad
};

/// First drive amplitude plus a cyclic piecewise-constant second-drive
/// program. Segment intervals are half-open [start, end).
struct DriveSchedule {
  double omega1 = 0.0;  // rad/us
  std::vector<Segment> segments;
  std::size_t repeat_count = 1;
  std::vector<std::string> warnings;

  double cycle_duration() const;
  double total_duration() const;
};

struct SignalParams {
  double g = 0.0;      // rad/us
  double delta = 0.0;  // rad/us, detuning from the qubit frequency
  double xi = 0.0;     // rad
};

enum class StorageKind { cdd, ccdd, mdd };
enum class SensingKind { pulsed, continuous };

/// Storage schedules.
///   cdd:  omega2 must be 0; a single segment with no second drive.
///   ccdd: a single constant-phase segment (gap_tau must be 0).
///   mdd:  [pulse(T, phi_1), gap(tau), pulse(T, phi_2), gap(tau), ...] with
///         omega2 * T = pi; cycles that do not fit into total_time are dropped
///         and a warning is recorded.
DriveSchedule build_storage(StorageKind kind, double omega1, double omega2, double pulse_T,
                            double gap_tau, const PhaseProgram& program, double total_time);

struct SensingSchedule {
  DriveSchedule drive;
  SignalParams signal;
};

/// Sensing schedules with pi pulses of length T = pi/omega2.
///   pulsed:     each pulse is centred in its period: [gap(tau/2), pulse(T), gap(tau/2)],
///               requires delta*(tau+T) = pi.
///   continuous: back-to-back phased pulses (tau = 0), requires delta = omega2.
/// Violations throw mdd::PhysicsError naming the condition.
SensingSchedule build_sensing(SensingKind kind, double omega1, double omega2, double gap_tau,
                              const PhaseProgram& program, const SignalParams& signal, double total_time);

struct DriveLevel {
  double omega2 = 0.0;
  double phase = 0.0;
};

/// Segment active at time t; boundaries belong to the later segment.
DriveLevel schedule_at(const DriveSchedule& sched, double t);

struct Alignment {
  bool aligned = false;
  double residual = 0.0;  // rad, folded to (-pi/2, pi/2]
};

/// Checks the signal-phase selectivity condition xi + Omega2 (t1 - t0) = 0 (mod pi)
/// at the first phase change t1, and that every later phase change satisfies
/// the same condition modulo pi.
Alignment validate_phase_alignment(const DriveSchedule& sched, const SignalParams& signal);

/// Shifts the sequence in time by resizing the first constant-phase period so
/// that the schedule becomes aligned with `signal`. The new first period lies in
/// (0, pi/Omega2]. Resulting durations are not rounded to any integration grid.
DriveSchedule align_first_period(const DriveSchedule& sched, const SignalParams& signal);

/// Time integral of |Omega2(t)| over one cycle.
double cycle_pulse_area(const DriveSchedule& sched);
/// Time average of Omega2(t)^2 over one cycle.
double mean_square_omega2(const DriveSchedule& sched);

/// {omega1_MHz, segments[{dur_us, omega2_MHz, phase_rad}], repeat}
nlohmann::json to_json(const DriveSchedule& sched);
DriveSchedule schedule_from_json(const nlohmann::json& j);

}  // namespace mdd::schedule
