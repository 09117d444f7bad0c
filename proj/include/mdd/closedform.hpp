#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "mdd/schedule.hpp"
#include "mdd/su2.hpp"

// Static-amplitude-error analytics in the second interaction basis, where a
// phased pulse is generated by (Omega2/2)[eps1~ sx + (1+eps2)(cos phi sy + sin phi sz)].
namespace mdd::closedform {

/// eps1_tilde = eps1 * Omega1 / Omega2.
struct StaticErrors {
  double eps1_tilde = 0.0;
  double eps2 = 0.0;
};

/// A pulse of area Omega2*duration, or a gap (Omega2 = 0) whose duration is
/// expressed as the equivalent area Omega2*duration.
struct StaticSegment {
  double area = 0.0;
  double phase = 0.0;
  bool is_gap = false;
};

Unitary2 static_pulse_propagator(double phase, double area, const StaticErrors& e);

/// Ordered product U_n ... U_1 (first segment acts first). Gaps evolve under
/// (area/2) eps1~ sigma_x only.
Unitary2 sequence_propagator(std::span<const StaticSegment> segments, const StaticErrors& e);

/// Pulses of `pulse_area` following `program` for `repeats` cycles, each pulse
/// followed by a gap of equivalent area `gap_area` when gap_area > 0.
std::vector<StaticSegment> pulse_layout(const schedule::PhaseProgram& program, std::size_t repeats = 1,
                                        double gap_area = 0.0, double pulse_area = schedule::kPi);

struct PathPoint {
  double area;  // accumulated Omega2 * t
  BlochVector r;
};

/// Bloch vector of `rho0` sampled `per_segment` times inside every segment
/// (plus the initial point) while the sequence acts.
std::vector<PathPoint> bloch_path(std::span<const StaticSegment> segments, const StaticErrors& e,
                                  const Density2& rho0, std::size_t per_segment = 32);

/// (2 + cos(A sqrt(eps1~^2 + (1+eps2)^2))) / 3
double fidelity_ccdd(double area, const StaticErrors& e);

/// Expansion of 1 - fidelity_ccdd at A = 2 pi m for two noisy drives:
/// A^2 e1^4/24 + (1/3 + e1^2/4) A^2 e1^2 e2 / 2 + (1 - e1^2) A^2 e2^2 / 6.
double error_ccdd_mixed(double area, const StaticErrors& e);

/// Exact UR4 infidelity for a noiseless second drive, y = sqrt(1 + eps1~^2).
double error_ur4(double eps1_tilde);
/// Leading term (2 pi^2 / 3) eps1~^6.
double error_ur4_approx(double eps1_tilde);
/// Lowest-order expansion with both drives noisy.
double error_ur4_mixed(const StaticErrors& e);

enum class ErrorChannel { eps1, eps2 };

/// Log-log least-squares slope of 1 - F versus the error in `channel` over
/// `points` logarithmically spaced values in [lo, hi] (other error zero).
/// Throws std::invalid_argument if fewer than 5 points, a non-positive range,
/// or an infidelity that is not strictly positive.
double scaling_order(std::span<const StaticSegment> sequence, ErrorChannel channel, double lo, double hi,
                     std::size_t points = 9);

enum class HeatmapSequence { cp4, ur4, cp10, ur10 };

HeatmapSequence heatmap_sequence(std::string_view name);
std::string_view to_string(HeatmapSequence s);
/// Zero-separation layout: CPn is n zero-phase pi pulses, URn the robust phases.
std::vector<StaticSegment> heatmap_layout(HeatmapSequence s);

struct HeatmapGrid {
  double eps1_min = -0.5;
  double eps1_max = 0.5;
  double eps2_min = -0.5;
  double eps2_max = 0.5;
  std::size_t resolution = 101;
};

struct Heatmap {
  std::vector<double> eps1_tilde;  // row axis
  std::vector<double> eps2;        // column axis
  std::vector<double> fidelity;    // row-major [eps1 index][eps2 index]
  std::vector<bool> above_067;     // F >= 0.67
  std::vector<bool> above_095;     // F >= 0.95
  std::size_t rows = 0;
  std::size_t cols = 0;

  double at(std::size_t i, std::size_t j) const { return fidelity[i * cols + j]; }
  double area_fraction(double level) const;
};

/// Throws std::invalid_argument for resolution < 16.
Heatmap heatmap(std::span<const StaticSegment> sequence, const HeatmapGrid& grid);

}  // namespace mdd::closedform
