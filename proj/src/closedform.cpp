#include "mdd/closedform.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mdd::closedform {

using schedule::kPi;

Unitary2 static_pulse_propagator(double phase, double area, const StaticErrors& e) {
  const double amp = 1.0 + e.eps2;
  // exp(-i (area/2) [...]) = pauli_expm with unit step and h = area * (...)
  const PauliCoeffs h{0.0, area * e.eps1_tilde, area * amp * std::cos(phase), area * amp * std::sin(phase)};
  return pauli_expm(h, 1.0);
}

Unitary2 sequence_propagator(std::span<const StaticSegment> segments, const StaticErrors& e) {
  Unitary2 u = Unitary2::identity();
  for (const auto& s : segments) {
    if (s.area < 0.0) throw std::invalid_argument("segment area must be >= 0");
    const Unitary2 step = s.is_gap ? pauli_expm(PauliCoeffs{0.0, s.area * e.eps1_tilde, 0.0, 0.0}, 1.0)
                                   : static_pulse_propagator(s.phase, s.area, e);
    u = compose(step, u);
  }
  return u;
}

std::vector<StaticSegment> pulse_layout(const schedule::PhaseProgram& program, std::size_t repeats, double gap_area,
                                        double pulse_area) {
  std::vector<StaticSegment> out;
  for (std::size_t r = 0; r < repeats; ++r) {
    for (double phi : program.phases) {
      out.push_back({pulse_area, phi, false});
      if (gap_area > 0.0) out.push_back({gap_area, phi, true});
    }
  }
  return out;
}

std::vector<PathPoint> bloch_path(std::span<const StaticSegment> segments, const StaticErrors& e,
                                  const Density2& rho0, std::size_t per_segment) {
  if (per_segment == 0) throw std::invalid_argument("bloch_path needs per_segment >= 1");
  std::vector<PathPoint> out{{0.0, bloch_vector(rho0)}};
  Unitary2 u = Unitary2::identity();
  double area = 0.0;
  for (const auto& s : segments) {
    if (s.area < 0.0) throw std::invalid_argument("segment area must be >= 0");
    const double frac = s.area / static_cast<double>(per_segment);
    const Unitary2 step = s.is_gap ? pauli_expm(PauliCoeffs{0.0, frac * e.eps1_tilde, 0.0, 0.0}, 1.0)
                                   : static_pulse_propagator(s.phase, frac, e);
    for (std::size_t k = 0; k < per_segment; ++k) {
      u = compose(step, u);
      area += frac;
      out.push_back({area, bloch_vector(evolve_density(rho0, u))});
    }
  }
  return out;
}

double fidelity_ccdd(double area, const StaticErrors& e) {
  const double amp = 1.0 + e.eps2;
  return (2.0 + std::cos(area * std::sqrt(e.eps1_tilde * e.eps1_tilde + amp * amp))) / 3.0;
}

double error_ccdd_mixed(double area, const StaticErrors& e) {
  const double a2 = area * area;
  const double e1 = e.eps1_tilde * e.eps1_tilde;
  return a2 * e1 * e1 / 24.0 + (1.0 / 3.0 + e1 / 4.0) * a2 * e1 * e.eps2 / 2.0 + (1.0 - e1) * a2 * e.eps2 * e.eps2 / 6.0;
}

double error_ur4(double eps1_tilde) {
  const double y2 = 1.0 + eps1_tilde * eps1_tilde;
  const double y = std::sqrt(y2);
  const double s = std::sin(kPi * y);
  return 4.0 / (3.0 * y2 * y2) * (y2 - 1.0) * s * s * (y2 + (y2 - 1.0) * std::cos(2.0 * kPi * y) + 1.0);
}

double error_ur4_approx(double eps1_tilde) { return 2.0 * kPi * kPi / 3.0 * std::pow(eps1_tilde, 6); }

double error_ur4_mixed(const StaticErrors& e) {
  const double e1 = e.eps1_tilde;
  const double e2 = e.eps2;
  const double pi2 = kPi * kPi;
  return 2.0 * pi2 / 3.0 * std::pow(e1, 6) + 8.0 * pi2 / 3.0 * std::pow(e1, 4) * e2 +
         8.0 * pi2 * (1.0 - 4.0 * e1 * e1) / 3.0 * e1 * e1 * e2 * e2;
}

double scaling_order(std::span<const StaticSegment> sequence, ErrorChannel channel, double lo, double hi,
                     std::size_t points) {
  if (points < 5) throw std::invalid_argument("scaling_order needs at least 5 points");
  if (!(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("scaling_order needs 0 < lo < hi");

  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < points; ++i) {
    const double err = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(points - 1));
    StaticErrors e;
    (channel == ErrorChannel::eps1 ? e.eps1_tilde : e.eps2) = err;
    const double infidelity = 1.0 - fidelity_axial(sequence_propagator(sequence, e));
    if (!(infidelity > 0.0)) {
      throw std::invalid_argument("scaling_order: infidelity vanishes at error " + std::to_string(err) +
                                  "; the sequence is insensitive to this channel");
    }
    xs.push_back(std::log(err));
    ys.push_back(std::log(infidelity));
  }
  const double n = static_cast<double>(points);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < points; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

HeatmapSequence heatmap_sequence(std::string_view name) {
  if (name == "cp4") return HeatmapSequence::cp4;
  if (name == "ur4") return HeatmapSequence::ur4;
  if (name == "cp10") return HeatmapSequence::cp10;
  if (name == "ur10") return HeatmapSequence::ur10;
  throw std::invalid_argument("unknown heatmap sequence '" + std::string(name) + "'; valid: cp4, ur4, cp10, ur10");
}

std::string_view to_string(HeatmapSequence s) {
  switch (s) {
    case HeatmapSequence::cp4: return "cp4";
    case HeatmapSequence::ur4: return "ur4";
    case HeatmapSequence::cp10: return "cp10";
    case HeatmapSequence::ur10: return "ur10";
  }
  return "?";
}

std::vector<StaticSegment> heatmap_layout(HeatmapSequence s) {
  using schedule::SequenceName;
  switch (s) {
    case HeatmapSequence::cp4:
      return pulse_layout(schedule::phase_program(SequenceName::CP), 2);
    case HeatmapSequence::ur4:
      return pulse_layout(schedule::phase_program(SequenceName::UR4));
    case HeatmapSequence::cp10:
      return pulse_layout(schedule::phase_program(SequenceName::CP), 5);
    case HeatmapSequence::ur10:
      return pulse_layout(schedule::phase_program(SequenceName::UR10));
  }
  throw std::invalid_argument("unknown heatmap sequence");
}

double Heatmap::area_fraction(double level) const {
  std::size_t count = 0;
  for (double f : fidelity) count += f >= level ? 1 : 0;
  return fidelity.empty() ? 0.0 : static_cast<double>(count) / static_cast<double>(fidelity.size());
}

Heatmap heatmap(std::span<const StaticSegment> sequence, const HeatmapGrid& grid) {
  if (grid.resolution < 16) throw std::invalid_argument("heatmap resolution must be >= 16");
  auto axis = [&](double lo, double hi) {
    std::vector<double> v(grid.resolution);
    for (std::size_t i = 0; i < grid.resolution; ++i) {
      v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid.resolution - 1);
    }
    return v;
  };
  Heatmap h;
  h.eps1_tilde = axis(grid.eps1_min, grid.eps1_max);
  h.eps2 = axis(grid.eps2_min, grid.eps2_max);
  h.rows = h.eps1_tilde.size();
  h.cols = h.eps2.size();
  h.fidelity.resize(h.rows * h.cols);
  h.above_067.resize(h.fidelity.size());
  h.above_095.resize(h.fidelity.size());
  for (std::size_t i = 0; i < h.rows; ++i) {
    for (std::size_t j = 0; j < h.cols; ++j) {
      const double f = fidelity_axial(sequence_propagator(sequence, StaticErrors{h.eps1_tilde[i], h.eps2[j]}));
      h.fidelity[i * h.cols + j] = f;
      h.above_067[i * h.cols + j] = f >= 0.67;
      h.above_095[i * h.cols + j] = f >= 0.95;
    }
  }
  return h;
}

}  // namespace mdd::closedform
