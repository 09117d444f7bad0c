#include "mdd/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

#include <CLI11.hpp>

#include "mdd/analysis.hpp"
#include "mdd/closedform.hpp"
#include "mdd/errors.hpp"
#include "mdd/evolve.hpp"
#include "mdd/ounoise.hpp"
#include "mdd/schedule.hpp"
#include "mdd/svg.hpp"

namespace mdd::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

const std::vector<KeySpec>& noise_keys() {
  static const std::vector<KeySpec> keys = {
      {"t2_star_us", KeyType::number, "free-induction dephasing time T2*"},
      {"magnetic_tau_us", KeyType::number, "correlation time of the magnetic OU noise"},
      {"calibration", KeyType::text, "magnetic diffusion calibration: dimensional | literal"},
      {"drive1_rel_err", KeyType::number, "relative amplitude noise of the first drive"},
      {"drive2_rel_err", KeyType::number, "relative amplitude noise of the second drive"},
      {"drive_tau_us", KeyType::number, "correlation time of the drive noise"},
      {"noise_init", KeyType::text, "initial noise values: stationary | zero"},
  };
  return keys;
}

const std::vector<KeySpec>& run_keys() {
  static const std::vector<KeySpec> keys = {
      {"seed", KeyType::integer, "master seed"},
      {"realizations", KeyType::integer, "noise realizations"},
      {"dt_us", KeyType::number, "integration step"},
      {"noise_dt_us", KeyType::number, "noise grid step (0: same as dt)"},
      {"integrator", KeyType::text, "magnus4 | midpoint"},
      {"total_time_us", KeyType::number, "storage / sensing time"},
      {"sample_stride_us", KeyType::number, "spacing of output samples"},
  };
  return keys;
}

std::vector<KeySpec> concat(std::initializer_list<const std::vector<KeySpec>*> parts) {
  std::vector<KeySpec> out;
  for (const auto* p : parts) out.insert(out.end(), p->begin(), p->end());
  return out;
}

const std::map<std::string, std::vector<std::string>>& enum_values() {
  static const std::map<std::string, std::vector<std::string>> values = {
      {"calibration", {"dimensional", "literal"}},
      {"noise_init", {"stationary", "zero"}},
      {"integrator", {"magnus4", "midpoint"}},
      {"initial_state", {"x", "y", "z"}},
  };
  return values;
}

const std::map<std::string, std::vector<std::string>>& selector_values() {
  static const std::map<std::string, std::vector<std::string>> values = {
      {"storage", {"cdd", "ccdd", "ccdd-ideal2", "mdd"}},
      {"sensing", {"pulsed", "continuous"}},
      {"heatmap", {"cp4", "ur4", "cp10", "ur10"}},
  };
  return values;
}

const char* selector_key(std::string_view sub) {
  if (sub == "storage") return "protocol";
  if (sub == "sensing") return "mode";
  if (sub == "heatmap") return "sequence";
  return nullptr;
}

json noise_defaults() {
  return {{"t2_star_us", 3.0},       {"magnetic_tau_us", 25.0}, {"calibration", "dimensional"},
          {"drive1_rel_err", 0.005}, {"drive2_rel_err", 0.005}, {"drive_tau_us", 500.0},
          {"noise_init", "stationary"}};
}

json run_defaults(std::uint64_t realizations, double total, double stride) {
  return {{"seed", 1u},        {"realizations", realizations}, {"dt_us", 0.01},
          {"noise_dt_us", 0.0}, {"integrator", "magnus4"},      {"total_time_us", total},
          {"sample_stride_us", stride}};
}

json defaults_for(std::string_view sub, const std::string& sel) {
  json d = json::object();
  if (sub == "dephasing") {
    d.update(noise_defaults());
    d.update(run_defaults(500, 10.0, 0.1));
  } else if (sub == "storage") {
    d.update(noise_defaults());
    if (sel == "cdd") d.update(run_defaults(300, 100.0, 1.0));
    if (sel == "ccdd") d.update(run_defaults(300, 600.0, 10.0));
    if (sel == "ccdd-ideal2") d.update(run_defaults(300, 2000.0, 50.0));
    if (sel == "mdd") d.update(run_defaults(300, 6000.0, 150.0));
    if (sel == "ccdd-ideal2") d["drive2_rel_err"] = 0.0;
    d.update({{"protocol", sel},
              {"omega1_MHz", 2.0},
              {"omega2_MHz", sel == "cdd" ? 0.0 : 0.2},
              {"pulse_T_us", 2.5},
              {"tau_us", 0.5},
              {"phase_program", "ur10"}});
  } else if (sub == "sensing") {
    d.update(noise_defaults());
    const bool pulsed = sel == "pulsed";
    d.update(run_defaults(200, pulsed ? 3000.0 : 10000.0, pulsed ? 25.0 : 80.0));
    d.update({{"mode", sel},
              {"omega1_MHz", 2.0},
              {"omega2_MHz", pulsed ? 0.2 : 0.0625},
              {"tau_us", pulsed ? 22.5 : 0.0},
              {"phase_program", "ur10"},
              {"g_MHz", pulsed ? 0.00692 : 0.00246},
              {"delta_MHz", pulsed ? 0.02 : 0.0625},
              {"xi_rad", 0.0},
              {"align_first_period", false}});
  } else if (sub == "heatmap") {
    d = {{"sequence", sel},  {"eps1_min", -0.5}, {"eps1_max", 0.5},
         {"eps2_min", -0.5}, {"eps2_max", 0.5},  {"resolution", 101u}};
  } else if (sub == "trajectory") {
    d = {{"omega2_MHz", 0.5}, {"pulse_T_us", 1.0},          {"tau_us", 3.0},         {"eps1_tilde", 0.1},
         {"eps2", -0.1},      {"n_pulses", 8u},             {"samples_per_segment", 32u},
         {"initial_state", "z"}};
  } else if (sub == "validate-noise") {
    d.update(noise_defaults());
    d.update({{"seed", 1u}, {"n_samples", 1000000u}});
  }
  return d;
}

std::string join_names(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

bool is_nonneg_integer(const json& v) {
  if (v.is_number_unsigned()) return true;
  if (v.is_number_integer()) return v.get<std::int64_t>() >= 0;
  return false;
}

json normalize(const KeySpec& spec, const json& v) {
  switch (spec.type) {
    case KeyType::number:
      if (!v.is_number()) throw ConfigError("key '" + spec.name + "' must be a number");
      return v.get<double>();
    case KeyType::integer:
      if (!is_nonneg_integer(v)) throw ConfigError("key '" + spec.name + "' must be a non-negative integer");
      return v.get<std::uint64_t>();
    case KeyType::text:
      if (!v.is_string()) throw ConfigError("key '" + spec.name + "' must be a string");
      return v;
    case KeyType::boolean:
      if (!v.is_boolean()) throw ConfigError("key '" + spec.name + "' must be true or false");
      return v;
  }
  return v;
}

// ---- physics mapping ----

noise::NoiseConfig noise_from(const json& c) {
  noise::NoiseConfig n;
  n.t2_star = c.at("t2_star_us").get<double>();
  n.magnetic.tau_c = c.at("magnetic_tau_us").get<double>();
  n.calibration = c.at("calibration") == "literal" ? noise::MagneticCalibration::literal
                                                    : noise::MagneticCalibration::dimensional;
  const auto init = c.at("noise_init") == "zero" ? noise::InitMode::zero : noise::InitMode::stationary;
  n.magnetic.init = init;
  n.drive_init = init;
  n.drive1_rel_err = c.at("drive1_rel_err").get<double>();
  n.drive2_rel_err = c.at("drive2_rel_err").get<double>();
  n.drive_tau = c.at("drive_tau_us").get<double>();
  n.recalibrate();
  n.validate();
  return n;
}

evolve::RunConfig run_config_from(const json& c, schedule::DriveSchedule sched, unsigned threads) {
  evolve::RunConfig rc;
  rc.schedule = std::move(sched);
  rc.noise = noise_from(c);
  rc.dt = c.at("dt_us").get<double>();
  rc.noise_dt = c.at("noise_dt_us").get<double>();
  rc.realizations = c.at("realizations").get<std::size_t>();
  rc.master_seed = c.at("seed").get<std::uint64_t>();
  rc.threads = threads;
  rc.integrator = c.at("integrator") == "midpoint" ? evolve::Integrator::midpoint : evolve::Integrator::magnus4;
  const double total = std::min(c.at("total_time_us").get<double>(), rc.schedule.total_duration());
  rc.sample_times = evolve::strided_times(c.at("sample_stride_us").get<double>(), total, rc.dt);
  return rc;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

class Outputs {
 public:
  Outputs(const RunOptions& opt, std::string stem) : opt_(opt), stem_(std::move(stem)) {
    std::error_code ec;
    fs::create_directories(opt_.out_dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + opt_.out_dir.string() + ": " + ec.message());
  }

  void write(const std::string& suffix, const std::string& content) {
    const fs::path p = opt_.out_dir / (stem_ + suffix);
    std::ofstream os(p, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + p.string());
    os << content;
    files_.push_back(p);
  }

  void svg(const std::string& content) {
    if (opt_.svg) write(".svg", content);
  }

  const std::vector<fs::path>& files() const { return files_; }
  const std::string& stem() const { return stem_; }

 private:
  const RunOptions& opt_;
  std::string stem_;
  std::vector<fs::path> files_;
};

std::string curve_csv(const evolve::EnsembleCurve& c) {
  std::ostringstream os;
  os << "t_us,fidelity_mean,fidelity_stderr\n";
  for (std::size_t i = 0; i < c.times.size(); ++i) {
    os << fmt(c.times[i]) << ',' << fmt(c.mean[i]) << ',' << fmt(c.std_error[i]) << '\n';
  }
  return os.str();
}

json t2_json(const analysis::T2Result& r) {
  return {{"t2_us", r.t2},
          {"crossed", r.crossed},
          {"threshold", r.threshold},
          {"method", r.method == analysis::T2Method::fidelity_threshold ? "fidelity-threshold" : "population-envelope"}};
}

struct Work {
  json summary = json::object();
  json extra = json::object();  // merged into the manifest
  std::vector<std::string> warnings;
  int exit_code = kOk;
  std::string error;
};

Work run_fidelity(const json& c, const schedule::DriveSchedule& sched, Outputs& out, const RunOptions& opt,
                  const std::string& title) {
  Work w;
  auto rc = run_config_from(c, sched, opt.threads);
  w.warnings = sched.warnings;
  const auto curve = evolve::ensemble_fidelity(rc);
  out.write(".csv", curve_csv(curve));
  const auto t2 = analysis::t2_threshold(curve);
  w.summary["t2"] = t2_json(t2);
  w.summary["final_fidelity"] = curve.mean.back();
  w.extra["schedule"] = schedule::to_json(sched);
  svg::Axes axes{title, "t (us)", "fidelity", {analysis::kFidelityThreshold, analysis::kFidelityLimit}};
  out.svg(svg::line_plot({{"mean", curve.times, curve.mean, ""}}, axes));
  return w;
}

Work run_dephasing(const json& c, Outputs& out, const RunOptions& opt) {
  const auto sched = schedule::build_storage(schedule::StorageKind::cdd, 0.0, 0.0, 0.0, 0.0,
                                             schedule::phase_program(schedule::SequenceName::CP),
                                             c.at("total_time_us").get<double>());
  return run_fidelity(c, sched, out, opt, "pure dephasing");
}

Work run_storage(const json& c, Outputs& out, const RunOptions& opt) {
  const std::string protocol = c.at("protocol");
  const double omega1 = kTwoPi * c.at("omega1_MHz").get<double>();
  const double omega2 = kTwoPi * c.at("omega2_MHz").get<double>();
  const double total = c.at("total_time_us").get<double>();
  const auto program = schedule::phase_program(c.at("phase_program").get<std::string>());
  schedule::DriveSchedule sched;
  if (protocol == "cdd") {
    sched = schedule::build_storage(schedule::StorageKind::cdd, omega1, omega2, 0.0, 0.0, program, total);
  } else if (protocol == "ccdd" || protocol == "ccdd-ideal2") {
    if (protocol == "ccdd-ideal2" && c.at("drive2_rel_err").get<double>() != 0.0) {
      throw ConfigError("protocol ccdd-ideal2 requires drive2_rel_err = 0");
    }
    sched = schedule::build_storage(schedule::StorageKind::ccdd, omega1, omega2, 0.0, 0.0, program, total);
  } else {
    sched = schedule::build_storage(schedule::StorageKind::mdd, omega1, omega2, c.at("pulse_T_us").get<double>(),
                                    c.at("tau_us").get<double>(), program, total);
  }
  return run_fidelity(c, sched, out, opt, "storage: " + protocol);
}

Work run_sensing(const json& c, Outputs& out, const RunOptions& opt) {
  const bool pulsed = c.at("mode") == "pulsed";
  const double omega1 = kTwoPi * c.at("omega1_MHz").get<double>();
  const double omega2 = kTwoPi * c.at("omega2_MHz").get<double>();
  const schedule::SignalParams sig{kTwoPi * c.at("g_MHz").get<double>(), kTwoPi * c.at("delta_MHz").get<double>(),
                                   c.at("xi_rad").get<double>()};
  const auto program = schedule::phase_program(c.at("phase_program").get<std::string>());
  auto built = schedule::build_sensing(pulsed ? schedule::SensingKind::pulsed : schedule::SensingKind::continuous,
                                       omega1, omega2, c.at("tau_us").get<double>(), program, sig,
                                       c.at("total_time_us").get<double>());

  Work w;
  json alignment = json::object();
  try {
    const auto a = schedule::validate_phase_alignment(built.drive, sig);
    alignment = {{"aligned", a.aligned}, {"residual_rad", a.residual}};
  } catch (const std::invalid_argument& e) {
    alignment = {{"error", e.what()}};
  }
  if (c.at("align_first_period").get<bool>()) {
    built.drive = schedule::align_first_period(built.drive, sig);
    const auto a = schedule::validate_phase_alignment(built.drive, sig);
    alignment["after_alignment"] = {{"aligned", a.aligned}, {"residual_rad", a.residual}};
  }

  auto rc = run_config_from(c, built.drive, opt.threads);
  rc.signal = built.signal;
  w.warnings = built.drive.warnings;
  const auto curves = evolve::ensemble_sensing(rc);
  const auto kind = pulsed ? analysis::SensingKind::pulsed : analysis::SensingKind::continuous;

  std::vector<double> theory;
  std::ostringstream os;
  os << "t_us,sigma_z_mean,sigma_z_stderr,ground_pop_corrected,theory_cos2_half_theta\n";
  for (std::size_t i = 0; i < curves.sigma_z.times.size(); ++i) {
    const double t = curves.sigma_z.times[i];
    const double c2 = std::pow(std::cos(0.5 * analysis::theoretical_theta(kind, sig.g, sig.delta, t)), 2);
    theory.push_back(c2);
    os << fmt(t) << ',' << fmt(curves.sigma_z.mean[i]) << ',' << fmt(curves.sigma_z.std_error[i]) << ','
       << fmt(curves.ground_pop.mean[i]) << ',' << fmt(c2) << '\n';
  }
  out.write(".csv", os.str());
  svg::Axes axes{"sensing: " + c.at("mode").get<std::string>(), "t (us)", "ground population", {0.68}};
  out.svg(svg::line_plot({{"corrected", curves.ground_pop.times, curves.ground_pop.mean, ""},
                          {"ideal cos^2(theta/2)", curves.ground_pop.times, theory, "#999999"}},
                         axes));

  const double expected = pulsed ? 2.0 / std::numbers::pi * sig.g : 0.5 * sig.g;
  w.summary["phase_alignment"] = alignment;
  w.summary["expected_angular_frequency_rad_per_us"] = expected;
  w.extra["schedule"] = schedule::to_json(built.drive);
  try {
    const auto fit = analysis::fit_damped_cosine(curves.sigma_z);
    const auto t2 = analysis::sensing_t2(curves.sigma_z, fit);
    w.summary["fit"] = {{"angular_frequency_rad_per_us", fit.angular_frequency},
                        {"amplitude", fit.amplitude},
                        {"decay_time_us", std::isfinite(fit.decay_time) ? json(fit.decay_time) : json(nullptr)},
                        {"phase_rad", fit.phase},
                        {"offset", fit.offset},
                        {"residual_rms", fit.residual_rms},
                        {"relative_frequency_error", fit.angular_frequency / expected - 1.0}};
    w.summary["t2"] = t2_json(t2);
  } catch (const analysis::FitFailed& e) {
    w.exit_code = kFitError;
    w.error = e.what();
    json spectrum = json::array();
    for (const auto& p : e.spectrum()) spectrum.push_back({p.omega, p.power});
    w.summary["fit_error"] = e.what();
    w.summary["spectrum"] = spectrum;
  }
  return w;
}

Work run_heatmap(const json& c, Outputs& out) {
  const auto seq = closedform::heatmap_sequence(c.at("sequence").get<std::string>());
  const auto layout = closedform::heatmap_layout(seq);
  closedform::HeatmapGrid grid{c.at("eps1_min").get<double>(), c.at("eps1_max").get<double>(),
                               c.at("eps2_min").get<double>(), c.at("eps2_max").get<double>(),
                               c.at("resolution").get<std::size_t>()};
  const auto h = closedform::heatmap(layout, grid);

  std::ostringstream os;
  os << "eps1_tilde,eps2,fidelity\n";
  for (std::size_t i = 0; i < h.rows; ++i) {
    for (std::size_t j = 0; j < h.cols; ++j) os << fmt(h.eps1_tilde[i]) << ',' << fmt(h.eps2[j]) << ',' << fmt(h.at(i, j)) << '\n';
  }
  out.write(".csv", os.str());

  json levels = json::array();
  for (double level : {0.67, 0.95}) {
    json rows = json::array();
    for (std::size_t i = 0; i < h.rows; ++i) {
      double lo = std::numeric_limits<double>::quiet_NaN(), hi = lo;
      for (std::size_t j = 0; j < h.cols; ++j) {
        if (h.at(i, j) >= level) {
          if (std::isnan(lo)) lo = h.eps2[j];
          hi = h.eps2[j];
        }
      }
      if (!std::isnan(lo)) rows.push_back({{"eps1_tilde", h.eps1_tilde[i]}, {"eps2_min", lo}, {"eps2_max", hi}});
    }
    levels.push_back({{"level", level}, {"area_fraction", h.area_fraction(level)}, {"rows", rows}});
  }
  json contours = {{"sequence", c.at("sequence")}, {"levels", levels}};
  out.write("_contours.json", contours.dump(2) + "\n");
  svg::Axes axes{"fidelity: " + c.at("sequence").get<std::string>(), "eps2", "eps1_tilde", {}};
  out.svg(svg::heat_plot(h.fidelity, h.rows, h.cols, grid.eps2_min, grid.eps2_max, grid.eps1_min, grid.eps1_max, axes));

  Work w;
  w.summary = {{"area_fraction_067", h.area_fraction(0.67)},
               {"area_fraction_095", h.area_fraction(0.95)},
               {"pulses", layout.size()}};
  return w;
}

Work run_trajectory(const json& c, Outputs& out) {
  const double omega2 = kTwoPi * c.at("omega2_MHz").get<double>();
  const double T = c.at("pulse_T_us").get<double>();
  const double tau = c.at("tau_us").get<double>();
  if (!(omega2 > 0.0)) throw ConfigError("omega2_MHz must be > 0");
  if (std::abs(omega2 * T - std::numbers::pi) > 1e-9) {
    std::ostringstream msg;
    msg << "pi-pulse condition Omega2*T = pi violated: Omega2*T = " << omega2 * T << " rad";
    throw PhysicsError(msg.str());
  }
  const auto n_pulses = c.at("n_pulses").get<std::size_t>();
  if (n_pulses == 0 || n_pulses % 4 != 0) throw ConfigError("n_pulses must be a positive multiple of 4");
  const closedform::StaticErrors e{c.at("eps1_tilde").get<double>(), c.at("eps2").get<double>()};
  const std::string init = c.at("initial_state");
  const Density2 rho0 = init == "x" ? rho_x() : init == "y" ? rho_y() : rho_z();
  const auto per = c.at("samples_per_segment").get<std::size_t>();

  struct Layout {
    std::string name;
    std::vector<closedform::StaticSegment> segments;
  };
  const double gap_area = omega2 * tau;
  const std::vector<Layout> layouts = {
      {"CP", closedform::pulse_layout(schedule::phase_program(schedule::SequenceName::CP), n_pulses / 2, gap_area)},
      {"UR4", closedform::pulse_layout(schedule::phase_program(schedule::SequenceName::UR4), n_pulses / 4, gap_area)}};

  std::ostringstream os;
  os << "sequence,area_rad,t_us,x,y,z\n";
  Work w;
  json layout_json = json::array();
  std::vector<svg::Series> series;
  for (const auto& l : layouts) {
    const auto path = closedform::bloch_path(l.segments, e, rho0, per);
    svg::Series s{l.name, {}, {}, ""};
    for (const auto& p : path) {
      os << l.name << ',' << fmt(p.area) << ',' << fmt(p.area / omega2) << ',' << fmt(p.r.x) << ',' << fmt(p.r.y)
         << ',' << fmt(p.r.z) << '\n';
      s.x.push_back(p.area / omega2);
      s.y.push_back(p.r.z);
    }
    series.push_back(std::move(s));
    const auto u = closedform::sequence_propagator(l.segments, e);
    json segs = json::array();
    for (const auto& seg : l.segments) {
      segs.push_back({{"kind", seg.is_gap ? "gap" : "pulse"}, {"dur_us", seg.area / omega2}, {"phase_rad", seg.phase}});
    }
    layout_json.push_back({{"sequence", l.name}, {"segments", segs}});
    const auto& last = path.back().r;
    w.summary[l.name] = {{"fidelity", fidelity_axial(u)},
                         {"final_bloch", {last.x, last.y, last.z}},
                         {"duration_us", path.back().area / omega2}};
  }
  out.write(".csv", os.str());
  out.svg(svg::line_plot(series, {"Bloch z component", "t (us)", "z", {}}));
  w.extra["layouts"] = layout_json;
  return w;
}

Work run_validate_noise(const json& c, Outputs& out) {
  const auto cfg = noise_from(c);
  const auto n = c.at("n_samples").get<std::size_t>();
  if (n < 1000) throw ConfigError("n_samples must be >= 1000");
  const auto seed = c.at("seed").get<std::uint64_t>();

  struct Row {
    std::string quantity;
    double empirical, expected, stderr_, tol;
    bool ok;
  };
  std::vector<Row> rows;
  struct Proc {
    const char* name;
    noise::OUParams p;
    std::uint64_t id;
  };
  const std::vector<Proc> procs = {{"delta", cfg.magnetic, noise::kDelta},
                                   {"eps1", cfg.drive1(), noise::kEps1},
                                   {"eps2", cfg.drive2(), noise::kEps2}};
  for (const auto& pr : procs) {
    const double sd = noise::stationary_std(pr.p);
    if (sd == 0.0) continue;
    // nearly independent draws: step of ten correlation times
    noise::Rng rng(noise::stream_seed(seed, pr.id, 1));
    auto p = pr.p;
    p.init = noise::InitMode::stationary;
    const auto wide = noise::ou_path(p, n, 10.0 * p.tau_c, rng);
    double ss = 0.0;
    for (double v : wide) ss += v * v;
    const double emp = std::sqrt(ss / static_cast<double>(n));
    rows.push_back({std::string(pr.name) + "_std", emp, sd, sd / std::sqrt(2.0 * static_cast<double>(n)), 0.02,
                    std::abs(emp / sd - 1.0) < 0.02});

    // autocorrelation on a grid of tau_c / 20
    const double dt = p.tau_c / 20.0;
    noise::Rng rng2(noise::stream_seed(seed, pr.id, 2));
    const auto path = noise::ou_path(p, n, dt, rng2);
    const double phi = std::exp(-dt / p.tau_c);
    for (double lag_tau : {0.2, 1.0, 2.0}) {
      const auto k = static_cast<std::size_t>(std::lround(lag_tau / (dt / p.tau_c)));
      const double emp_r = noise::autocorrelation(path, k);
      const double exp_r = std::exp(-static_cast<double>(k) * dt / p.tau_c);
      const double se = noise::ar1_autocorr_stderr(phi, k, n);
      rows.push_back({std::string(pr.name) + "_autocorr_lag_" + fmt(static_cast<double>(k) * dt) + "us", emp_r,
                      exp_r, se, 3.0 * se, std::abs(emp_r - exp_r) < 3.0 * se});
    }
  }

  std::ostringstream os;
  os << "quantity,empirical,expected,stderr,ok\n";
  bool all_ok = true;
  json checks = json::array();
  for (const auto& r : rows) {
    os << r.quantity << ',' << fmt(r.empirical) << ',' << fmt(r.expected) << ',' << fmt(r.stderr_) << ','
       << (r.ok ? "true" : "false") << '\n';
    all_ok = all_ok && r.ok;
    checks.push_back({{"quantity", r.quantity}, {"empirical", r.empirical}, {"expected", r.expected}, {"ok", r.ok}});
  }
  out.write(".csv", os.str());
  Work w;
  w.summary = {{"all_ok", all_ok}, {"checks", checks}, {"magnetic_diffusion", cfg.magnetic.diffusion}};
  return w;
}

std::string subcommand_help(std::string_view name) {
  if (name == "dephasing") return "free-induction decay without drives";
  if (name == "storage") return "fidelity decay under cdd, ccdd or mdd";
  if (name == "sensing") return "AC-signal sensing with pulsed or continuous mdd";
  if (name == "heatmap") return "static-error fidelity map of a phased pulse sequence";
  if (name == "trajectory") return "Bloch-vector path through CP and UR4 sequences";
  if (name == "validate-noise") return "statistical checks of the OU noise generators";
  return {};
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"dephasing", "storage",    "sensing",
                                                 "heatmap",   "trajectory", "validate-noise"};
  return names;
}

std::vector<KeySpec> config_keys(std::string_view sub) {
  static const std::vector<KeySpec> storage = {
      {"protocol", KeyType::text, "cdd | ccdd | ccdd-ideal2 | mdd"},
      {"omega1_MHz", KeyType::number, "first-drive Rabi frequency"},
      {"omega2_MHz", KeyType::number, "second-drive Rabi frequency"},
      {"pulse_T_us", KeyType::number, "pi-pulse duration (mdd)"},
      {"tau_us", KeyType::number, "pulse separation (mdd)"},
      {"phase_program", KeyType::text, "cp | cpmg | xy4 | xy8 | ur4 | ur10 (mdd)"},
  };
  static const std::vector<KeySpec> sensing = {
      {"mode", KeyType::text, "pulsed | continuous"},
      {"omega1_MHz", KeyType::number, "first-drive Rabi frequency"},
      {"omega2_MHz", KeyType::number, "second-drive Rabi frequency"},
      {"tau_us", KeyType::number, "pulse separation"},
      {"phase_program", KeyType::text, "cp | cpmg | xy4 | xy8 | ur4 | ur10"},
      {"g_MHz", KeyType::number, "signal Rabi frequency"},
      {"delta_MHz", KeyType::number, "signal detuning"},
      {"xi_rad", KeyType::number, "signal phase"},
      {"align_first_period", KeyType::boolean, "shorten the first pulse so the signal phase is aligned"},
  };
  static const std::vector<KeySpec> heatmap = {
      {"sequence", KeyType::text, "cp4 | ur4 | cp10 | ur10"},
      {"eps1_min", KeyType::number, "lower eps1_tilde"},
      {"eps1_max", KeyType::number, "upper eps1_tilde"},
      {"eps2_min", KeyType::number, "lower eps2"},
      {"eps2_max", KeyType::number, "upper eps2"},
      {"resolution", KeyType::integer, "grid points per axis"},
  };
  static const std::vector<KeySpec> trajectory = {
      {"omega2_MHz", KeyType::number, "second-drive Rabi frequency"},
      {"pulse_T_us", KeyType::number, "pi-pulse duration"},
      {"tau_us", KeyType::number, "pulse separation"},
      {"eps1_tilde", KeyType::number, "static first-drive error eps1*Omega1/Omega2"},
      {"eps2", KeyType::number, "static second-drive error"},
      {"n_pulses", KeyType::integer, "total pulses per sequence (multiple of 4)"},
      {"samples_per_segment", KeyType::integer, "path points per pulse or gap"},
      {"initial_state", KeyType::text, "x | y | z"},
  };
  static const std::vector<KeySpec> validate = {
      {"seed", KeyType::integer, "master seed"},
      {"n_samples", KeyType::integer, "samples per statistic"},
  };
  if (sub == "dephasing") return concat({&run_keys(), &noise_keys()});
  if (sub == "storage") return concat({&storage, &run_keys(), &noise_keys()});
  if (sub == "sensing") return concat({&sensing, &run_keys(), &noise_keys()});
  if (sub == "heatmap") return heatmap;
  if (sub == "trajectory") return trajectory;
  if (sub == "validate-noise") return concat({&validate, &noise_keys()});
  throw ConfigError("unknown subcommand '" + std::string(sub) + "'; valid: " + join_names(subcommands()));
}

json parse_value(const KeySpec& spec, const std::string& text) {
  try {
    std::size_t pos = 0;
    switch (spec.type) {
      case KeyType::number: {
        const double v = std::stod(text, &pos);
        if (pos != text.size()) break;
        return v;
      }
      case KeyType::integer: {
        if (!text.empty() && text[0] == '-') break;
        const auto v = std::stoull(text, &pos);
        if (pos != text.size()) break;
        return static_cast<std::uint64_t>(v);
      }
      case KeyType::text:
        return text;
      case KeyType::boolean:
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        break;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("invalid value '" + text + "' for key '" + spec.name + "'");
}

json resolve_config(std::string_view sub, const json& file, const json& overrides) {
  const auto keys = config_keys(sub);
  json merged = json::object();
  if (!file.is_null()) {
    if (!file.is_object()) throw ConfigError("config must be a JSON object");
    if (file.contains("manifest_version")) {
      if (file.value("subcommand", "") != sub) throw ConfigError("manifest was written by a different subcommand");
      merged = file.at("config");
    } else {
      merged = file;
    }
  }
  if (!overrides.is_object()) throw ConfigError("overrides must be a JSON object");
  merged.update(overrides);

  std::map<std::string, const KeySpec*> by_name;
  std::vector<std::string> names;
  for (const auto& k : keys) {
    by_name[k.name] = &k;
    names.push_back(k.name);
  }
  json typed = json::object();
  for (const auto& [k, v] : merged.items()) {
    const auto it = by_name.find(k);
    if (it == by_name.end()) {
      throw ConfigError("unknown key '" + k + "' for " + std::string(sub) + "; valid keys: " + join_names(names));
    }
    typed[k] = normalize(*it->second, v);
  }

  std::string selector;
  if (const char* sk = selector_key(sub)) {
    const auto& allowed = selector_values().at(std::string(sub));
    static const std::map<std::string, std::string> fallback = {
        {"storage", "mdd"}, {"sensing", "pulsed"}, {"heatmap", "ur4"}};
    selector = typed.contains(sk) ? typed[sk].get<std::string>() : fallback.at(std::string(sub));
    if (std::find(allowed.begin(), allowed.end(), selector) == allowed.end()) {
      throw ConfigError("invalid " + std::string(sk) + " '" + selector + "'; valid: " + join_names(allowed));
    }
  }
  json resolved = defaults_for(sub, selector);
  resolved.update(typed);
  for (const auto& [k, allowed] : enum_values()) {
    if (!resolved.contains(k)) continue;
    const auto v = resolved[k].get<std::string>();
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      throw ConfigError("invalid " + k + " '" + v + "'; valid: " + join_names(allowed));
    }
  }
  return resolved;
}

std::string git_blob_sha1(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw std::runtime_error("EVP_MD_CTX_new failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, md, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("sha1 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

std::string config_hash(const json& resolved) { return git_blob_sha1(resolved.dump()); }

RunResult run_experiment(std::string_view sub, const json& resolved, const RunOptions& opt) {
  std::string stem(sub);
  if (const char* sk = selector_key(sub)) stem += "_" + resolved.at(sk).get<std::string>();
  std::replace(stem.begin(), stem.end(), '-', '_');
  Outputs out(opt, stem);

  RunResult result;
  const auto start = std::chrono::steady_clock::now();
  Work w;
  try {
    if (sub == "dephasing") w = run_dephasing(resolved, out, opt);
    else if (sub == "storage") w = run_storage(resolved, out, opt);
    else if (sub == "sensing") w = run_sensing(resolved, out, opt);
    else if (sub == "heatmap") w = run_heatmap(resolved, out);
    else if (sub == "trajectory") w = run_trajectory(resolved, out);
    else if (sub == "validate-noise") w = run_validate_noise(resolved, out);
    else throw ConfigError("unknown subcommand '" + std::string(sub) + "'");
  } catch (const PhysicsError& e) {
    result.exit_code = kPhysicsError;
    result.error = e.what();
    return result;
  } catch (const NotImplemented& e) {
    throw ConfigError(e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json manifest = {{"manifest_version", 1},
                   {"subcommand", sub},
                   {"config", resolved},
                   {"config_hash", config_hash(resolved)},
                   {"wall_time_s", wall},
                   {"threads", opt.threads},
                   {"warnings", w.warnings},
                   {"summary", w.summary}};
  if (resolved.contains("seed")) manifest["master_seed"] = resolved.at("seed");
  if (resolved.contains("realizations")) manifest["realizations"] = resolved.at("realizations");
  if (resolved.contains("dt_us")) manifest["dt_us"] = resolved.at("dt_us");
  for (const auto& [k, v] : w.extra.items()) manifest[k] = v;
  json files = json::array();
  for (const auto& f : out.files()) files.push_back(f.filename().string());
  const std::string manifest_name = stem + ".manifest.json";
  files.push_back(manifest_name);
  manifest["files"] = files;
  out.write(".manifest.json", manifest.dump(2) + "\n");

  result.exit_code = w.exit_code;
  result.error = w.error;
  result.manifest = std::move(manifest);
  result.files = out.files();
  return result;
}

namespace {

std::string flag_name(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed dynamical decoupling simulator"};
  app.require_subcommand(1);

  struct SubState {
    std::string config_path;
    std::string out_dir = ".";
    bool svg = false;
    unsigned threads = 0;
    std::map<std::string, std::string> values;
    std::vector<KeySpec> keys;
  };
  std::map<std::string, SubState> states;
  std::map<std::string, CLI::App*> apps;
  for (const auto& name : subcommands()) {
    auto& st = states[name];
    st.keys = config_keys(name);
    CLI::App* sc = app.add_subcommand(name, subcommand_help(name));
    apps[name] = sc;
    sc->add_option("--config", st.config_path, "flat JSON config or a previous manifest");
    sc->add_option("--out", st.out_dir, "output directory");
    sc->add_flag("--svg", st.svg, "also write an SVG plot");
    sc->add_option("--threads", st.threads, "worker threads (0: all cores)");
    for (const auto& k : st.keys) sc->add_option(flag_name(k.name), st.values[k.name], k.help);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  for (const auto& name : subcommands()) {
    if (!apps[name]->parsed()) continue;
    auto& st = states[name];
    try {
      json overrides = json::object();
      for (const auto& k : st.keys) {
        if (apps[name]->count(flag_name(k.name)) > 0) overrides[k.name] = parse_value(k, st.values[k.name]);
      }
      const json file = st.config_path.empty() ? json(nullptr) : read_json_file(st.config_path);
      const json resolved = resolve_config(name, file, overrides);
      const auto r = run_experiment(name, resolved, RunOptions{st.out_dir, st.svg, st.threads});
      if (r.exit_code != kOk) {
        std::cerr << "error: " << r.error << '\n';
        return r.exit_code;
      }
      std::cout << r.manifest.at("summary").dump(2) << '\n';
      for (const auto& w : r.manifest.at("warnings")) std::cerr << "warning: " << w.get<std::string>() << '\n';
      return kOk;
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return kConfigError;
    }
  }
  return kConfigError;
}

}  // namespace mdd::cli
