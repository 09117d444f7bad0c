#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mdd/cli.hpp"

using namespace mdd::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("mdd_cli_test_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MDD_SIM_EXE) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const json kSmallMdd = {{"protocol", "mdd"}, {"seed", 7u}, {"realizations", 4u}, {"total_time_us", 60.0},
                        {"sample_stride_us", 30.0}};

}  // namespace

TEST(Config, UnknownKeyListsValidKeys) {
  try {
    resolve_config("storage", json{{"omega_1", 2.0}});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("omega_1"), std::string::npos);
    EXPECT_NE(msg.find("omega1_MHz"), std::string::npos);
    EXPECT_NE(msg.find("tau_us"), std::string::npos);
  }
}

TEST(Config, TypeAndEnumChecks) {
  EXPECT_THROW(resolve_config("storage", json{{"realizations", -3}}), ConfigError);
  EXPECT_THROW(resolve_config("storage", json{{"dt_us", "small"}}), ConfigError);
  EXPECT_THROW(resolve_config("storage", json{{"protocol", "xyz"}}), ConfigError);
  EXPECT_THROW(resolve_config("storage", json{{"integrator", "euler"}}), ConfigError);
  EXPECT_THROW(resolve_config("nosuch", json::object()), ConfigError);
  EXPECT_THROW(resolve_config("storage", json::array()), ConfigError);
}

TEST(Config, DefaultsAndOverrides) {
  const auto ccdd = resolve_config("storage", json{{"protocol", "ccdd"}});
  EXPECT_EQ(ccdd["omega2_MHz"], 0.2);
  EXPECT_EQ(ccdd["total_time_us"], 600.0);
  const auto ideal = resolve_config("storage", json{{"protocol", "ccdd-ideal2"}});
  EXPECT_EQ(ideal["drive2_rel_err"], 0.0);
  const auto over = resolve_config("storage", json{{"protocol", "mdd"}, {"seed", 1u}}, json{{"seed", 9u}});
  EXPECT_EQ(over["seed"], 9u);
  EXPECT_EQ(resolve_config("sensing", json::object())["mode"], "pulsed");
}

TEST(Config, ParseValue) {
  EXPECT_EQ(parse_value({"x", KeyType::number, ""}, "2.5"), json(2.5));
  EXPECT_EQ(parse_value({"x", KeyType::integer, ""}, "12"), json(12u));
  EXPECT_EQ(parse_value({"x", KeyType::boolean, ""}, "true"), json(true));
  EXPECT_EQ(parse_value({"x", KeyType::text, ""}, "ur10"), json("ur10"));
  EXPECT_THROW(parse_value({"x", KeyType::number, ""}, "2.5us"), ConfigError);
  EXPECT_THROW(parse_value({"x", KeyType::integer, ""}, "-1"), ConfigError);
  EXPECT_THROW(parse_value({"x", KeyType::boolean, ""}, "maybe"), ConfigError);
}

TEST(Hash, GitBlobIds) {
  EXPECT_EQ(git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(Run, ManifestRoundTripKeepsHashAndBytes) {
  TempDir a, b;
  const auto resolved = resolve_config("storage", kSmallMdd);
  const auto r1 = run_experiment("storage", resolved, {a.path(), false, 1});
  ASSERT_EQ(r1.exit_code, kOk) << r1.error;
  for (const char* k : {"config", "config_hash", "master_seed", "realizations", "dt_us", "wall_time_s", "files"}) {
    EXPECT_TRUE(r1.manifest.contains(k)) << k;
  }
  const auto reloaded = json::parse(slurp(a.path() / "storage_mdd.manifest.json"));
  const auto again = resolve_config("storage", reloaded);
  EXPECT_EQ(config_hash(again), r1.manifest["config_hash"].get<std::string>());
  const auto r2 = run_experiment("storage", again, {b.path(), false, 1});
  ASSERT_EQ(r2.exit_code, kOk);
  EXPECT_EQ(slurp(a.path() / "storage_mdd.csv"), slurp(b.path() / "storage_mdd.csv"));
}

TEST(Run, SameSeedSameBytesAcrossThreadCounts) {
  TempDir a, b;
  const auto resolved = resolve_config("storage", kSmallMdd);
  ASSERT_EQ(run_experiment("storage", resolved, {a.path(), false, 1}).exit_code, kOk);
  ASSERT_EQ(run_experiment("storage", resolved, {b.path(), false, 4}).exit_code, kOk);
  const auto csv = slurp(a.path() / "storage_mdd.csv");
  EXPECT_EQ(csv, slurp(b.path() / "storage_mdd.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t_us,fidelity_mean,fidelity_stderr");
}

TEST(Run, HeatmapUr4RowIsOne) {
  TempDir d;
  const auto resolved = resolve_config("heatmap", json{{"sequence", "ur4"}, {"resolution", 21u}});
  const auto r = run_experiment("heatmap", resolved, {d.path(), true, 1});
  ASSERT_EQ(r.exit_code, kOk);
  EXPECT_TRUE(fs::exists(d.path() / "heatmap_ur4.svg"));
  EXPECT_TRUE(fs::exists(d.path() / "heatmap_ur4_contours.json"));
  std::istringstream is(slurp(d.path() / "heatmap_ur4.csv"));
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "eps1_tilde,eps2,fidelity");
  int zero_rows = 0;
  while (std::getline(is, line)) {
    double e1, e2, f;
    char c1, c2;
    std::istringstream ls(line);
    ls >> e1 >> c1 >> e2 >> c2 >> f;
    if (e1 == 0.0) {
      ++zero_rows;
      EXPECT_NEAR(f, 1.0, 1e-10) << line;
    }
  }
  EXPECT_EQ(zero_rows, 21);
}

TEST(Run, SensingCsvSchema) {
  TempDir d;
  const auto resolved = resolve_config(
      "sensing", json{{"mode", "pulsed"}, {"realizations", 2u}, {"total_time_us", 500.0}});
  const auto r = run_experiment("sensing", resolved, {d.path(), false, 1});
  ASSERT_EQ(r.exit_code, kOk) << r.error;
  const auto csv = slurp(d.path() / "sensing_pulsed.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "t_us,sigma_z_mean,sigma_z_stderr,ground_pop_corrected,theory_cos2_half_theta");
}

TEST(Run, PhysicsViolationsAreReported) {
  TempDir d;
  auto bad_pulse = resolve_config("storage", json{{"protocol", "mdd"}, {"pulse_T_us", 2.0}});
  const auto r = run_experiment("storage", bad_pulse, {d.path(), false, 1});
  EXPECT_EQ(r.exit_code, kPhysicsError);
  EXPECT_NE(r.error.find("Omega2*T = pi"), std::string::npos);

  auto off_resonance = resolve_config("sensing", json{{"mode", "pulsed"}, {"delta_MHz", 0.018}});
  const auto s = run_experiment("sensing", off_resonance, {d.path(), false, 1});
  EXPECT_EQ(s.exit_code, kPhysicsError);
  EXPECT_NE(s.error.find("Delta*(tau+T) = pi"), std::string::npos);

  auto ideal = resolve_config("storage", json{{"protocol", "ccdd-ideal2"}, {"drive2_rel_err", 0.01}});
  EXPECT_THROW(run_experiment("storage", ideal, {d.path(), false, 1}), ConfigError);
}

TEST(Executable, ExitCodes) {
  TempDir d;
  const std::string out = " --out " + d.path().string();
  EXPECT_EQ(run_cli("heatmap --sequence cp4 --resolution 16" + out), 0);
  EXPECT_TRUE(fs::exists(d.path() / "heatmap_cp4.manifest.json"));
  EXPECT_EQ(run_cli("storage --bogus-key 1" + out), 2);
  EXPECT_EQ(run_cli("storage --protocol nope" + out), 2);
  EXPECT_EQ(run_cli("storage --realizations many" + out), 2);
  EXPECT_EQ(run_cli("storage --protocol mdd --pulse-T-us 2" + out), 3);
  EXPECT_EQ(run_cli("sensing --mode pulsed --delta-MHz 0.018" + out), 3);
  // noiseless, signal-free sensing: a flat curve cannot be fitted
  EXPECT_EQ(run_cli("sensing --mode pulsed --g-MHz 0 --t2-star-us 1e9 --drive1-rel-err 0 --drive2-rel-err 0 "
                    "--realizations 2 --total-time-us 500" +
                    out),
            4);
  EXPECT_TRUE(fs::exists(d.path() / "sensing_pulsed.manifest.json"));
}

TEST(Executable, ConfigFileAndOverride) {
  TempDir d;
  const auto cfg = d.path() / "cfg.json";
  std::ofstream(cfg) << json{{"sequence", "ur10"}, {"resolution", 16u}}.dump();
  ASSERT_EQ(run_cli("heatmap --config " + cfg.string() + " --resolution 17 --out " + d.path().string()), 0);
  const auto m = json::parse(slurp(d.path() / "heatmap_ur10.manifest.json"));
  EXPECT_EQ(m["config"]["resolution"], 17u);
  EXPECT_EQ(m["config"]["sequence"], "ur10");
  EXPECT_EQ(run_cli("heatmap --config " + (d.path() / "missing.json").string()), 2);
}
