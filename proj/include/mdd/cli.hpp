#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

// Experiment runner behind the mdd_sim executable.
namespace mdd::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kPhysicsError = 3, kFitError = 4 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class KeyType { number, integer, text, boolean };

struct KeySpec {
  std::string name;
  KeyType type;
  std::string help;
};

const std::vector<std::string>& subcommands();

/// Keys accepted by a subcommand, in display order. Throws ConfigError for an
/// unknown subcommand.
std::vector<KeySpec> config_keys(std::string_view subcommand);

/// Converts a command-line string to the JSON type of `spec`.
nlohmann::json parse_value(const KeySpec& spec, const std::string& text);

/// Merges `file` and `overrides` (overrides win), rejects unknown keys and
/// mistyped values, and fills every remaining key with its default. The
/// result is the canonical config echoed in the manifest. A manifest may be
/// passed as `file`; its "config" member is used.
nlohmann::json resolve_config(std::string_view subcommand, const nlohmann::json& file,
                              const nlohmann::json& overrides = nlohmann::json::object());

/// Git blob object id: sha1("blob <len>\0" + content), lowercase hex.
std::string git_blob_sha1(std::string_view content);
std::string config_hash(const nlohmann::json& resolved);

struct RunOptions {
  std::filesystem::path out_dir = ".";
  bool svg = false;
  unsigned threads = 0;
};

struct RunResult {
  int exit_code = kOk;
  nlohmann::json manifest;
  std::vector<std::filesystem::path> files;
  std::string error;
};

/// Runs one experiment from a resolved config and writes its CSV, manifest
/// and optional SVG into opt.out_dir. Physics-precondition and fit failures
/// are reported through exit_code; config errors propagate as ConfigError.
RunResult run_experiment(std::string_view subcommand, const nlohmann::json& resolved, const RunOptions& opt);

/// Full command-line entry point.
int main(int argc, char** argv);

}  // namespace mdd::cli
