#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mfmdeg/hawkdove.hpp"

namespace mfmdeg::cli {

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> names{"simulate", "ode",      "value",          "payoff-n",
                                              "solve",    "converge", "hawkdove-report"};
  return names;
}

/// Strategy as written in the config: a number (Hawk probability at level 2,
/// Dove elsewhere), a name (all-dove, all-hawk, dove1-hawk2) or an object
/// mapping state names to a Hawk probability or to {action: probability}.
using StrategySpec = nlohmann::json;

struct ExperimentConfig {
  std::string model;
  hawkdove::HawkDoveParams params;
  std::string command;
  std::optional<StrategySpec> field_strategy;
  std::optional<StrategySpec> tagged_strategy;
  std::optional<StrategySpec> init_strategy;
  /// Number (mass at level 2, rest at level 1), array over states, or {state: mass}.
  std::optional<nlohmann::json> m0;
  std::optional<std::string> s0;
  std::optional<long> n;  ///< empty means the limit
  std::vector<long> n_list;
  std::optional<double> horizon;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  long replications = 1000;
  double grid_delta = 0.05;
  double tolerance = 1e-6;
  double step = 1e-3;
  long record_every = 10;
  long record_stride = 0;
  std::vector<double> epsilons{0.01, 0.02, 0.05, 0.1};
  std::string objective = "equilibrium";
  int max_iters = 200;
  double damping = 0.5;
  bool pure_shortcut = false;
  bool events = false;
  std::string out = "out";
};

/// Strict JSON parse with defaults applied. Unknown keys and type mismatches
/// raise Error("config") naming the JSON path.
ExperimentConfig parse_config(std::string_view text);

/// Resolved config echo (every field, defaults included).
nlohmann::json to_json(const ExperimentConfig& config);

struct ManifestFile {
  std::string path;
  std::uintmax_t bytes = 0;
  std::string sha256;
};

struct RunManifest {
  nlohmann::json config;
  std::string command;
  std::string version;
  double wall_seconds = 0.0;
  std::vector<ManifestFile> files;
  nlohmann::json summary;
};

/// Runs config.command, writing outputs and manifest.json into config.out.
RunManifest run(const ExperimentConfig& config);

std::string sha256_file(const std::filesystem::path& path);

/// Recomputes every checksum listed in a manifest.json; returns the mismatching paths.
std::vector<std::string> verify_manifest(const std::filesystem::path& manifest_path);

/// `{"error":{"code":...,"message":...}}` on one line.
std::string error_line(const std::string& code, const std::string& message);

}  // namespace mfmdeg::cli
