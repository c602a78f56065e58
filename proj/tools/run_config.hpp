#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hnm/corpus.hpp"
#include "hnm/mining.hpp"
#include "hnm/mirrorgen.hpp"
#include "hnm/model.hpp"

namespace hnm::cli {

// Raised for configuration problems; the message starts with the field path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : std::runtime_error(path.empty() ? message : path + ": " + message), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct Paths {
  std::optional<std::filesystem::path> pool;
  std::optional<std::filesystem::path> holdout;
  std::optional<std::filesystem::path> holdout_ai;
  std::optional<std::filesystem::path> templates;
  std::optional<std::filesystem::path> tells;
};

struct EvalTargets {
  double target_fpr = 0.01;
  double threshold = 0.5;
};

struct ScalingTargets {
  std::vector<std::size_t> sizes = {500, 2000, 8000};
  std::size_t test_humans_per_domain = 400;
};

// Component seeds given explicitly in the file are not derived from `seed`.
struct ExplicitSeeds {
  bool split = false;
  bool mining = false;
  bool train = false;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t workers = 0;
  std::filesystem::path output_dir = "runs";
  std::string log_level = "info";
  Paths paths;
  corpus::SplitSpec split{0, 0.2, true};
  mining::MiningConfig mining;
  model::TrainConfig train;
  std::vector<mirrorgen::GeneratorSpec> generators;
  EvalTargets eval;
  ScalingTargets scaling;
  bool mirror_holdout = true;  // build holdout AI docs by mirroring the holdout
  ExplicitSeeds explicit_seeds;
};

// Parses YAML text; unknown keys and wrong types are errors with field paths.
// Relative paths are resolved against `base_dir`.
RunConfig parse_config(const std::string& yaml, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& file);

// Pushes the global seed into every seeded component that was not given its
// own seed, fills in default generators, and checks value ranges.
void finalize(RunConfig& cfg, bool seed_overridden);

// Checks that the named paths are set and exist.
void require_paths(const RunConfig& cfg, const std::vector<std::string>& fields);

// Fully resolved configuration as written into each run directory.
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace hnm::cli
