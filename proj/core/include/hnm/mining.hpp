#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hnm/corpus.hpp"
#include "hnm/evalharness.hpp"
#include "hnm/mirrorgen.hpp"
#include "hnm/model.hpp"
#include "hnm/rational.hpp"

namespace hnm::mining {

enum class Metric { holdout_weighted_fpr, validation_loss };

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view s);

struct MiningConfig {
  std::size_t n = 4000;               // initial human documents in T0
  std::size_t m = 400;                // false positives sampled per round
  std::size_t per_domain_fp_cap = 100;
  // Domains with fewer candidates than this are not mined; 0 means 2 * cap.
  std::size_t min_domain_pool = 0;
  double fp_threshold = 0.5;          // pool FP rule during mining
  double eval_threshold = 0.5;        // operating threshold for holdout FPR/FNR
  double target_fpr = 0.01;           // also reported: recall at this holdout FPR
  Metric metric = Metric::holdout_weighted_fpr;
  double min_relative_improvement = 0.05;
  int max_rounds = 3;
  bool stratified = true;
  std::uint64_t seed = 1;
  double skip_budget = 0.05;          // tolerated share of failed mirror requests
  std::size_t mirror_concurrency = 1;
  mirrorgen::MirrorOptions mirror;    // seed is overridden per use
  model::FeatureConfig features;

  std::size_t effective_min_domain_pool() const {
    return min_domain_pool == 0 ? 2 * per_domain_fp_cap : min_domain_pool;
  }
};

void validate(const MiningConfig& cfg);  // throws std::invalid_argument
nlohmann::json to_json(const MiningConfig& cfg);

class MiningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RoundMetrics {
  eval::DomainFprTable holdout_fpr;
  std::optional<Rational> holdout_fnr;  // absent without holdout AI documents
  double validation_loss = 0.0;
  int best_epoch = 0;
  double calibrated_threshold = 0.0;    // at target_fpr on holdout humans
  std::optional<Rational> recall_at_target;
  std::size_t candidates = 0;           // pool humans scored for mining
  std::size_t pool_false_positives = 0;
  std::optional<Rational> pool_fpr;     // observed on the candidate set
  std::vector<std::string> skipped_domains;
};

struct Round {
  int index = 0;
  std::vector<std::string> training_ids;  // T_i, in insertion order
  std::string model_id;                   // fnv1a64 hex of the serialized model
  std::vector<std::string> mined_ids;     // F_i
  std::vector<std::string> mirror_ids;    // S_i
  RoundMetrics metrics;
  bool improved = false;                  // better than the best earlier round
  bool mined = false;                     // F_i and S_i were produced
};

nlohmann::json to_json(const Round& r);

struct TrainingSet {
  Collection humans;
  Collection mirrors;

  Collection all() const;
};

// Samples n humans from the pool (split evenly across domains when
// stratified) and mirrors each of them.
TrainingSet init_training_set(const Collection& pool, const MiningConfig& cfg,
                              const mirrorgen::TemplateSet& templates,
                              const std::vector<mirrorgen::Generator*>& generators);

struct FpSample {
  Collection mined;  // in candidate order
  std::size_t candidates = 0;
  std::size_t false_positives = 0;
  std::vector<std::string> skipped_domains;
};

// Scores the candidates, keeps those above fp_threshold, and samples up to m
// of them uniformly subject to the per-domain cap.
FpSample mine_false_positives(const model::ClassifierModel& model, const Collection& candidates,
                              const MiningConfig& cfg, std::uint64_t seed);

// Same selection from precomputed scores aligned with `candidates`.
FpSample sample_false_positives(std::span<const double> scores, const Collection& candidates,
                                const MiningConfig& cfg, std::uint64_t seed);

struct MiningData {
  Collection train_pool;    // humans available for T0 and mining
  Collection holdout;       // humans never trained or mined on
  Collection holdout_ai;    // optional AI documents for holdout FNR
};

struct RunOptions {
  std::optional<std::filesystem::path> ledger_dir;
  // Return after this round is fully persisted, as if the process were killed.
  std::optional<int> stop_after_round;
};

struct RunResult {
  std::vector<Round> rounds;
  int best_round = 0;
  model::ClassifierModel best_model;
  std::string stop_reason;
  bool finished = false;
};

RunResult run(const MiningData& data, const MiningConfig& cfg,
              const mirrorgen::TemplateSet& templates,
              const std::vector<mirrorgen::Generator*>& generators,
              const model::TrainConfig& train_cfg, const RunOptions& opts = {});

// Continues a run from the rounds persisted in the ledger. The configuration
// must match the one recorded there.
RunResult resume(const MiningData& data, const MiningConfig& cfg,
                 const mirrorgen::TemplateSet& templates,
                 const std::vector<mirrorgen::Generator*>& generators,
                 const model::TrainConfig& train_cfg, const RunOptions& opts);

}  // namespace hnm::mining
