#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hnm/corpus.hpp"
#include "hnm/mirrorgen.hpp"
#include "hnm/model.hpp"
#include "hnm/rational.hpp"

namespace hnm::eval {

class EvalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Counts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const Counts&, const Counts&) = default;
};

// Ratios are absent when their denominator is zero.
struct Metrics {
  Counts counts;
  std::optional<Rational> accuracy;
  std::optional<Rational> fpr;
  std::optional<Rational> fnr;

  static Metrics from_counts(const Counts& c);
  friend bool operator==(const Metrics&, const Metrics&) = default;
};

struct EvalReport {
  Metrics overall;
  double threshold = 0.5;
  std::optional<double> calibration_target;
  std::map<std::string, Metrics> per_domain;
  std::map<std::string, Metrics> per_generator;  // AI documents only; recall = 1 - fnr

  std::optional<Rational> recall(const std::string& generator) const;
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// AI is predicted iff score > threshold.
EvalReport confusion(std::span<const double> scores, std::span<const Label> labels,
                     double threshold);

// Same, with per-domain and per-generator slices taken from the documents.
EvalReport evaluate(std::span<const double> scores, const Collection& docs, double threshold);

// k = floor(target * N) adjusted so k/N <= target exactly; returns the
// (k+1)-th largest score.
double calibrate_threshold(std::span<const double> human_scores, double target_fpr);

struct RecallAtFpr {
  double threshold = 0.0;
  double target_fpr = 0.0;
  Rational realized_fpr;
  std::map<std::string, Rational> recall;  // per generator
};

RecallAtFpr recall_at_fpr(std::span<const double> human_scores,
                          const std::map<std::string, std::vector<double>>& ai_scores,
                          double target_fpr = 0.01);

RecallAtFpr recall_at_fpr(const model::ClassifierModel& m, const Collection& humans,
                          const std::map<std::string, Collection>& ai_by_generator,
                          double target_fpr = 0.01);

// Groups AI documents by their generator field.
std::map<std::string, Collection> by_generator(const Collection& ai_docs);

struct DomainFprTable {
  double threshold = 0.5;
  std::map<std::string, Counts> counts;  // FP and TN only (all documents are human)
  std::map<std::string, Rational> fpr;
  Rational weighted_total;  // unweighted mean of per-domain FPRs
  std::vector<std::string> excluded;  // expected domains with no documents

  friend bool operator==(const DomainFprTable&, const DomainFprTable&) = default;
};

DomainFprTable domain_fpr_table(std::span<const double> scores, const Collection& holdout,
                                double threshold,
                                const std::vector<std::string>& expected_domains = {});
DomainFprTable domain_fpr_table(const model::ClassifierModel& m, const Collection& holdout,
                                double threshold,
                                const std::vector<std::string>& expected_domains = {});

// ---------------------------------------------------------------------------
// Report files

nlohmann::json to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);
std::string to_csv(const EvalReport& r);
EvalReport report_from_csv(const std::string& csv);
void write_report(const std::filesystem::path& dir, const EvalReport& r,
                  const std::optional<RecallAtFpr>& recall = std::nullopt);

nlohmann::json to_json(const DomainFprTable& t);
DomainFprTable domain_fpr_table_from_json(const nlohmann::json& j);
std::string to_csv(const DomainFprTable& t);
nlohmann::json to_json(const RecallAtFpr& r);

// ---------------------------------------------------------------------------
// Scaling experiment

struct ScalingPoint {
  std::size_t size_per_domain = 0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
  std::string checkpoint_id;
  int best_epoch = 0;
  std::size_t train_documents = 0;
};

struct ScalingCurve {
  std::vector<ScalingPoint> points;  // sizes strictly increasing
};

struct ScalingOptions {
  std::uint64_t seed = 1;
  std::size_t test_humans_per_domain = 400;
  mirrorgen::MirrorOptions mirror;
  model::FeatureConfig features;
  std::optional<std::filesystem::path> checkpoint_dir;  // saves size-<n>.bin when set
};

// For each size: sample that many humans per domain, mirror them, train, keep
// the validation-loss checkpoint, and score a fixed common test set.
ScalingCurve scaling_experiment(const Collection& pool, const std::vector<std::size_t>& sizes,
                                const mirrorgen::TemplateSet& templates,
                                const std::vector<mirrorgen::Generator*>& generators,
                                const model::TrainConfig& train_cfg, const ScalingOptions& opts);

std::string to_csv(const ScalingCurve& c);
ScalingCurve curve_from_csv(const std::string& csv);

}  // namespace hnm::eval
