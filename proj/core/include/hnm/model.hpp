#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hnm/corpus.hpp"

namespace hnm::model {

struct FeatureConfig {
  int hash_bits = 18;
  std::vector<int> ngram_sizes = {3, 4, 5};

  std::uint32_t dimension() const { return std::uint32_t{1} << hash_bits; }
  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

// Sparse character n-gram counts. Indices are strictly increasing.
struct FeatureVector {
  std::vector<std::uint32_t> index;
  std::vector<std::uint32_t> count;

  std::size_t nnz() const { return index.size(); }
  std::uint64_t total() const;
  double l2_norm() const;
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Bucket of an n-gram: FNV-1a 64 of its bytes, masked to hash_bits.
std::uint32_t bucket(std::string_view ngram, int hash_bits);

// Counts every character n-gram of the configured sizes. Expects normalized
// (ASCII) text, so characters and bytes coincide.
FeatureVector featurize(std::string_view text, const FeatureConfig& cfg = {});

struct TrainingMeta {
  std::uint64_t seed = 0;
  std::uint32_t rounds_seen = 0;
  friend bool operator==(const TrainingMeta&, const TrainingMeta&) = default;
};

// Linear model over L2-normalized n-gram counts with a logistic link:
// score = 1 / (1 + exp(-(bias + w . x / |x|))).
class ClassifierModel {
 public:
  ClassifierModel() : ClassifierModel(FeatureConfig{}) {}
  explicit ClassifierModel(FeatureConfig cfg);

  const FeatureConfig& features() const { return cfg_; }
  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& mutable_weights() { return weights_; }
  double bias() const { return bias_; }
  void set_bias(double b) { bias_ = b; }
  const TrainingMeta& meta() const { return meta_; }
  TrainingMeta& mutable_meta() { return meta_; }

  double linear(const FeatureVector& x) const;
  double score(const FeatureVector& x) const;
  double score(std::string_view normalized_text) const;

  void save(const std::filesystem::path& path) const;
  static ClassifierModel load(const std::filesystem::path& path);
  std::string serialize() const;
  static ClassifierModel deserialize(std::string_view bytes);

  friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;

 private:
  FeatureConfig cfg_;
  std::vector<double> weights_;
  double bias_ = 0.0;
  TrainingMeta meta_;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double logistic(double z);

double predict(const ClassifierModel& m, std::string_view normalized_text);
std::vector<double> predict_batch(const ClassifierModel& m, std::span<const std::string> texts);
std::vector<double> predict_batch(const ClassifierModel& m,
                                  std::span<const FeatureVector* const> features);

enum class LrSchedule { constant, inverse_time };

struct TrainConfig {
  double learning_rate = 0.5;
  LrSchedule schedule = LrSchedule::inverse_time;
  double lr_decay = 0.1;  // inverse_time: lr / (1 + decay * epoch)
  int max_epochs = 12;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  double validation_fraction = 0.1;
  int patience = 2;
  double l2 = 1e-5;
  bool class_weighting = true;
};

void validate(const TrainConfig& cfg);  // throws std::invalid_argument

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
};

struct TrainResult {
  ClassifierModel model;
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_validation_loss = 0.0;
};

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Seeded minibatch SGD on class-weighted logistic loss with L2. A stratified
// validation split is carved from the input; the returned model is the
// epoch checkpoint with the lowest validation loss.
TrainResult train(std::span<const FeatureVector* const> features, std::span<const Label> labels,
                  const TrainConfig& cfg, const FeatureConfig& fcfg = {});

// Convenience overload; document texts must already be normalized.
TrainResult train(const Collection& docs, const TrainConfig& cfg, const FeatureConfig& fcfg = {});

// Objective used by training, exposed for gradient checking:
//   L = sum_j c_j * logloss(y_j, score_j) / sum_j c_j + l2/2 * |w|^2
struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad_w;  // dense, size = dimension
  double grad_b = 0.0;
};

LossGradient loss_and_gradient(const ClassifierModel& m,
                               std::span<const FeatureVector* const> features,
                               std::span<const Label> labels, std::span<const double> example_weights,
                               double l2);

// Per-document feature memo keyed by id, shared across mining rounds.
class FeatureCache {
 public:
  explicit FeatureCache(FeatureConfig cfg = {}) : cfg_(std::move(cfg)) {}

  // Featurizes every document not yet cached (in parallel, order-stable).
  void ensure(const Collection& docs);
  // Pointers stay valid until clear(); the document must have been ensured.
  std::vector<const FeatureVector*> lookup(const Collection& docs) const;
  const FeatureVector& at(const std::string& id) const;
  std::size_t size() const { return map_.size(); }
  void clear() { map_.clear(); }
  const FeatureConfig& config() const { return cfg_; }

 private:
  FeatureConfig cfg_;
  std::unordered_map<std::string, std::unique_ptr<FeatureVector>> map_;
};

}  // namespace hnm::model
