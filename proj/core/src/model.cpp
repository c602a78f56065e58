#include "hnm/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hnm/hash.hpp"
#include "hnm/parallel.hpp"
#include "hnm/rng.hpp"

namespace hnm::model {

static_assert(std::endian::native == std::endian::little,
              "model serialization assumes a little-endian host");

std::uint64_t FeatureVector::total() const {
  std::uint64_t t = 0;
  for (auto c : count) t += c;
  return t;
}

double FeatureVector::l2_norm() const {
  double s = 0.0;
  for (auto c : count) s += static_cast<double>(c) * static_cast<double>(c);
  return std::sqrt(s);
}

std::uint32_t bucket(std::string_view ngram, int hash_bits) {
  const std::uint64_t mask = (std::uint64_t{1} << hash_bits) - 1;
  return static_cast<std::uint32_t>(fnv1a64(ngram) & mask);
}

FeatureVector featurize(std::string_view text, const FeatureConfig& cfg) {
  std::vector<std::uint32_t> hashes;
  std::size_t expected = 0;
  for (int n : cfg.ngram_sizes) {
    if (text.size() >= static_cast<std::size_t>(n)) expected += text.size() - n + 1;
  }
  hashes.reserve(expected);
  for (int n : cfg.ngram_sizes) {
    const auto len = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + len <= text.size(); ++i) {
      hashes.push_back(bucket(text.substr(i, len), cfg.hash_bits));
    }
  }
  std::sort(hashes.begin(), hashes.end());
  FeatureVector fv;
  for (std::size_t i = 0; i < hashes.size();) {
    std::size_t j = i;
    while (j < hashes.size() && hashes[j] == hashes[i]) ++j;
    fv.index.push_back(hashes[i]);
    fv.count.push_back(static_cast<std::uint32_t>(j - i));
    i = j;
  }
  return fv;
}

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

// -[y log s + (1-y) log(1-s)] with s = logistic(z), computed without overflow.
double log_loss(double z, int y) { return std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - y * z; }

double inv_norm(const FeatureVector& x) {
  const double n = x.l2_norm();
  return n > 0 ? 1.0 / n : 0.0;
}

double dot(const std::vector<double>& w, const FeatureVector& x) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.index.size(); ++k) s += w[x.index[k]] * x.count[k];
  return s * inv_norm(x);
}

template <typename T>
void put(std::string& out, const T& v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(std::string_view& in) {
  if (in.size() < sizeof(T)) throw ModelFormatError("model file truncated");
  T v;
  std::memcpy(&v, in.data(), sizeof(T));
  in.remove_prefix(sizeof(T));
  return v;
}

constexpr char kMagic[8] = {'H', 'N', 'M', 'M', 'O', 'D', 'E', 'L'};

int to_y(Label l) { return l == Label::ai ? 1 : 0; }

struct EvalStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

EvalStats evaluate(const std::vector<double>& w, double b,
                   std::span<const FeatureVector* const> features, std::span<const Label> labels,
                   const std::vector<std::size_t>& idx, bool balanced) {
  if (idx.empty()) return {};
  std::size_t n_pos = 0;
  for (auto i : idx) n_pos += to_y(labels[i]);
  const std::size_t n_neg = idx.size() - n_pos;
  const double total = static_cast<double>(idx.size());
  const double w_pos = (balanced && n_pos > 0) ? total / (2.0 * n_pos) : 1.0;
  const double w_neg = (balanced && n_neg > 0) ? total / (2.0 * n_neg) : 1.0;
  std::vector<double> losses(idx.size());
  std::vector<char> correct(idx.size());
  parallel_for(idx.size(), [&](std::size_t k) {
    const auto i = idx[k];
    const double z = b + dot(w, *features[i]);
    const int y = to_y(labels[i]);
    losses[k] = (y ? w_pos : w_neg) * log_loss(z, y);
    correct[k] = ((z > 0) == (y == 1));
  });
  double loss = 0.0;
  double weight = 0.0;
  std::size_t ok = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    loss += losses[k];
    weight += to_y(labels[idx[k]]) ? w_pos : w_neg;
    ok += correct[k];
  }
  return {loss / weight, static_cast<double>(ok) / total};
}

}  // namespace

ClassifierModel::ClassifierModel(FeatureConfig cfg)
    : cfg_(std::move(cfg)), weights_(cfg_.dimension(), 0.0) {}

double ClassifierModel::linear(const FeatureVector& x) const { return bias_ + dot(weights_, x); }

double ClassifierModel::score(const FeatureVector& x) const { return logistic(linear(x)); }

double ClassifierModel::score(std::string_view text) const { return score(featurize(text, cfg_)); }

std::string ClassifierModel::serialize() const {
  std::string out;
  out.reserve(64 + weights_.size() * sizeof(double));
  out.append(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kModelFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg_.hash_bits));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg_.ngram_sizes.size()));
  for (int n : cfg_.ngram_sizes) put<std::uint32_t>(out, static_cast<std::uint32_t>(n));
  put<double>(out, bias_);
  put<std::uint64_t>(out, meta_.seed);
  put<std::uint32_t>(out, meta_.rounds_seen);
  put<std::uint64_t>(out, weights_.size());
  out.append(reinterpret_cast<const char*>(weights_.data()), weights_.size() * sizeof(double));
  return out;
}

ClassifierModel ClassifierModel::deserialize(std::string_view in) {
  if (in.size() < sizeof kMagic || std::memcmp(in.data(), kMagic, sizeof kMagic) != 0) {
    throw ModelFormatError("not a model file (bad magic)");
  }
  in.remove_prefix(sizeof kMagic);
  const auto version = take<std::uint32_t>(in);
  if (version != kModelFormatVersion) {
    throw ModelFormatError("model format version " + std::to_string(version) +
                           " unsupported (expected " + std::to_string(kModelFormatVersion) + ")");
  }
  FeatureConfig cfg;
  cfg.hash_bits = static_cast<int>(take<std::uint32_t>(in));
  if (cfg.hash_bits < 1 || cfg.hash_bits > 28) throw ModelFormatError("hash_bits out of range");
  const auto n_sizes = take<std::uint32_t>(in);
  if (n_sizes > 16) throw ModelFormatError("too many n-gram sizes");
  cfg.ngram_sizes.clear();
  for (std::uint32_t i = 0; i < n_sizes; ++i) {
    cfg.ngram_sizes.push_back(static_cast<int>(take<std::uint32_t>(in)));
  }
  ClassifierModel m(cfg);
  m.bias_ = take<double>(in);
  m.meta_.seed = take<std::uint64_t>(in);
  m.meta_.rounds_seen = take<std::uint32_t>(in);
  const auto n = take<std::uint64_t>(in);
  if (n != cfg.dimension()) throw ModelFormatError("weight count does not match hash_bits");
  if (in.size() != n * sizeof(double)) throw ModelFormatError("model file has wrong length");
  std::memcpy(m.weights_.data(), in.data(), n * sizeof(double));
  return m;
}

void ClassifierModel::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    const auto bytes = serialize();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

ClassifierModel ClassifierModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

double predict(const ClassifierModel& m, std::string_view text) { return m.score(text); }

std::vector<double> predict_batch(const ClassifierModel& m, std::span<const std::string> texts) {
  std::vector<double> out(texts.size());
  parallel_for(texts.size(), [&](std::size_t i) { out[i] = m.score(texts[i]); });
  return out;
}

std::vector<double> predict_batch(const ClassifierModel& m,
                                  std::span<const FeatureVector* const> features) {
  std::vector<double> out(features.size());
  parallel_for(features.size(), [&](std::size_t i) { out[i] = m.score(*features[i]); });
  return out;
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0)) {
    throw std::invalid_argument("validation_fraction must be in (0, 1)");
  }
  if (cfg.patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (cfg.max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (cfg.l2 < 0.0) throw std::invalid_argument("l2 must be >= 0");
}

LossGradient loss_and_gradient(const ClassifierModel& m,
                               std::span<const FeatureVector* const> features,
                               std::span<const Label> labels, std::span<const double> example_weights,
                               double l2) {
  LossGradient out;
  out.grad_w.assign(m.weights().size(), 0.0);
  double weight_sum = 0.0;
  for (std::size_t j = 0; j < features.size(); ++j) {
    const auto& x = *features[j];
    const double c = example_weights[j];
    const int y = to_y(labels[j]);
    const double z = m.linear(x);
    out.loss += c * log_loss(z, y);
    const double r = c * (logistic(z) - y);
    const double s = inv_norm(x);
    for (std::size_t k = 0; k < x.index.size(); ++k) out.grad_w[x.index[k]] += r * x.count[k] * s;
    out.grad_b += r;
    weight_sum += c;
  }
  out.loss /= weight_sum;
  out.grad_b /= weight_sum;
  double sq = 0.0;
  const auto& w = m.weights();
  for (std::size_t i = 0; i < w.size(); ++i) {
    out.grad_w[i] = out.grad_w[i] / weight_sum + l2 * w[i];
    sq += w[i] * w[i];
  }
  out.loss += 0.5 * l2 * sq;
  return out;
}

TrainResult train(std::span<const FeatureVector* const> features, std::span<const Label> labels,
                  const TrainConfig& cfg, const FeatureConfig& fcfg) {
  validate(cfg);
  if (features.size() != labels.size()) throw TrainError("features/labels length mismatch");
  std::vector<std::size_t> by_label[2];
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[to_y(labels[i])].push_back(i);
  if (by_label[0].empty() || by_label[1].empty()) {
    throw TrainError("training set must contain both human and ai documents");
  }

  // Stratified validation split.
  Rng split_rng(derive_seed(cfg.seed, "validation-split"));
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  for (auto& members : by_label) {
    auto order = members;
    split_rng.shuffle(order);
    std::size_t n_val = static_cast<std::size_t>(
        std::llround(cfg.validation_fraction * static_cast<double>(order.size())));
    if (n_val >= order.size()) n_val = order.size() - 1;
    val_idx.insert(val_idx.end(), order.begin(), order.begin() + static_cast<long>(n_val));
    train_idx.insert(train_idx.end(), order.begin() + static_cast<long>(n_val), order.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());

  std::size_t n_pos = 0;
  for (auto i : train_idx) n_pos += to_y(labels[i]);
  const std::size_t n_neg = train_idx.size() - n_pos;
  const double n_train = static_cast<double>(train_idx.size());
  const double class_w[2] = {
      cfg.class_weighting ? n_train / (2.0 * static_cast<double>(n_neg)) : 1.0,
      cfg.class_weighting ? n_train / (2.0 * static_cast<double>(n_pos)) : 1.0};

  const std::uint32_t dim = fcfg.dimension();
  std::vector<double> v(dim, 0.0);  // true weights are wscale * v
  double wscale = 1.0;
  double b = 0.0;
  std::vector<double> grad(dim, 0.0);
  std::vector<std::uint32_t> touched;
  std::vector<char> is_touched(dim, 0);
  std::vector<double> inv_norms(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) inv_norms[i] = inv_norm(*features[i]);

  TrainResult result{ClassifierModel(fcfg), {}, -1, 0.0};
  result.model.mutable_meta().seed = cfg.seed;
  std::vector<double> materialized(dim);
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = cfg.schedule == LrSchedule::constant
                          ? cfg.learning_rate
                          : cfg.learning_rate / (1.0 + cfg.lr_decay * epoch);
    auto order = train_idx;
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch) + 1));
    rng.shuffle(order);

    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      double gb = 0.0;
      double wsum = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto j = order[k];
        const auto& x = *features[j];
        const double s = inv_norms[j];
        double acc = 0.0;
        for (std::size_t t = 0; t < x.index.size(); ++t) acc += v[x.index[t]] * x.count[t];
        const double z = b + wscale * acc * s;
        if (!std::isfinite(z)) {
          throw TrainError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_no));
        }
        const int y = to_y(labels[j]);
        const double c = class_w[y];
        const double r = c * (logistic(z) - y);
        for (std::size_t t = 0; t < x.index.size(); ++t) {
          const auto i = x.index[t];
          if (!is_touched[i]) {
            is_touched[i] = 1;
            touched.push_back(i);
          }
          grad[i] += r * x.count[t] * s;
        }
        gb += r;
        wsum += c;
      }
      wscale *= (1.0 - lr * cfg.l2);
      const double step = lr / wsum / wscale;
      for (auto i : touched) {
        v[i] -= step * grad[i];
        grad[i] = 0.0;
        is_touched[i] = 0;
      }
      touched.clear();
      b -= lr * gb / wsum;
      if (!std::isfinite(b)) {
        throw TrainError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(batch_no));
      }
      if (wscale < 1e-6) {
        for (auto& x : v) x *= wscale;
        wscale = 1.0;
      }
    }

    for (std::uint32_t i = 0; i < dim; ++i) materialized[i] = v[i] * wscale;
    const auto tr = evaluate(materialized, b, features, labels, train_idx, cfg.class_weighting);
    const auto va = val_idx.empty()
                        ? tr
                        : evaluate(materialized, b, features, labels, val_idx, cfg.class_weighting);
    if (!std::isfinite(tr.loss) || !std::isfinite(va.loss)) {
      throw TrainError("non-finite loss at epoch " + std::to_string(epoch) + ", evaluation");
    }
    result.history.push_back({epoch, tr.loss, va.loss, tr.accuracy, va.accuracy});

    if (result.best_epoch < 0 || va.loss < result.best_validation_loss) {
      result.best_epoch = epoch;
      result.best_validation_loss = va.loss;
      result.model.mutable_weights() = materialized;
      result.model.set_bias(b);
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

TrainResult train(const Collection& docs, const TrainConfig& cfg, const FeatureConfig& fcfg) {
  std::vector<FeatureVector> feats(docs.size());
  parallel_for(docs.size(), [&](std::size_t i) { feats[i] = featurize(docs[i].text, fcfg); });
  std::vector<const FeatureVector*> ptrs(docs.size());
  std::vector<Label> labels(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    ptrs[i] = &feats[i];
    labels[i] = docs[i].label;
  }
  return train(ptrs, labels, cfg, fcfg);
}

void FeatureCache::ensure(const Collection& docs) {
  std::vector<const Document*> missing;
  std::unordered_map<std::string_view, char> queued;
  for (const auto& d : docs) {
    if (!map_.contains(d.id) && queued.emplace(d.id, 1).second) missing.push_back(&d);
  }
  std::vector<std::unique_ptr<FeatureVector>> computed(missing.size());
  parallel_for(missing.size(), [&](std::size_t i) {
    computed[i] = std::make_unique<FeatureVector>(featurize(missing[i]->text, cfg_));
  });
  for (std::size_t i = 0; i < missing.size(); ++i) {
    map_.emplace(missing[i]->id, std::move(computed[i]));
  }
}

std::vector<const FeatureVector*> FeatureCache::lookup(const Collection& docs) const {
  std::vector<const FeatureVector*> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(&at(d.id));
  return out;
}

const FeatureVector& FeatureCache::at(const std::string& id) const {
  auto it = map_.find(id);
  if (it == map_.end()) throw std::out_of_range("feature cache miss for " + id);
  return *it->second;
}

}  // namespace hnm::model
