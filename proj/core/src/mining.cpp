#include "hnm/mining.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "hnm/hash.hpp"
#include "hnm/log.hpp"
#include "hnm/parallel.hpp"
#include "hnm/rng.hpp"

namespace hnm::mining {
namespace fs = std::filesystem;

std::string_view to_string(Metric m) {
  return m == Metric::validation_loss ? "validation_loss" : "holdout_weighted_fpr";
}

Metric parse_metric(std::string_view s) {
  if (s == "holdout_weighted_fpr") return Metric::holdout_weighted_fpr;
  if (s == "validation_loss") return Metric::validation_loss;
  throw std::invalid_argument("unknown improvement metric: " + std::string(s));
}

void validate(const MiningConfig& cfg) {
  if (cfg.n < 1) throw std::invalid_argument("n must be >= 1");
  if (cfg.m < 1) throw std::invalid_argument("m must be >= 1");
  if (cfg.per_domain_fp_cap < 1) throw std::invalid_argument("per_domain_fp_cap must be >= 1");
  if (!(cfg.fp_threshold > 0.0 && cfg.fp_threshold < 1.0)) {
    throw std::invalid_argument("fp_threshold must be in (0, 1)");
  }
  if (!(cfg.eval_threshold > 0.0 && cfg.eval_threshold < 1.0)) {
    throw std::invalid_argument("eval_threshold must be in (0, 1)");
  }
  if (!(cfg.target_fpr >= 0.0 && cfg.target_fpr < 1.0)) {
    throw std::invalid_argument("target_fpr must be in [0, 1)");
  }
  if (cfg.max_rounds < 0) throw std::invalid_argument("max_rounds must be >= 0");
  if (!(cfg.min_relative_improvement >= 0.0 && cfg.min_relative_improvement < 1.0)) {
    throw std::invalid_argument("min_relative_improvement must be in [0, 1)");
  }
  if (!(cfg.skip_budget >= 0.0 && cfg.skip_budget <= 1.0)) {
    throw std::invalid_argument("skip_budget must be in [0, 1]");
  }
}

nlohmann::json to_json(const MiningConfig& cfg) {
  return {{"n", cfg.n},
          {"m", cfg.m},
          {"per_domain_fp_cap", cfg.per_domain_fp_cap},
          {"min_domain_pool", cfg.effective_min_domain_pool()},
          {"fp_threshold", cfg.fp_threshold},
          {"eval_threshold", cfg.eval_threshold},
          {"target_fpr", cfg.target_fpr},
          {"metric", to_string(cfg.metric)},
          {"min_relative_improvement", cfg.min_relative_improvement},
          {"max_rounds", cfg.max_rounds},
          {"stratified", cfg.stratified},
          {"seed", cfg.seed},
          {"skip_budget", cfg.skip_budget},
          {"mirror", {{"min_words", cfg.mirror.min_words},
                      {"max_attempts", cfg.mirror.max_attempts},
                      {"fanout", cfg.mirror.fanout}}},
          {"features", {{"hash_bits", cfg.features.hash_bits},
                        {"ngram_sizes", cfg.features.ngram_sizes}}}};
}

namespace {

nlohmann::json opt_rational(const std::optional<Rational>& r) {
  return r ? nlohmann::json(r->str()) : nlohmann::json(nullptr);
}

std::optional<Rational> parse_opt_rational(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return Rational::parse(j.get<std::string>());
}

nlohmann::json train_json(const model::TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"schedule", c.schedule == model::LrSchedule::constant ? "constant" : "inverse_time"},
          {"lr_decay", c.lr_decay},
          {"max_epochs", c.max_epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"validation_fraction", c.validation_fraction},
          {"patience", c.patience},
          {"l2", c.l2},
          {"class_weighting", c.class_weighting}};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string ids_digest(const Collection& docs) {
  std::string all;
  for (const auto& d : docs) {
    all += d.id;
    all += '\n';
  }
  return hex64(fnv1a64(all));
}

void write_atomic(const fs::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw MiningError("cannot write " + tmp);
    out << content;
    if (!out) throw MiningError("write failed: " + tmp);
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MiningError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string join_lines(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) {
    out += id;
    out += '\n';
  }
  return out;
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

fs::path round_dir(const fs::path& ledger, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "round-%03d", i);
  return ledger / buf;
}

nlohmann::json metrics_json(const RoundMetrics& m) {
  nlohmann::json skipped = m.skipped_domains;
  return {{"holdout_fpr", eval::to_json(m.holdout_fpr)},
          {"holdout_fnr", opt_rational(m.holdout_fnr)},
          {"holdout_fnr_value", m.holdout_fnr ? nlohmann::json(m.holdout_fnr->value()) : nlohmann::json(nullptr)},
          {"validation_loss", m.validation_loss},
          {"best_epoch", m.best_epoch},
          {"calibrated_threshold", m.calibrated_threshold},
          {"recall_at_target", opt_rational(m.recall_at_target)},
          {"candidates", m.candidates},
          {"pool_false_positives", m.pool_false_positives},
          {"pool_fpr", opt_rational(m.pool_fpr)},
          {"skipped_domains", skipped}};
}

RoundMetrics metrics_from_json(const nlohmann::json& j) {
  RoundMetrics m;
  m.holdout_fpr = eval::domain_fpr_table_from_json(j.at("holdout_fpr"));
  m.holdout_fnr = parse_opt_rational(j.at("holdout_fnr"));
  m.validation_loss = j.at("validation_loss").get<double>();
  m.best_epoch = j.at("best_epoch").get<int>();
  m.calibrated_threshold = j.at("calibrated_threshold").get<double>();
  m.recall_at_target = parse_opt_rational(j.at("recall_at_target"));
  m.candidates = j.at("candidates").get<std::size_t>();
  m.pool_false_positives = j.at("pool_false_positives").get<std::size_t>();
  m.pool_fpr = parse_opt_rational(j.at("pool_fpr"));
  m.skipped_domains = j.at("skipped_domains").get<std::vector<std::string>>();
  return m;
}

}  // namespace

nlohmann::json to_json(const Round& r) {
  return {{"index", r.index},
          {"model_id", r.model_id},
          {"training_size", r.training_ids.size()},
          {"mined", r.mined},
          {"mined_count", r.mined_ids.size()},
          {"mirror_count", r.mirror_ids.size()},
          {"improved", r.improved},
          {"metrics", metrics_json(r.metrics)}};
}

Collection TrainingSet::all() const {
  Collection out = humans;
  out.insert(out.end(), mirrors.begin(), mirrors.end());
  return out;
}

namespace {

mirrorgen::BatchResult mirror_checked(const Collection& humans, const MiningConfig& cfg,
                                      std::uint64_t seed, const mirrorgen::TemplateSet& templates,
                                      const std::vector<mirrorgen::Generator*>& generators) {
  auto opts = cfg.mirror;
  opts.seed = seed;
  auto batch = mirrorgen::mirror_documents(humans, templates, generators, opts,
                                           cfg.mirror_concurrency);
  const auto requests = humans.size() * std::max<std::size_t>(opts.fanout, 1);
  if (requests > 0 &&
      static_cast<double>(batch.failed) > cfg.skip_budget * static_cast<double>(requests)) {
    throw MiningError("generator failed on " + std::to_string(batch.failed) + " of " +
                      std::to_string(requests) + " mirror requests");
  }
  return batch;
}

}  // namespace

TrainingSet init_training_set(const Collection& pool, const MiningConfig& cfg,
                              const mirrorgen::TemplateSet& templates,
                              const std::vector<mirrorgen::Generator*>& generators) {
  validate(cfg);
  if (generators.empty()) throw MiningError("no generators configured");
  std::map<std::string, std::vector<std::size_t>> by_domain;
  std::vector<std::size_t> all;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!pool[i].is_human()) continue;
    by_domain[pool[i].domain].push_back(i);
    all.push_back(i);
  }
  if (all.size() < cfg.n) {
    throw MiningError("insufficient pool: " + std::to_string(all.size()) + " humans for n=" +
                      std::to_string(cfg.n));
  }
  std::vector<std::size_t> chosen;
  if (cfg.stratified) {
    const std::size_t d = by_domain.size();
    std::size_t k = 0;
    for (auto& [domain, idx] : by_domain) {
      const std::size_t want = cfg.n / d + (k++ < cfg.n % d ? 1 : 0);
      if (idx.size() < want) {
        throw MiningError("insufficient pool in domain " + domain + ": " +
                          std::to_string(idx.size()) + " < " + std::to_string(want));
      }
      auto order = idx;
      Rng(derive_seed(cfg.seed, "init:" + domain)).shuffle(order);
      chosen.insert(chosen.end(), order.begin(), order.begin() + static_cast<long>(want));
    }
  } else {
    Rng(derive_seed(cfg.seed, "init")).shuffle(all);
    chosen.assign(all.begin(), all.begin() + static_cast<long>(cfg.n));
  }
  std::sort(chosen.begin(), chosen.end());
  TrainingSet t;
  for (auto i : chosen) t.humans.push_back(pool[i]);
  t.mirrors = mirror_checked(t.humans, cfg, derive_seed(cfg.seed, "init-mirrors"), templates,
                             generators)
                  .mirrors;
  log::info("mining.init", {{"humans", t.humans.size()}, {"mirrors", t.mirrors.size()}});
  return t;
}

FpSample sample_false_positives(std::span<const double> scores, const Collection& candidates,
                                const MiningConfig& cfg, std::uint64_t seed) {
  if (scores.size() != candidates.size()) throw MiningError("scores and candidates differ in length");
  FpSample out;
  out.candidates = candidates.size();
  std::map<std::string, std::size_t> per_domain;
  for (const auto& d : candidates) ++per_domain[d.domain];
  std::set<std::string> skipped;
  for (const auto& [d, n] : per_domain) {
    if (n < cfg.effective_min_domain_pool()) skipped.insert(d);
  }
  out.skipped_domains.assign(skipped.begin(), skipped.end());

  std::vector<std::size_t> fps;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (scores[i] > cfg.fp_threshold) {
      ++out.false_positives;
      if (!skipped.contains(candidates[i].domain)) fps.push_back(i);
    }
  }
  Rng(seed).shuffle(fps);
  std::map<std::string, std::size_t> taken;
  std::vector<std::size_t> picked;
  for (auto i : fps) {
    if (picked.size() >= cfg.m) break;
    auto& t = taken[candidates[i].domain];
    if (t >= cfg.per_domain_fp_cap) continue;
    ++t;
    picked.push_back(i);
  }
  std::sort(picked.begin(), picked.end());
  for (auto i : picked) out.mined.push_back(candidates[i]);
  return out;
}

FpSample mine_false_positives(const model::ClassifierModel& model, const Collection& candidates,
                              const MiningConfig& cfg, std::uint64_t seed) {
  std::vector<std::string> texts;
  texts.reserve(candidates.size());
  for (const auto& d : candidates) texts.push_back(d.text);
  const auto scores = model::predict_batch(model, texts);
  return sample_false_positives(scores, candidates, cfg, seed);
}

namespace {

class Engine {
 public:
  Engine(const MiningData& data, const MiningConfig& cfg, const mirrorgen::TemplateSet& templates,
         const std::vector<mirrorgen::Generator*>& generators, const model::TrainConfig& train_cfg,
         const RunOptions& opts)
      : data_(data),
        cfg_(cfg),
        templates_(templates),
        generators_(generators),
        train_cfg_(train_cfg),
        opts_(opts),
        cache_(cfg.features) {
    validate(cfg_);
    model::validate(train_cfg_);
    if (generators_.empty()) throw MiningError("no generators configured");
    if (data_.holdout.empty()) throw MiningError("mining needs a non-empty holdout");
    for (const auto& d : data_.holdout) {
      if (!d.is_human()) throw MiningError("holdout document " + d.id + " is not human");
      holdout_ids_.insert(d.id);
    }
    for (const auto& d : data_.train_pool) {
      if (holdout_ids_.contains(d.id)) {
        throw MiningError("document " + d.id + " is in both the pool and the holdout");
      }
      pool_index_.emplace(d.id, &d);
    }
    holdout_features_.resize(data_.holdout.size());
    parallel_for(data_.holdout.size(), [&](std::size_t i) {
      holdout_features_[i] = model::featurize(data_.holdout[i].text, cfg_.features);
    });
    holdout_ai_features_.resize(data_.holdout_ai.size());
    parallel_for(data_.holdout_ai.size(), [&](std::size_t i) {
      holdout_ai_features_[i] = model::featurize(data_.holdout_ai[i].text, cfg_.features);
    });
  }

  RunResult start() {
    prepare_ledger(false);
    auto t0 = init_training_set(data_.train_pool, cfg_, templates_, generators_);
    initial_mirrors_ = t0.mirrors;
    if (opts_.ledger_dir) {
      write_atomic(*opts_.ledger_dir / "initial_mirrors.jsonl", corpus::to_jsonl(t0.mirrors));
    }
    for (auto& d : t0.humans) add_training(d);
    for (auto& d : t0.mirrors) add_training(d);
    return loop(0, true);
  }

  RunResult resume() {
    if (!opts_.ledger_dir) throw MiningError("resume needs a ledger directory");
    const auto& dir = *opts_.ledger_dir;
    prepare_ledger(true);
    const auto state = nlohmann::json::parse(read_file(dir / "state.json"));
    std::unordered_map<std::string, Document> mirrors;
    for (auto& d : corpus::load(dir / "initial_mirrors.jsonl", corpus::Format::jsonl)) {
      mirrors.emplace(d.id, std::move(d));
    }
    const int completed = state.at("rounds").get<int>();
    if (completed == 0) throw MiningError("ledger has no completed round");
    for (int i = 0; i < completed; ++i) {
      const auto rd = round_dir(dir, i);
      auto j = nlohmann::json::parse(read_file(rd / "metrics.json"));
      Round r;
      r.index = j.at("index").get<int>();
      r.model_id = j.at("model_id").get<std::string>();
      r.mined = j.at("mined").get<bool>();
      r.improved = j.at("improved").get<bool>();
      r.metrics = metrics_from_json(j.at("metrics"));
      r.training_ids = split_lines(read_file(rd / "train_ids.txt"));
      if (r.mined) {
        r.mined_ids = split_lines(read_file(rd / "mined_ids.txt"));
        r.mirror_ids = split_lines(read_file(rd / "mirror_ids.txt"));
        for (auto& d : corpus::load(rd / "mirrors.jsonl", corpus::Format::jsonl)) {
          mirrors.emplace(d.id, std::move(d));
        }
      }
      rounds_.push_back(std::move(r));
    }
    best_ = state.at("best_round").get<int>();
    best_model_ = model::ClassifierModel::load(round_dir(dir, best_) / "model.bin");
    if (state.at("finished").get<bool>()) {
      RunResult res{rounds_, best_, best_model_, state.at("stop_reason").get<std::string>(), true};
      return res;
    }
    auto& last = rounds_.back();
    for (const auto& id : last.training_ids) {
      if (auto it = pool_index_.find(id); it != pool_index_.end()) {
        add_training(*it->second);
      } else if (auto m = mirrors.find(id); m != mirrors.end()) {
        add_training(m->second);
      } else {
        throw MiningError("ledger id " + id + " not found in the pool or persisted mirrors");
      }
    }
    log::info("mining.resume", {{"rounds", completed}, {"best_round", best_}});
    if (last.mined) {
      extend_from(last, mirrors);
      return loop(last.index + 1, true);
    }
    current_ = model::ClassifierModel::load(round_dir(dir, last.index) / "model.bin");
    rounds_.pop_back();
    pending_ = std::move(last);
    return loop(pending_->index, false);
  }

 private:
  void prepare_ledger(bool resuming) {
    if (!opts_.ledger_dir) return;
    const auto& dir = *opts_.ledger_dir;
    nlohmann::json manifest = {{"mining", to_json(cfg_)},
                               {"train", train_json(train_cfg_)},
                               {"data", {{"pool", data_.train_pool.size()},
                                         {"pool_ids", ids_digest(data_.train_pool)},
                                         {"holdout", data_.holdout.size()},
                                         {"holdout_ids", ids_digest(data_.holdout)},
                                         {"holdout_ai", data_.holdout_ai.size()}}}};
    if (resuming) {
      const auto stored = nlohmann::json::parse(read_file(dir / "config.json"));
      if (stored != manifest) {
        throw MiningError("ledger configuration differs from the current configuration");
      }
      return;
    }
    fs::create_directories(dir);
    write_atomic(dir / "config.json", manifest.dump(2) + "\n");
  }

  void add_training(const Document& d) {
    if (!training_id_set_.insert(d.id).second) {
      throw MiningError("duplicate training id " + d.id);
    }
    training_.push_back(d);
  }

  void extend_from(const Round& r, const std::unordered_map<std::string, Document>& mirrors) {
    for (const auto& id : r.mined_ids) add_training(*pool_index_.at(id));
    for (const auto& id : r.mirror_ids) add_training(mirrors.at(id));
  }

  void check_hygiene(const std::vector<std::string>& ids, const char* what, int round) const {
    for (const auto& id : ids) {
      if (holdout_ids_.contains(id)) {
        throw MiningError(std::string("holdout id ") + id + " appears in " + what + " of round " +
                          std::to_string(round));
      }
    }
  }

  void train_and_evaluate(int i) {
    cache_.ensure(training_);
    const auto feats = cache_.lookup(training_);
    std::vector<Label> labels(training_.size());
    for (std::size_t k = 0; k < training_.size(); ++k) labels[k] = training_[k].label;
    auto cfg = train_cfg_;
    cfg.seed = derive_seed(train_cfg_.seed, static_cast<std::uint64_t>(i));
    auto result = model::train(feats, labels, cfg, cfg_.features);
    result.model.mutable_meta().rounds_seen = static_cast<std::uint32_t>(i);
    current_ = std::move(result.model);

    Round r;
    r.index = i;
    for (const auto& d : training_) r.training_ids.push_back(d.id);
    check_hygiene(r.training_ids, "T", i);
    r.model_id = hex64(fnv1a64(current_.serialize()));
    r.metrics.validation_loss = result.best_validation_loss;
    r.metrics.best_epoch = result.best_epoch;

    std::vector<const model::FeatureVector*> hp(holdout_features_.size());
    for (std::size_t k = 0; k < hp.size(); ++k) hp[k] = &holdout_features_[k];
    const auto human_scores = model::predict_batch(current_, hp);
    r.metrics.holdout_fpr = eval::domain_fpr_table(human_scores, data_.holdout, cfg_.eval_threshold);
    r.metrics.calibrated_threshold = eval::calibrate_threshold(human_scores, cfg_.target_fpr);
    if (!holdout_ai_features_.empty()) {
      std::vector<const model::FeatureVector*> ap(holdout_ai_features_.size());
      for (std::size_t k = 0; k < ap.size(); ++k) ap[k] = &holdout_ai_features_[k];
      const auto ai_scores = model::predict_batch(current_, ap);
      const auto n = static_cast<std::int64_t>(ai_scores.size());
      const auto missed = std::count_if(ai_scores.begin(), ai_scores.end(),
                                        [&](double s) { return !(s > cfg_.eval_threshold); });
      const auto hit = std::count_if(ai_scores.begin(), ai_scores.end(), [&](double s) {
        return s > r.metrics.calibrated_threshold;
      });
      r.metrics.holdout_fnr = Rational(missed, n);
      r.metrics.recall_at_target = Rational(hit, n);
    }
    r.improved = rounds_.empty() || better(r.metrics, rounds_[static_cast<std::size_t>(best_)].metrics);
    if (r.improved) {
      best_ = i;
      best_model_ = current_;
    }
    log::info("mining.round", {{"round", i},
                               {"training_size", r.training_ids.size()},
                               {"weighted_fpr", r.metrics.holdout_fpr.weighted_total.value()},
                               {"fnr", r.metrics.holdout_fnr ? r.metrics.holdout_fnr->value() : -1.0},
                               {"validation_loss", r.metrics.validation_loss},
                               {"improved", r.improved}});
    pending_ = std::move(r);
    persist(*pending_, true);
  }

  bool better(const RoundMetrics& now, const RoundMetrics& best) const {
    const double delta = cfg_.min_relative_improvement;
    const bool loss_better = now.validation_loss < best.validation_loss * (1.0 - delta);
    if (cfg_.metric == Metric::validation_loss) return loss_better;
    const double a = now.holdout_fpr.weighted_total.value();
    const double b = best.holdout_fpr.weighted_total.value();
    if (a < b * (1.0 - delta)) return true;
    return a == b && loss_better;
  }

  // Returns false when the loop should stop; sets stop_reason_.
  bool mine(Round& r) {
    Collection candidates;
    for (const auto& d : data_.train_pool) {
      if (d.is_human() && !training_id_set_.contains(d.id)) candidates.push_back(d);
    }
    cache_.ensure(candidates);
    const auto cf = cache_.lookup(candidates);
    const auto scores = model::predict_batch(current_, cf);
    auto sample = sample_false_positives(
        scores, candidates, cfg_, derive_seed(cfg_.seed, "mine:" + std::to_string(r.index)));
    r.metrics.candidates = sample.candidates;
    r.metrics.pool_false_positives = sample.false_positives;
    if (sample.candidates > 0) {
      r.metrics.pool_fpr = Rational(static_cast<std::int64_t>(sample.false_positives),
                                    static_cast<std::int64_t>(sample.candidates));
    }
    r.metrics.skipped_domains = sample.skipped_domains;
    for (const auto& d : sample.mined) r.mined_ids.push_back(d.id);
    check_hygiene(r.mined_ids, "F", r.index);

    Collection mirrors;
    if (!sample.mined.empty()) {
      mirrors = mirror_checked(sample.mined, cfg_,
                               derive_seed(cfg_.seed, "round-mirrors:" + std::to_string(r.index)),
                               templates_, generators_)
                    .mirrors;
    }
    for (const auto& d : mirrors) r.mirror_ids.push_back(d.id);
    check_hygiene(r.mirror_ids, "S", r.index);
    r.mined = true;
    if (opts_.ledger_dir) {
      write_atomic(round_dir(*opts_.ledger_dir, r.index) / "mirrors.jsonl",
                   corpus::to_jsonl(mirrors));
    }
    persist(r, false);
    log::info("mining.mined", {{"round", r.index},
                               {"candidates", sample.candidates},
                               {"false_positives", sample.false_positives},
                               {"mined", r.mined_ids.size()},
                               {"mirrors", r.mirror_ids.size()}});
    if (sample.mined.empty()) return false;
    for (auto& d : sample.mined) add_training(d);
    for (auto& d : mirrors) add_training(d);
    return true;
  }

  void persist(const Round& r, bool with_model) {
    if (!opts_.ledger_dir) return;
    const auto rd = round_dir(*opts_.ledger_dir, r.index);
    fs::create_directories(rd);
    if (with_model) {
      write_atomic(rd / "model.bin", current_.serialize());
      write_atomic(rd / "train_ids.txt", join_lines(r.training_ids));
    }
    if (r.mined) {
      write_atomic(rd / "mined_ids.txt", join_lines(r.mined_ids));
      write_atomic(rd / "mirror_ids.txt", join_lines(r.mirror_ids));
    }
    write_atomic(rd / "metrics.json", to_json(r).dump(2) + "\n");
  }

  void write_state(bool finished) {
    if (!opts_.ledger_dir) return;
    nlohmann::json s = {{"rounds", rounds_.size()},
                        {"best_round", best_},
                        {"best_model_id", rounds_.at(static_cast<std::size_t>(best_)).model_id},
                        {"finished", finished},
                        {"stop_reason", stop_reason_}};
    write_atomic(*opts_.ledger_dir / "state.json", s.dump(2) + "\n");
  }

  RunResult loop(int i, bool need_training) {
    while (true) {
      if (need_training) train_and_evaluate(i);
      need_training = true;
      Round r = std::move(*pending_);
      pending_.reset();
      bool go = true;
      if (r.index > 0 && !r.improved) {
        stop_reason_ = "no improvement";
        go = false;
      } else if (r.index >= cfg_.max_rounds) {
        stop_reason_ = "max rounds";
        go = false;
      } else if (!mine(r)) {
        stop_reason_ = "no false positives";
        go = false;
      }
      rounds_.push_back(std::move(r));
      if (!go) break;
      write_state(false);
      if (opts_.stop_after_round && *opts_.stop_after_round == i) {
        return {rounds_, best_, best_model_, "stopped after round " + std::to_string(i), false};
      }
      ++i;
    }
    write_state(true);
    log::info("mining.done", {{"rounds", rounds_.size()}, {"best_round", best_},
                              {"reason", stop_reason_}});
    return {rounds_, best_, best_model_, stop_reason_, true};
  }

  const MiningData& data_;
  const MiningConfig& cfg_;
  const mirrorgen::TemplateSet& templates_;
  const std::vector<mirrorgen::Generator*>& generators_;
  const model::TrainConfig& train_cfg_;
  const RunOptions& opts_;

  model::FeatureCache cache_;
  std::unordered_set<std::string> holdout_ids_;
  std::unordered_map<std::string, const Document*> pool_index_;
  std::vector<model::FeatureVector> holdout_features_;
  std::vector<model::FeatureVector> holdout_ai_features_;
  Collection initial_mirrors_;
  Collection training_;
  std::unordered_set<std::string> training_id_set_;
  std::vector<Round> rounds_;
  std::optional<Round> pending_;
  model::ClassifierModel current_;
  model::ClassifierModel best_model_;
  int best_ = 0;
  std::string stop_reason_;
};

}  // namespace

RunResult run(const MiningData& data, const MiningConfig& cfg,
              const mirrorgen::TemplateSet& templates,
              const std::vector<mirrorgen::Generator*>& generators,
              const model::TrainConfig& train_cfg, const RunOptions& opts) {
  return Engine(data, cfg, templates, generators, train_cfg, opts).start();
}

RunResult resume(const MiningData& data, const MiningConfig& cfg,
                 const mirrorgen::TemplateSet& templates,
                 const std::vector<mirrorgen::Generator*>& generators,
                 const model::TrainConfig& train_cfg, const RunOptions& opts) {
  return Engine(data, cfg, templates, generators, train_cfg, opts).resume();
}

}  // namespace hnm::mining
