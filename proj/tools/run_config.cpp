#include "run_config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hnm/log.hpp"
#include "hnm/rng.hpp"

namespace hnm::cli {
namespace fs = std::filesystem;
namespace {

// Thin cursor over a YAML mapping that remembers its field path.
class Section {
 public:
  Section(YAML::Node node, std::string path, std::set<std::string> allowed)
      : node_(std::move(node)), path_(std::move(path)), allowed_(std::move(allowed)) {
    if (!node_.IsMap()) throw ConfigError(path_, "expected a mapping");
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!allowed_.contains(key)) throw ConfigError(field(key), "unknown field");
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return static_cast<bool>(node_[key]); }
  YAML::Node raw(const std::string& key) const { return node_[key]; }

  template <typename T>
  void get(const std::string& key, T& out, const char* type_name) const {
    const auto n = node_[key];
    if (!n) return;
    if (!n.IsScalar()) throw ConfigError(field(key), std::string("expected ") + type_name);
    try {
      out = n.as<T>();
    } catch (const YAML::BadConversion&) {
      throw ConfigError(field(key), std::string("expected ") + type_name + ", got '" +
                                        n.Scalar() + "'");
    }
  }

  void number(const std::string& key, double& out) const { get(key, out, "a number"); }
  void boolean(const std::string& key, bool& out) const { get(key, out, "true or false"); }
  void text(const std::string& key, std::string& out) const { get(key, out, "a string"); }

  template <typename T>
  void integer(const std::string& key, T& out) const {
    const auto n = node_[key];
    if (!n) return;
    long long v = 0;
    get(key, v, "an integer");
    if (std::is_unsigned_v<T> && v < 0) throw ConfigError(field(key), "must not be negative");
    out = static_cast<T>(v);
  }

  void seed(const std::string& key, std::uint64_t& out, bool& given) const {
    if (!has(key)) return;
    get(key, out, "an unsigned integer");
    given = true;
  }

  void path(const std::string& key, std::optional<fs::path>& out, const fs::path& base) const {
    std::string s;
    text(key, s);
    if (!has(key)) return;
    if (s.empty()) throw ConfigError(field(key), "empty path");
    fs::path p(s);
    out = p.is_relative() && !base.empty() ? base / p : p;
  }

  template <typename T>
  void list(const std::string& key, std::vector<T>& out, const char* type_name) const {
    const auto n = node_[key];
    if (!n) return;
    if (!n.IsSequence()) throw ConfigError(field(key), "expected a list");
    out.clear();
    for (std::size_t i = 0; i < n.size(); ++i) {
      try {
        out.push_back(n[i].as<T>());
      } catch (const YAML::BadConversion&) {
        throw ConfigError(field(key) + "[" + std::to_string(i) + "]",
                          std::string("expected ") + type_name);
      }
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> allowed_;
};

std::optional<Section> section(const Section& parent, const std::string& key,
                               std::set<std::string> allowed) {
  if (!parent.has(key)) return std::nullopt;
  return Section(parent.raw(key), parent.field(key), std::move(allowed));
}

mirrorgen::GeneratorSpec parse_generator(const YAML::Node& node, const std::string& path,
                                         const fs::path& base) {
  Section s(node, path,
            {"name", "endpoint", "adapter", "path", "model", "api_key_env", "temperature",
             "max_tokens", "max_in_flight", "retry_budget", "backoff_ms", "timeout_s", "seed",
             "audit_log", "simulacrum"});
  mirrorgen::GeneratorSpec g;
  s.text("name", g.name);
  s.text("endpoint", g.endpoint);
  s.text("adapter", g.adapter);
  s.text("path", g.path);
  s.text("model", g.model);
  s.text("api_key_env", g.api_key_env);
  s.number("temperature", g.temperature);
  s.integer("max_tokens", g.max_tokens);
  s.integer("max_in_flight", g.max_in_flight);
  s.integer("retry_budget", g.retry_budget);
  s.integer("backoff_ms", g.backoff_ms);
  s.integer("timeout_s", g.timeout_s);
  if (s.has("seed")) {
    std::uint64_t v = 0;
    bool given = false;
    s.seed("seed", v, given);
    g.seed = v;
  }
  s.path("audit_log", g.audit_log, base);
  if (auto sim = section(s, "simulacrum", {"tell_rate", "synonym_rate", "length_jitter",
                                            "sentence_spread", "preamble_rate", "tells"})) {
    sim->number("tell_rate", g.simulacrum.tell_rate);
    sim->number("synonym_rate", g.simulacrum.synonym_rate);
    sim->number("length_jitter", g.simulacrum.length_jitter);
    sim->integer("sentence_spread", g.simulacrum.sentence_spread);
    sim->number("preamble_rate", g.simulacrum.preamble_rate);
    sim->list("tells", g.simulacrum.tells, "a string");
  }
  return g;
}

template <typename F>
void checked(const std::string& path, F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

}  // namespace

RunConfig parse_config(const std::string& yaml, const fs::path& base) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml);
  } catch (const YAML::Exception& e) {
    throw ConfigError("", std::string("malformed config: ") + e.what());
  }
  RunConfig cfg;
  auto& seeds = cfg.explicit_seeds;
  if (!root || root.IsNull()) return cfg;
  Section top(root, "",
              {"seed", "workers", "output_dir", "log_level", "paths", "split", "mining", "train",
               "features", "mirror", "generators", "eval", "scaling"});
  top.get("seed", cfg.seed, "an unsigned integer");
  top.integer("workers", cfg.workers);
  if (top.has("output_dir")) {
    std::optional<fs::path> p;
    top.path("output_dir", p, base);
    cfg.output_dir = *p;
  }
  top.text("log_level", cfg.log_level);

  if (auto p = section(top, "paths", {"pool", "holdout", "holdout_ai", "templates", "tells"})) {
    p->path("pool", cfg.paths.pool, base);
    p->path("holdout", cfg.paths.holdout, base);
    p->path("holdout_ai", cfg.paths.holdout_ai, base);
    p->path("templates", cfg.paths.templates, base);
    p->path("tells", cfg.paths.tells, base);
  }
  if (auto s = section(top, "split", {"seed", "holdout_fraction", "per_domain"})) {
    s->seed("seed", cfg.split.seed, seeds.split);
    s->number("holdout_fraction", cfg.split.holdout_fraction);
    s->boolean("per_domain", cfg.split.per_domain);
  }
  if (auto s = section(top, "mining",
                       {"n", "m", "per_domain_fp_cap", "min_domain_pool", "fp_threshold",
                        "eval_threshold", "target_fpr", "metric", "min_relative_improvement",
                        "max_rounds", "stratified", "seed", "skip_budget", "mirror_concurrency",
                        "mirror_holdout"})) {
    auto& m = cfg.mining;
    s->integer("n", m.n);
    s->integer("m", m.m);
    s->integer("per_domain_fp_cap", m.per_domain_fp_cap);
    s->integer("min_domain_pool", m.min_domain_pool);
    s->number("fp_threshold", m.fp_threshold);
    s->number("eval_threshold", m.eval_threshold);
    s->number("target_fpr", m.target_fpr);
    if (s->has("metric")) {
      std::string v;
      s->text("metric", v);
      checked(s->field("metric"), [&] { m.metric = mining::parse_metric(v); });
    }
    s->number("min_relative_improvement", m.min_relative_improvement);
    s->integer("max_rounds", m.max_rounds);
    s->boolean("stratified", m.stratified);
    s->seed("seed", m.seed, seeds.mining);
    s->number("skip_budget", m.skip_budget);
    s->integer("mirror_concurrency", m.mirror_concurrency);
    s->boolean("mirror_holdout", cfg.mirror_holdout);
  }
  if (auto s = section(top, "train",
                       {"learning_rate", "schedule", "lr_decay", "max_epochs", "batch_size", "seed",
                        "validation_fraction", "patience", "l2", "class_weighting"})) {
    auto& t = cfg.train;
    s->number("learning_rate", t.learning_rate);
    if (s->has("schedule")) {
      std::string v;
      s->text("schedule", v);
      if (v == "constant") {
        t.schedule = model::LrSchedule::constant;
      } else if (v == "inverse_time") {
        t.schedule = model::LrSchedule::inverse_time;
      } else {
        throw ConfigError(s->field("schedule"), "expected constant or inverse_time");
      }
    }
    s->number("lr_decay", t.lr_decay);
    s->integer("max_epochs", t.max_epochs);
    s->integer("batch_size", t.batch_size);
    s->seed("seed", t.seed, seeds.train);
    s->number("validation_fraction", t.validation_fraction);
    s->integer("patience", t.patience);
    s->number("l2", t.l2);
    s->boolean("class_weighting", t.class_weighting);
  }
  if (auto s = section(top, "features", {"hash_bits", "ngram_sizes"})) {
    s->integer("hash_bits", cfg.mining.features.hash_bits);
    s->list("ngram_sizes", cfg.mining.features.ngram_sizes, "an integer");
  }
  if (auto s = section(top, "mirror", {"min_words", "max_attempts", "fanout"})) {
    s->integer("min_words", cfg.mining.mirror.min_words);
    s->integer("max_attempts", cfg.mining.mirror.max_attempts);
    s->integer("fanout", cfg.mining.mirror.fanout);
  }
  if (top.has("generators")) {
    const auto list = top.raw("generators");
    if (!list.IsSequence()) throw ConfigError("generators", "expected a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      cfg.generators.push_back(
          parse_generator(list[i], "generators[" + std::to_string(i) + "]", base));
    }
  }
  if (auto s = section(top, "eval", {"target_fpr", "threshold"})) {
    s->number("target_fpr", cfg.eval.target_fpr);
    s->number("threshold", cfg.eval.threshold);
  }
  if (auto s = section(top, "scaling", {"sizes", "test_humans_per_domain"})) {
    s->list("sizes", cfg.scaling.sizes, "an unsigned integer");
    s->integer("test_humans_per_domain", cfg.scaling.test_humans_per_domain);
  }
  return cfg;
}

RunConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("", "cannot read config " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), file.parent_path());
}

void finalize(RunConfig& cfg, bool seed_overridden) {
  const bool keep = !seed_overridden;
  if (!(cfg.explicit_seeds.split && keep)) cfg.split.seed = derive_seed(cfg.seed, "split");
  if (!(cfg.explicit_seeds.mining && keep)) cfg.mining.seed = derive_seed(cfg.seed, "mining");
  if (!(cfg.explicit_seeds.train && keep)) cfg.train.seed = derive_seed(cfg.seed, "train");
  if (cfg.generators.empty()) cfg.generators.emplace_back();
  std::set<std::string> names;
  for (std::size_t i = 0; i < cfg.generators.size(); ++i) {
    auto& g = cfg.generators[i];
    const auto path = "generators[" + std::to_string(i) + "]";
    if (!names.insert(g.name).second) throw ConfigError(path + ".name", "duplicate generator name");
    if (g.offline() && (!g.seed || seed_overridden)) g.seed = derive_seed(cfg.seed, "generator:" + g.name);
    checked(path, [&] { mirrorgen::validate(g); });
  }
  checked("mining", [&] { mining::validate(cfg.mining); });
  checked("train", [&] { model::validate(cfg.train); });
  if (!(cfg.split.holdout_fraction >= 0.0 && cfg.split.holdout_fraction < 1.0)) {
    throw ConfigError("split.holdout_fraction", "must be in [0, 1)");
  }
  const auto& f = cfg.mining.features;
  if (f.hash_bits < 4 || f.hash_bits > 26) throw ConfigError("features.hash_bits", "must be in [4, 26]");
  if (f.ngram_sizes.empty()) throw ConfigError("features.ngram_sizes", "must not be empty");
  for (auto n : f.ngram_sizes) {
    if (n < 1 || n > 16) throw ConfigError("features.ngram_sizes", "sizes must be in [1, 16]");
  }
  if (cfg.mining.mirror.fanout < 1) throw ConfigError("mirror.fanout", "must be >= 1");
  if (cfg.mining.mirror.max_attempts < 1) throw ConfigError("mirror.max_attempts", "must be >= 1");
  if (!(cfg.eval.target_fpr >= 0.0 && cfg.eval.target_fpr < 1.0)) {
    throw ConfigError("eval.target_fpr", "must be in [0, 1)");
  }
  if (!(cfg.eval.threshold > 0.0 && cfg.eval.threshold < 1.0)) {
    throw ConfigError("eval.threshold", "must be in (0, 1)");
  }
  const auto& sizes = cfg.scaling.sizes;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0 || (i > 0 && sizes[i] <= sizes[i - 1])) {
      throw ConfigError("scaling.sizes", "must be positive and strictly increasing");
    }
  }
  try {
    (void)log::parse_level(cfg.log_level);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("log_level", e.what());
  }
}

void require_paths(const RunConfig& cfg, const std::vector<std::string>& fields) {
  const std::map<std::string, const std::optional<fs::path>*> known = {
      {"pool", &cfg.paths.pool},
      {"holdout", &cfg.paths.holdout},
      {"holdout_ai", &cfg.paths.holdout_ai},
      {"templates", &cfg.paths.templates},
      {"tells", &cfg.paths.tells}};
  for (const auto& f : fields) {
    const auto& p = *known.at(f);
    if (!p) throw ConfigError("paths." + f, "required for this command");
    if (!fs::exists(*p)) throw ConfigError("paths." + f, "does not exist: " + p->string());
  }
  for (const auto& [name, p] : known) {
    if (*p && !fs::exists(**p)) throw ConfigError("paths." + name, "does not exist: " + (*p)->string());
  }
}

nlohmann::json to_json(const RunConfig& cfg) {
  auto opt = [](const std::optional<fs::path>& p) {
    return p ? nlohmann::json(p->string()) : nlohmann::json(nullptr);
  };
  nlohmann::json gens = nlohmann::json::array();
  for (const auto& g : cfg.generators) {
    gens.push_back({{"name", g.name},
                    {"endpoint", g.endpoint},
                    {"adapter", g.adapter},
                    {"path", g.path},
                    {"model", g.model},
                    {"api_key_env", g.api_key_env},
                    {"temperature", g.temperature},
                    {"max_tokens", g.max_tokens},
                    {"max_in_flight", g.max_in_flight},
                    {"retry_budget", g.retry_budget},
                    {"backoff_ms", g.backoff_ms},
                    {"timeout_s", g.timeout_s},
                    {"seed", g.seed ? nlohmann::json(*g.seed) : nlohmann::json(nullptr)},
                    {"audit_log", opt(g.audit_log)},
                    {"simulacrum", {{"tell_rate", g.simulacrum.tell_rate},
                                    {"synonym_rate", g.simulacrum.synonym_rate},
                                    {"length_jitter", g.simulacrum.length_jitter},
                                    {"sentence_spread", g.simulacrum.sentence_spread},
                                    {"preamble_rate", g.simulacrum.preamble_rate},
                                    {"tells", g.simulacrum.tells}}}});
  }
  const auto& t = cfg.train;
  return {{"seed", cfg.seed},
          {"workers", cfg.workers},
          {"output_dir", cfg.output_dir.string()},
          {"log_level", cfg.log_level},
          {"paths", {{"pool", opt(cfg.paths.pool)},
                     {"holdout", opt(cfg.paths.holdout)},
                     {"holdout_ai", opt(cfg.paths.holdout_ai)},
                     {"templates", opt(cfg.paths.templates)},
                     {"tells", opt(cfg.paths.tells)}}},
          {"split", {{"seed", cfg.split.seed},
                     {"holdout_fraction", cfg.split.holdout_fraction},
                     {"per_domain", cfg.split.per_domain}}},
          {"mining", mining::to_json(cfg.mining)},
          {"mirror_holdout", cfg.mirror_holdout},
          {"train", {{"learning_rate", t.learning_rate},
                     {"schedule", t.schedule == model::LrSchedule::constant ? "constant" : "inverse_time"},
                     {"lr_decay", t.lr_decay},
                     {"max_epochs", t.max_epochs},
                     {"batch_size", t.batch_size},
                     {"seed", t.seed},
                     {"validation_fraction", t.validation_fraction},
                     {"patience", t.patience},
                     {"l2", t.l2},
                     {"class_weighting", t.class_weighting}}},
          {"generators", gens},
          {"eval", {{"target_fpr", cfg.eval.target_fpr}, {"threshold", cfg.eval.threshold}}},
          {"scaling", {{"sizes", cfg.scaling.sizes},
                       {"test_humans_per_domain", cfg.scaling.test_humans_per_domain}}}};
}

}  // namespace hnm::cli
