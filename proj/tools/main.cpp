#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "hnm/corpus.hpp"
#include "hnm/evalharness.hpp"
#include "hnm/hash.hpp"
#include "hnm/log.hpp"
#include "hnm/mining.hpp"
#include "hnm/mirrorgen.hpp"
#include "hnm/model.hpp"
#include "hnm/parallel.hpp"
#include "hnm/rng.hpp"
#include "hnm/synth.hpp"
#include "hnm/textnorm.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace hnm;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

// Input problems detected before any work starts.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<fs::path> output_dir;
  std::optional<std::string> log_level;
  bool verbose = false;
  bool quiet = false;
};

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One invocation: resolved config, run directory, and artifact bookkeeping.
class Run {
 public:
  Run(const Globals& g, std::string command) : command_(std::move(command)) {
    cfg_ = g.config ? cli::load_config(*g.config) : cli::RunConfig{};
    if (g.seed) cfg_.seed = *g.seed;
    if (g.workers) cfg_.workers = *g.workers;
    if (g.output_dir) cfg_.output_dir = *g.output_dir;
    if (g.log_level) cfg_.log_level = *g.log_level;
    if (g.verbose) cfg_.log_level = "debug";
    if (g.quiet) cfg_.log_level = "error";
    cli::finalize(cfg_, g.seed.has_value());
    set_workers(static_cast<unsigned>(cfg_.workers));
    log::set_level(log::parse_level(cfg_.log_level));
  }

  ~Run() { log::detach_file(); }

  cli::RunConfig& config() { return cfg_; }

  // Creates <output_dir>/<timestamp>-<command>, or reuses `existing`.
  const fs::path& open(const std::optional<fs::path>& existing = std::nullopt) {
    if (existing) {
      dir_ = *existing;
    } else {
      const auto base = cfg_.output_dir / (timestamp() + "-" + command_);
      dir_ = base;
      for (int k = 2; fs::exists(dir_); ++k) dir_ = base.string() + "-" + std::to_string(k);
    }
    fs::create_directories(dir_);
    write_text(dir_ / "config.json", cli::to_json(cfg_).dump(2) + "\n");
    log::attach_file(dir_ / "run.log");
    log::info("run.start", {{"command", command_}, {"dir", dir_.string()}, {"seed", cfg_.seed}});
    return dir_;
  }

  const fs::path& dir() const { return dir_; }

  void artifact(const std::string& name) { artifacts_.push_back(name); }

  void finish(nlohmann::json summary = nlohmann::json::object()) {
    nlohmann::json hashes = nlohmann::json::object();
    for (const auto& a : artifacts_) {
      const auto p = dir_ / a;
      if (fs::is_regular_file(p)) hashes[a] = fnv1a128(read_text(p)).hex();
    }
    nlohmann::json manifest = {{"command", command_},
                               {"seed", cfg_.seed},
                               {"workers", workers()},
                               {"artifacts", hashes},
                               {"summary", summary}};
    write_text(dir_ / "manifest.json", manifest.dump(2) + "\n");
    log::info("run.done", {{"command", command_}, {"dir", dir_.string()}});
  }

  mirrorgen::TemplateSet templates() const {
    return cfg_.paths.templates ? mirrorgen::TemplateSet::load_dir(*cfg_.paths.templates)
                                : mirrorgen::TemplateSet::builtin();
  }

  textnorm::TellLexicon lexicon() const {
    return cfg_.paths.tells ? textnorm::TellLexicon::from_file(*cfg_.paths.tells)
                            : textnorm::TellLexicon();
  }

  std::vector<mirrorgen::Generator*> generators() {
    if (owned_.empty()) {
      for (const auto& spec : cfg_.generators) owned_.push_back(mirrorgen::make_generator(spec));
    }
    std::vector<mirrorgen::Generator*> out;
    for (auto& g : owned_) out.push_back(g.get());
    return out;
  }

  mirrorgen::MirrorOptions mirror_options(std::string_view tag) const {
    auto o = cfg_.mining.mirror;
    o.seed = derive_seed(cfg_.seed, tag);
    o.lexicon = lexicon();
    return o;
  }

 private:
  std::string command_;
  cli::RunConfig cfg_;
  fs::path dir_;
  std::vector<std::string> artifacts_;
  std::vector<std::unique_ptr<mirrorgen::Generator>> owned_;
};

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw ValidationError(what + " does not exist: " + p.string());
}

Collection load_docs(const fs::path& p) {
  try {
    return corpus::load(p);
  } catch (const CorpusError& e) {
    if (e.kind() == CorpusError::Kind::io) throw;
    throw ValidationError(p.string() + ": " + e.what());
  }
}

// Featurizers expect normalized ASCII text; inputs are cleaned in memory only.
Collection load_normalized(const fs::path& p) {
  auto docs = load_docs(p);
  parallel_for(docs.size(), [&](std::size_t i) { docs[i].text = textnorm::normalize(docs[i].text); });
  return docs;
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << std::endl; }

// ---------------------------------------------------------------------------

int cmd_synth(const Globals& g, std::size_t per_domain) {
  Run run(g, "synth");
  synth::CorpusSpec spec;
  spec.seed = run.config().seed;
  spec.humans_per_domain = per_domain;
  const auto& dir = run.open();
  const auto docs = synth::make_corpus(spec);
  corpus::save(dir / "pool.jsonl", docs);
  run.artifact("pool.jsonl");
  run.finish({{"documents", docs.size()}});
  std::cout << (dir / "pool.jsonl").string() << "\n";
  return kOk;
}

int cmd_ingest(const Globals& g, const std::vector<fs::path>& inputs, bool dedupe,
               std::optional<double> holdout_fraction) {
  Run run(g, "ingest");
  if (holdout_fraction) run.config().split.holdout_fraction = *holdout_fraction;
  if (!(run.config().split.holdout_fraction >= 0.0 && run.config().split.holdout_fraction < 1.0)) {
    throw ValidationError("--holdout-fraction must be in [0, 1)");
  }
  Collection all;
  for (const auto& p : inputs) {
    require_file(p, "input");
    auto docs = load_docs(p);
    all.insert(all.end(), std::make_move_iterator(docs.begin()), std::make_move_iterator(docs.end()));
  }
  try {
    corpus::validate(all);
  } catch (const CorpusError& e) {
    throw ValidationError(e.what());
  }
  const auto& dir = run.open();
  const auto before = all.size();
  if (dedupe) all = corpus::dedupe(all);
  corpus::save(dir / "pool.jsonl", all);
  run.artifact("pool.jsonl");
  nlohmann::json summary = {{"documents", all.size()}, {"duplicates_dropped", before - all.size()},
                            {"domains", corpus::domains(all)}};
  if (run.config().split.holdout_fraction > 0.0) {
    const auto s = corpus::split(all, run.config().split);
    corpus::save(dir / "train_pool.jsonl", s.train_pool);
    corpus::save(dir / "holdout.jsonl", s.holdout);
    run.artifact("train_pool.jsonl");
    run.artifact("holdout.jsonl");
    summary["train_pool"] = s.train_pool.size();
    summary["holdout"] = s.holdout.size();
  }
  run.finish(summary);
  print_json(summary);
  return kOk;
}

int cmd_normalize(const Globals& g, const fs::path& input, std::size_t min_words) {
  Run run(g, "normalize");
  require_file(input, "input");
  auto docs = load_docs(input);
  const auto lexicon = run.lexicon();
  const auto& dir = run.open();
  std::vector<textnorm::CleanResult> results(docs.size());
  parallel_for(docs.size(), [&](std::size_t i) {
    results[i] = textnorm::clean(docs[i].text, min_words, lexicon);
  });
  Collection kept;
  std::string rejected;
  std::size_t stripped = 0;
  std::size_t tells = 0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto& r = results[i];
    stripped += r.report.stripped_boilerplate;
    tells += r.report.tells_found.size();
    if (r.report.rejected) {
      rejected += nlohmann::json{{"id", docs[i].id}, {"reason", textnorm::to_string(*r.report.rejected)}}.dump();
      rejected += '\n';
      continue;
    }
    auto d = docs[i];
    d.text = r.text;
    d.word_count = textnorm::word_count(d.text);
    kept.push_back(std::move(d));
  }
  corpus::save(dir / "normalized.jsonl", kept);
  write_text(dir / "rejected.jsonl", rejected);
  run.artifact("normalized.jsonl");
  run.artifact("rejected.jsonl");
  nlohmann::json summary = {{"input", docs.size()},
                            {"kept", kept.size()},
                            {"rejected", docs.size() - kept.size()},
                            {"boilerplate_stripped", stripped},
                            {"tells_found", tells}};
  run.finish(summary);
  print_json(summary);
  return kOk;
}

int cmd_mirror(const Globals& g, const fs::path& input, std::optional<std::size_t> fanout) {
  Run run(g, "mirror");
  require_file(input, "input");
  if (fanout) run.config().mining.mirror.fanout = *fanout;
  auto docs = load_docs(input);
  Collection humans;
  for (auto& d : docs) {
    if (d.is_human()) humans.push_back(std::move(d));
  }
  const auto templates = run.templates();
  for (const auto& d : humans) {
    if (!templates.has_domain(d.domain)) throw ValidationError("no template for domain " + d.domain);
  }
  const auto& dir = run.open();
  auto gens = run.generators();
  const auto batch = mirrorgen::mirror_documents(humans, templates, gens, run.mirror_options("mirror"),
                                                 run.config().mining.mirror_concurrency);
  corpus::save(dir / "mirrors.jsonl", batch.mirrors);
  run.artifact("mirrors.jsonl");
  nlohmann::json summary = {{"sources", humans.size()},
                            {"mirrors", batch.mirrors.size()},
                            {"rejected", batch.rejected},
                            {"failed", batch.failed}};
  run.finish(summary);
  print_json(summary);
  return batch.failed > 0 && batch.mirrors.empty() ? kRuntime : kOk;
}

int cmd_train(const Globals& g, const std::vector<fs::path>& inputs) {
  Run run(g, "train");
  Collection docs;
  for (const auto& p : inputs) {
    require_file(p, "input");
    auto part = load_normalized(p);
    docs.insert(docs.end(), part.begin(), part.end());
  }
  const auto& dir = run.open();
  auto result = model::train(docs, run.config().train, run.config().mining.features);
  result.model.save(dir / "model.bin");
  nlohmann::json history = nlohmann::json::array();
  for (const auto& e : result.history) {
    history.push_back({{"epoch", e.epoch},
                       {"train_loss", e.train_loss},
                       {"validation_loss", e.validation_loss},
                       {"train_accuracy", e.train_accuracy},
                       {"validation_accuracy", e.validation_accuracy}});
  }
  nlohmann::json summary = {{"documents", docs.size()},
                            {"best_epoch", result.best_epoch},
                            {"best_validation_loss", result.best_validation_loss},
                            {"history", history}};
  write_text(dir / "train.json", summary.dump(2) + "\n");
  run.artifact("model.bin");
  run.artifact("train.json");
  run.finish({{"documents", docs.size()}, {"best_epoch", result.best_epoch}});
  std::cout << (dir / "model.bin").string() << "\n";
  return kOk;
}

std::optional<fs::path> latest_mine_dir(const fs::path& output_dir) {
  std::optional<fs::path> best;
  if (!fs::is_directory(output_dir)) return best;
  for (const auto& e : fs::directory_iterator(output_dir)) {
    const auto name = e.path().filename().string();
    if (!e.is_directory() || name.find("-mine") == std::string::npos) continue;
    if (!fs::exists(e.path() / "ledger" / "state.json")) continue;
    if (!best || name > best->filename().string()) best = e.path();
  }
  return best;
}

int cmd_mine(const Globals& g, bool resume, std::optional<fs::path> run_dir) {
  Run run(g, "mine");
  auto& cfg = run.config();
  cli::require_paths(cfg, {"pool"});
  if (resume && !run_dir) {
    run_dir = latest_mine_dir(cfg.output_dir);
    if (!run_dir) throw ValidationError("no resumable mining run under " + cfg.output_dir.string());
  }
  if (resume && !fs::exists(*run_dir / "ledger" / "state.json")) {
    throw ValidationError("no mining ledger in " + run_dir->string());
  }
  mining::MiningData data;
  auto pool = load_normalized(*cfg.paths.pool);
  if (cfg.paths.holdout) {
    data.train_pool = std::move(pool);
    data.holdout = load_normalized(*cfg.paths.holdout);
  } else {
    if (cfg.split.holdout_fraction <= 0.0) {
      throw ValidationError("split.holdout_fraction must be > 0 when paths.holdout is not set");
    }
    Collection humans;
    for (auto& d : pool) {
      if (d.is_human()) humans.push_back(std::move(d));
    }
    auto s = corpus::split(humans, cfg.split);
    data.train_pool = std::move(s.train_pool);
    data.holdout = std::move(s.holdout);
  }
  const auto templates = run.templates();
  const auto& dir = run.open(resume ? run_dir : std::nullopt);
  auto gens = run.generators();
  if (cfg.paths.holdout_ai) {
    data.holdout_ai = load_normalized(*cfg.paths.holdout_ai);
  } else if (cfg.mirror_holdout) {
    data.holdout_ai = mirrorgen::mirror_documents(data.holdout, templates, gens,
                                                  run.mirror_options("holdout-mirrors"),
                                                  cfg.mining.mirror_concurrency)
                          .mirrors;
  }
  auto mcfg = cfg.mining;
  mcfg.mirror.lexicon = run.lexicon();
  mining::RunOptions opts;
  opts.ledger_dir = dir / "ledger";
  const auto result = resume ? mining::resume(data, mcfg, templates, gens, cfg.train, opts)
                             : mining::run(data, mcfg, templates, gens, cfg.train, opts);
  result.best_model.save(dir / "best_model.bin");
  run.artifact("best_model.bin");
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : result.rounds) {
    rounds.push_back({{"round", r.index},
                      {"training_size", r.training_ids.size()},
                      {"weighted_fpr", r.metrics.holdout_fpr.weighted_total.str()},
                      {"weighted_fpr_value", r.metrics.holdout_fpr.weighted_total.value()},
                      {"fnr", r.metrics.holdout_fnr ? nlohmann::json(r.metrics.holdout_fnr->str())
                                                    : nlohmann::json(nullptr)},
                      {"mined", r.mined_ids.size()},
                      {"mirrors", r.mirror_ids.size()},
                      {"improved", r.improved}});
  }
  nlohmann::json summary = {{"rounds", rounds},
                            {"best_round", result.best_round},
                            {"stop_reason", result.stop_reason}};
  run.finish(summary);
  print_json(summary);
  return kOk;
}

int cmd_eval(const Globals& g, const fs::path& model_path, const fs::path& human_path,
             const std::vector<fs::path>& ai_paths, std::optional<double> target_fpr,
             std::optional<double> threshold, bool json) {
  Run run(g, "eval");
  require_file(model_path, "model");
  require_file(human_path, "human set");
  if (ai_paths.empty()) throw ValidationError("at least one --ai file is required");
  for (const auto& p : ai_paths) require_file(p, "AI set");
  auto& cfg = run.config();
  if (target_fpr) cfg.eval.target_fpr = *target_fpr;
  if (!(cfg.eval.target_fpr >= 0.0 && cfg.eval.target_fpr < 1.0)) {
    throw ValidationError("--target-fpr must be in [0, 1)");
  }
  const auto m = model::ClassifierModel::load(model_path);
  auto humans = load_normalized(human_path);
  Collection ai;
  for (const auto& p : ai_paths) {
    auto part = load_normalized(p);
    ai.insert(ai.end(), part.begin(), part.end());
  }
  if (humans.empty()) throw ValidationError("human set is empty");
  for (const auto& d : humans) {
    if (!d.is_human()) throw ValidationError("document " + d.id + " in the human set is labeled ai");
  }
  for (const auto& d : ai) {
    if (!d.is_ai()) throw ValidationError("document " + d.id + " in the AI set is labeled human");
  }
  const auto& dir = run.open();
  const auto by_gen = eval::by_generator(ai);
  const auto recall = eval::recall_at_fpr(m, humans, by_gen, cfg.eval.target_fpr);
  Collection all = humans;
  all.insert(all.end(), ai.begin(), ai.end());
  std::vector<double> scores(all.size());
  parallel_for(all.size(), [&](std::size_t i) { scores[i] = m.score(all[i].text); });
  // Without --threshold the report uses the calibrated operating point.
  auto report = eval::evaluate(scores, all, threshold.value_or(recall.threshold));
  if (!threshold) report.calibration_target = cfg.eval.target_fpr;
  eval::write_report(dir, report, recall);
  run.artifact("report.json");
  run.artifact("report.csv");
  run.finish({{"threshold", report.threshold}});
  if (json) {
    auto j = eval::to_json(report);
    j["recall_at_fpr"] = eval::to_json(recall);
    print_json(j);
  } else {
    std::cout << "threshold " << report.threshold << " (realized FPR "
              << recall.realized_fpr.value() << ")\n";
    for (const auto& [gen, r] : recall.recall) {
      std::cout << "  recall " << gen << " " << r.value() << "\n";
    }
    std::cout << (dir / "report.json").string() << "\n";
  }
  return kOk;
}

int cmd_scaling(const Globals& g, std::optional<fs::path> pool_path,
                const std::vector<std::size_t>& sizes) {
  Run run(g, "scaling");
  auto& cfg = run.config();
  if (pool_path) cfg.paths.pool = *pool_path;
  if (!sizes.empty()) cfg.scaling.sizes = sizes;
  cli::require_paths(cfg, {"pool"});
  auto pool = load_normalized(*cfg.paths.pool);
  const auto templates = run.templates();
  const auto& dir = run.open();
  auto gens = run.generators();
  eval::ScalingOptions opts;
  opts.seed = derive_seed(cfg.seed, "scaling");
  opts.test_humans_per_domain = cfg.scaling.test_humans_per_domain;
  opts.mirror = run.mirror_options("scaling-mirrors");
  opts.features = cfg.mining.features;
  opts.checkpoint_dir = dir / "checkpoints";
  fs::create_directories(*opts.checkpoint_dir);
  eval::ScalingCurve curve;
  try {
    curve = eval::scaling_experiment(pool, cfg.scaling.sizes, templates, gens, cfg.train, opts);
  } catch (const eval::EvalError& e) {
    throw ValidationError(e.what());
  }
  write_text(dir / "scaling.csv", eval::to_csv(curve));
  run.artifact("scaling.csv");
  run.finish({{"points", curve.points.size()}});
  std::cout << eval::to_csv(curve);
  return kOk;
}

int cmd_report(const Globals& g, std::optional<fs::path> model_path,
               std::optional<fs::path> holdout_path, std::optional<double> threshold,
               std::optional<fs::path> ledger) {
  Run run(g, "report");
  auto& cfg = run.config();
  if (!ledger && !(model_path && holdout_path)) {
    throw ValidationError("report needs --ledger, or --model with --holdout");
  }
  if (ledger && !fs::exists(*ledger / "state.json")) {
    throw ValidationError("no mining ledger at " + ledger->string());
  }
  if (model_path) require_file(*model_path, "model");
  if (holdout_path) require_file(*holdout_path, "holdout");
  const auto& dir = run.open();
  nlohmann::json summary = nlohmann::json::object();
  if (model_path && holdout_path) {
    const auto m = model::ClassifierModel::load(*model_path);
    const auto holdout = load_normalized(*holdout_path);
    const auto table = eval::domain_fpr_table(m, holdout, threshold.value_or(cfg.eval.threshold));
    write_text(dir / "domain_fpr.csv", eval::to_csv(table));
    write_text(dir / "domain_fpr.json", eval::to_json(table).dump(2) + "\n");
    run.artifact("domain_fpr.csv");
    run.artifact("domain_fpr.json");
    summary["weighted_total"] = table.weighted_total.str();
    std::cout << eval::to_csv(table);
  }
  if (ledger) {
    const auto state = nlohmann::json::parse(read_text(*ledger / "state.json"));
    std::ostringstream csv;
    csv << "round,training_size,weighted_fpr,fnr,mined,mirrors,improved\n";
    for (int i = 0; i < state.at("rounds").get<int>(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "round-%03d", i);
      const auto j = nlohmann::json::parse(read_text(*ledger / name / "metrics.json"));
      const auto& mt = j.at("metrics");
      csv << i << ',' << j.at("training_size").get<std::size_t>() << ','
          << mt.at("holdout_fpr").at("weighted_total_value").get<double>() << ','
          << (mt.at("holdout_fnr_value").is_null() ? std::string()
                                                   : std::to_string(mt.at("holdout_fnr_value").get<double>()))
          << ',' << j.at("mined_count").get<std::size_t>() << ','
          << j.at("mirror_count").get<std::size_t>() << ',' << j.at("improved").get<bool>() << '\n';
    }
    write_text(dir / "rounds.csv", csv.str());
    run.artifact("rounds.csv");
    summary["best_round"] = state.at("best_round");
    std::cout << csv.str();
  }
  run.finish(summary);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hnm: AI-text detector training with hard negative mining"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "YAML run configuration");
  app.add_option("--seed", g.seed, "Global seed (overrides the config)");
  app.add_option("--workers", g.workers, "Worker threads, 0 = all cores");
  app.add_option("--output-dir", g.output_dir, "Parent directory for run directories");
  app.add_option("--log-level", g.log_level, "debug, info, warn, error or off");
  app.add_flag("-v,--verbose", g.verbose, "Log at debug level");
  app.add_flag("-q,--quiet", g.quiet, "Only log errors");

  std::function<int()> action;

  auto* synth_cmd = app.add_subcommand("synth", "Write the seeded synthetic human corpus");
  std::size_t per_domain = 2000;
  synth_cmd->add_option("--humans-per-domain", per_domain)->check(CLI::PositiveNumber);
  synth_cmd->callback([&] { action = [&] { return cmd_synth(g, per_domain); }; });

  auto* ingest = app.add_subcommand("ingest", "Load, validate, dedupe and split corpus files");
  std::vector<fs::path> ingest_inputs;
  bool no_dedupe = false;
  std::optional<double> holdout_fraction;
  ingest->add_option("inputs", ingest_inputs, "JSONL or CSV files")->required();
  ingest->add_flag("--no-dedupe", no_dedupe, "Keep exact duplicates");
  ingest->add_option("--holdout-fraction", holdout_fraction, "Also write a stratified holdout split");
  ingest->callback([&] {
    action = [&] { return cmd_ingest(g, ingest_inputs, !no_dedupe, holdout_fraction); };
  });

  auto* normalize = app.add_subcommand("normalize", "Clean texts and drop short documents");
  fs::path normalize_input;
  std::size_t min_words = textnorm::kDefaultMinWords;
  normalize->add_option("input", normalize_input)->required();
  normalize->add_option("--min-words", min_words);
  normalize->callback([&] { action = [&] { return cmd_normalize(g, normalize_input, min_words); }; });

  auto* mirror = app.add_subcommand("mirror", "Generate synthetic mirrors of human documents");
  fs::path mirror_input;
  std::optional<std::size_t> fanout;
  mirror->add_option("input", mirror_input)->required();
  mirror->add_option("--fanout", fanout, "Mirrors per human document")->check(CLI::PositiveNumber);
  mirror->callback([&] { action = [&] { return cmd_mirror(g, mirror_input, fanout); }; });

  auto* train = app.add_subcommand("train", "Train a detector on labeled documents");
  std::vector<fs::path> train_inputs;
  train->add_option("inputs", train_inputs)->required();
  train->callback([&] { action = [&] { return cmd_train(g, train_inputs); }; });

  auto* mine = app.add_subcommand("mine", "Run hard negative mining");
  bool resume = false;
  std::optional<fs::path> run_dir;
  mine->add_flag("--resume", resume, "Continue the latest (or --run-dir) mining run");
  mine->add_option("--run-dir", run_dir, "Mining run directory to resume");
  mine->callback([&] { action = [&] { return cmd_mine(g, resume, run_dir); }; });

  auto* evalc = app.add_subcommand("eval", "Recall at a calibrated FPR and confusion report");
  fs::path eval_model, eval_human;
  std::vector<fs::path> eval_ai;
  std::optional<double> target_fpr, eval_threshold;
  bool json = false;
  evalc->add_option("--model", eval_model)->required();
  evalc->add_option("--human", eval_human)->required();
  evalc->add_option("--ai", eval_ai, "AI documents (repeatable)")->required();
  evalc->add_option("--target-fpr", target_fpr);
  evalc->add_option("--threshold", eval_threshold, "Fixed threshold for the confusion report");
  evalc->add_flag("--json", json, "Print the full report as JSON");
  evalc->callback([&] {
    action = [&] {
      return cmd_eval(g, eval_model, eval_human, eval_ai, target_fpr, eval_threshold, json);
    };
  });

  auto* scaling = app.add_subcommand("scaling", "Accuracy and loss against training size");
  std::optional<fs::path> scaling_pool;
  std::vector<std::size_t> sizes;
  scaling->add_option("--pool", scaling_pool);
  scaling->add_option("--sizes", sizes, "Humans per domain, strictly increasing")->delimiter(',');
  scaling->callback([&] { action = [&] { return cmd_scaling(g, scaling_pool, sizes); }; });

  auto* report = app.add_subcommand("report", "Per-domain FPR table or mining round summary");
  std::optional<fs::path> report_model, report_holdout, ledger;
  std::optional<double> report_threshold;
  report->add_option("--model", report_model);
  report->add_option("--holdout", report_holdout);
  report->add_option("--threshold", report_threshold);
  report->add_option("--ledger", ledger, "Mining ledger directory");
  report->callback([&] {
    action = [&] { return cmd_report(g, report_model, report_holdout, report_threshold, ledger); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalid;
  }

  try {
    return action();
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kInvalid;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    log::error("run.failed", {{"error", e.what()}});
    std::cerr << "failed: " << e.what() << "\n";
    return kRuntime;
  }
}
