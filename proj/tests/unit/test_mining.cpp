#include <doctest.h>

#include <algorithm>
#include <set>

#include "helpers.hpp"
#include "hnm/mining.hpp"
#include "hnm/synth.hpp"
#include "hnm/textnorm.hpp"

using namespace hnm;
using namespace hnm::mining;

namespace {

Collection normalized(Collection c) {
  for (auto& d : c) d.text = textnorm::normalize(d.text);
  return c;
}

struct Fixture {
  MiningData data;
  mirrorgen::TemplateSet templates = mirrorgen::TemplateSet::builtin();
  std::unique_ptr<mirrorgen::Generator> gen;
  MiningConfig cfg;
  model::TrainConfig tc;

  explicit Fixture(std::size_t per_domain = 160) {
    const auto pool = normalized(synth::make_corpus({.seed = 17, .humans_per_domain = per_domain}));
    for (std::size_t i = 0; i < pool.size(); ++i) {
      (i % 5 == 0 ? data.holdout : data.train_pool).push_back(pool[i]);
    }
    mirrorgen::GeneratorSpec spec;
    spec.seed = 17;
    gen = mirrorgen::make_generator(spec);
    data.holdout_ai = normalized(
        mirrorgen::mirror_documents(data.holdout, templates, {gen.get()}, {.seed = 99}).mirrors);
    cfg.n = 200;
    cfg.m = 60;
    cfg.per_domain_fp_cap = 20;
    cfg.min_domain_pool = 1;
    cfg.fp_threshold = 0.2;
    cfg.min_relative_improvement = 0.0;
    cfg.max_rounds = 2;
    cfg.seed = 5;
    cfg.features.hash_bits = 14;
    tc.max_epochs = 4;
    tc.seed = 6;
  }

  std::vector<mirrorgen::Generator*> gens() const { return {gen.get()}; }
  RunResult run(RunOptions opts = {}) const { return mining::run(data, cfg, templates, gens(), tc, opts); }
};

std::map<std::string, std::string> snapshot(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), dir).string()] = testutil::read_file(e.path());
  }
  return out;
}

Document scored_doc(int i, const std::string& domain) {
  return testutil::human("c" + std::to_string(i), domain, "text " + std::to_string(i));
}

}  // namespace

TEST_CASE("config validation") {
  MiningConfig c;
  CHECK_NOTHROW(validate(c));
  c.n = 0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = {};
  c.fp_threshold = 1.0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = {};
  c.max_rounds = -1;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  CHECK(parse_metric("validation_loss") == Metric::validation_loss);
  CHECK(parse_metric(to_string(Metric::holdout_weighted_fpr)) == Metric::holdout_weighted_fpr);
  CHECK_THROWS_AS(parse_metric("vibes"), std::invalid_argument);
  CHECK(MiningConfig{}.effective_min_domain_pool() == 200);
}

TEST_CASE("stratified initial training set") {
  Fixture f(20);
  f.cfg.n = 10;
  const auto t0 = init_training_set(f.data.train_pool, f.cfg, f.templates, f.gens());
  CHECK(t0.humans.size() == 10);
  std::map<std::string, int> per;
  for (const auto& d : t0.humans) ++per[d.domain];
  CHECK(per.size() == 5);
  for (const auto& [d, k] : per) CHECK(k == 2);
  CHECK(t0.mirrors.size() == 10);
  for (const auto& m : t0.mirrors) {
    CHECK(m.label == Label::ai);
    CHECK(m.mirror_of.has_value());
    CHECK(std::any_of(t0.humans.begin(), t0.humans.end(), [&](const Document& h) {
      return h.id == *m.mirror_of && h.domain == m.domain;
    }));
  }
  const auto again = init_training_set(f.data.train_pool, f.cfg, f.templates, f.gens());
  CHECK(again.all() == t0.all());
  f.cfg.n = 10000;
  CHECK_THROWS_AS(init_training_set(f.data.train_pool, f.cfg, f.templates, f.gens()), MiningError);
}

TEST_CASE("desk-sized initial training set") {
  const auto pool = normalized(synth::make_corpus({.seed = 7}));
  mirrorgen::GeneratorSpec spec;
  spec.seed = 7;
  auto gen = mirrorgen::make_generator(spec);
  MiningConfig cfg;
  const auto t0 = init_training_set(pool, cfg, mirrorgen::TemplateSet::builtin(), {gen.get()});
  const auto size = t0.all().size();
  MESSAGE("|T0| = " << size);
  CHECK(size >= 7600);
  CHECK(size <= 8000);
}

TEST_CASE("false positive sampling matches a filter-then-sample oracle") {
  Rng rng(3);
  Collection cands;
  std::vector<double> scores;
  const std::vector<std::string> domains = {"email", "news", "wiki"};
  std::set<std::string> above;
  for (int i = 0; i < 1000; ++i) {
    cands.push_back(scored_doc(i, domains[i % 3]));
    const bool fp = i % 25 < 3;  // 120 above threshold
    scores.push_back(fp ? 0.5 + 0.5 * rng.uniform() : 0.5 * rng.uniform());
    if (fp) above.insert(cands.back().id);
  }
  REQUIRE(above.size() == 120);
  MiningConfig cfg;
  cfg.m = 50;
  cfg.per_domain_fp_cap = 1000;
  cfg.min_domain_pool = 1;
  const auto s = sample_false_positives(scores, cands, cfg, 8);
  CHECK(s.mined.size() == 50);
  CHECK(s.false_positives == 120);
  CHECK(s.candidates == 1000);
  std::set<std::string> ids;
  for (const auto& d : s.mined) {
    CHECK(above.contains(d.id));
    ids.insert(d.id);
  }
  CHECK(ids.size() == 50);
  const auto again = sample_false_positives(scores, cands, cfg, 8);
  CHECK(again.mined == s.mined);
  CHECK(!(sample_false_positives(scores, cands, cfg, 9).mined == s.mined));

  cfg.m = 500;
  CHECK(sample_false_positives(scores, cands, cfg, 8).mined.size() == 120);

  std::vector<double> zeros(scores.size(), 0.0);
  CHECK(sample_false_positives(zeros, cands, cfg, 8).mined.empty());
}

TEST_CASE("per-domain cap and small-domain skipping") {
  Collection cands;
  std::vector<double> scores;
  for (int i = 0; i < 300; ++i) {
    cands.push_back(scored_doc(i, i < 200 ? "reviews" : "email"));
    scores.push_back(i < 200 ? 0.9 : (i < 250 ? 0.9 : 0.1));
  }
  MiningConfig cfg;
  cfg.m = 400;
  cfg.per_domain_fp_cap = 10;
  cfg.min_domain_pool = 1;
  auto s = sample_false_positives(scores, cands, cfg, 1);
  std::map<std::string, int> per;
  for (const auto& d : s.mined) ++per[d.domain];
  CHECK(per["reviews"] == 10);
  CHECK(per["email"] == 10);

  cfg.min_domain_pool = 150;  // email has only 100 candidates
  s = sample_false_positives(scores, cands, cfg, 1);
  CHECK(s.skipped_domains == std::vector<std::string>{"email"});
  for (const auto& d : s.mined) CHECK(d.domain == "reviews");
}

TEST_CASE("max_rounds = 0 yields round 0 only") {
  Fixture f;
  f.cfg.max_rounds = 0;
  const auto r = f.run();
  REQUIRE(r.rounds.size() == 1);
  CHECK(r.rounds[0].index == 0);
  CHECK(!r.rounds[0].mined);
  CHECK(r.best_round == 0);
  CHECK(r.finished);
  CHECK(r.stop_reason == "max rounds");
}

TEST_CASE("round invariants and holdout hygiene") {
  Fixture f;
  const auto r = f.run();
  REQUIRE(r.rounds.size() >= 2);
  std::set<std::string> holdout;
  for (const auto& d : f.data.holdout) holdout.insert(d.id);
  std::set<std::string> pool;
  for (const auto& d : f.data.train_pool) pool.insert(d.id);
  for (std::size_t i = 0; i < r.rounds.size(); ++i) {
    const auto& round = r.rounds[i];
    CHECK(round.index == static_cast<int>(i));
    for (const auto& id : round.training_ids) CHECK(!holdout.contains(id));
    for (const auto& id : round.mined_ids) {
      CHECK(!holdout.contains(id));
      CHECK(pool.contains(id));
    }
    for (const auto& id : round.mirror_ids) CHECK(!holdout.contains(id));
    CHECK(round.metrics.holdout_fpr.fpr.size() == 5);
    CHECK(round.metrics.holdout_fnr.has_value());
    if (i + 1 < r.rounds.size()) {
      REQUIRE(round.mined);
      const auto& next = r.rounds[i + 1];
      // T_{i+1} = T_i + F_i + S_i
      std::vector<std::string> expect = round.training_ids;
      expect.insert(expect.end(), round.mined_ids.begin(), round.mined_ids.end());
      expect.insert(expect.end(), round.mirror_ids.begin(), round.mirror_ids.end());
      CHECK(next.training_ids == expect);
      const std::set<std::string> t(round.training_ids.begin(), round.training_ids.end());
      for (const auto& id : round.mined_ids) CHECK(!t.contains(id));
      CHECK(round.mirror_ids.size() <= round.mined_ids.size());
      for (const auto& id : round.mirror_ids) {
        const auto src = id.substr(0, id.find('#'));
        CHECK(std::find(round.mined_ids.begin(), round.mined_ids.end(), src) != round.mined_ids.end());
      }
    }
  }
  CHECK(r.best_model.serialize().size() > 0);
  CHECK(r.finished);
}

TEST_CASE("runs are deterministic") {
  Fixture f;
  const auto a = f.run();
  const auto b = f.run();
  REQUIRE(a.rounds.size() == b.rounds.size());
  for (std::size_t i = 0; i < a.rounds.size(); ++i) {
    CHECK(a.rounds[i].model_id == b.rounds[i].model_id);
    CHECK(a.rounds[i].mined_ids == b.rounds[i].mined_ids);
    CHECK(to_json(a.rounds[i]) == to_json(b.rounds[i]));
  }
  CHECK(a.best_model == b.best_model);
}

TEST_CASE("killed and resumed runs reproduce the ledger byte for byte") {
  Fixture f;
  testutil::TempDir full("ledger-full"), killed("ledger-killed");
  const auto a = f.run({.ledger_dir = full.path(), .stop_after_round = std::nullopt});
  REQUIRE(a.rounds.size() >= 2);

  const auto partial = f.run({.ledger_dir = killed.path(), .stop_after_round = 0});
  CHECK(!partial.finished);
  CHECK(partial.rounds.size() == 1);
  CHECK(std::filesystem::exists(killed / "state.json"));

  const auto b = resume(f.data, f.cfg, f.templates, f.gens(), f.tc, {.ledger_dir = killed.path(), .stop_after_round = std::nullopt});
  CHECK(b.finished);
  CHECK(b.rounds.size() == a.rounds.size());
  CHECK(b.best_round == a.best_round);
  CHECK(b.best_model == a.best_model);
  CHECK(snapshot(full.path()) == snapshot(killed.path()));

  // resuming a finished ledger is a no-op
  const auto c = resume(f.data, f.cfg, f.templates, f.gens(), f.tc, {.ledger_dir = killed.path(), .stop_after_round = std::nullopt});
  CHECK(c.rounds.size() == a.rounds.size());
  CHECK(snapshot(full.path()) == snapshot(killed.path()));

  auto other = f.cfg;
  other.m = 61;
  CHECK_THROWS_AS(resume(f.data, other, f.templates, f.gens(), f.tc, {.ledger_dir = killed.path(), .stop_after_round = std::nullopt}),
                  MiningError);
}

TEST_CASE("pool and holdout must be disjoint") {
  Fixture f(40);
  f.data.train_pool.push_back(f.data.holdout.front());
  CHECK_THROWS_AS(f.run(), MiningError);
  Fixture g(40);
  g.data.holdout.front().label = Label::ai;
  g.data.holdout.front().generator = "x";
  CHECK_THROWS_AS(g.run(), MiningError);
}
