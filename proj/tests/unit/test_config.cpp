#include <doctest.h>

#include "../../tools/run_config.hpp"
#include "helpers.hpp"

using namespace hnm;
using namespace hnm::cli;

namespace {

std::string error_of(const std::string& yaml) {
  try {
    auto cfg = parse_config(yaml);
    finalize(cfg, false);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("the bundled desk config parses") {
  auto cfg = load_config(HNM_SOURCE_DIR "/configs/desk.yaml");
  finalize(cfg, false);
  CHECK(cfg.mining.n == 4000);
  CHECK(cfg.mining.m == 400);
  CHECK(cfg.mining.per_domain_fp_cap == 100);
  CHECK(cfg.mining.metric == mining::Metric::holdout_weighted_fpr);
  CHECK(cfg.mining.features.ngram_sizes == std::vector<int>{3, 4, 5});
  CHECK(cfg.generators.size() == 1);
  CHECK(cfg.generators[0].offline());
  CHECK(cfg.generators[0].seed.has_value());
  CHECK(cfg.scaling.sizes == std::vector<std::size_t>{500, 2000, 8000});
  CHECK(cfg.paths.pool->filename() == "pool.jsonl");
  CHECK(cfg.paths.pool->is_absolute());
}

TEST_CASE("unknown fields and bad types name the field") {
  CHECK(error_of("mining:\n  nn: 3\n") == "mining.nn: unknown field");
  CHECK(error_of("bogus: 1\n") == "bogus: unknown field");
  CHECK(error_of("mining:\n  m: lots\n") == "mining.m: expected an integer, got 'lots'");
  CHECK(error_of("mining:\n  n: -4\n") == "mining.n: must not be negative");
  CHECK(error_of("train:\n  schedule: cosine\n").rfind("train.schedule:", 0) == 0);
  CHECK(error_of("generators:\n  - name: a\n    colour: red\n") == "generators[0].colour: unknown field");
  CHECK(error_of("generators:\n  - name: a\n  - name: a\n") == "generators[1].name: duplicate generator name");
  CHECK(error_of("features:\n  ngram_sizes: [3, x]\n") == "features.ngram_sizes[1]: expected an integer");
  CHECK(error_of("scaling:\n  sizes: [10, 10]\n").rfind("scaling.sizes:", 0) == 0);
  CHECK(error_of("log_level: loud\n").rfind("log_level:", 0) == 0);
  CHECK(error_of("mining:\n  fp_threshold: 2\n").rfind("mining:", 0) == 0);
  CHECK(error_of("mining: [1, 2]\n") == "mining: expected a mapping");
  CHECK(!error_of("{{{").empty());
  CHECK(error_of("seed: 3\n").empty());
}

TEST_CASE("the global seed reaches every seeded component") {
  auto a = parse_config("seed: 10\n");
  finalize(a, false);
  auto b = parse_config("seed: 11\n");
  finalize(b, false);
  CHECK(a.split.seed == derive_seed(10, "split"));
  CHECK(a.mining.seed == derive_seed(10, "mining"));
  CHECK(a.train.seed == derive_seed(10, "train"));
  CHECK(*a.generators[0].seed == derive_seed(10, "generator:simulacrum"));
  CHECK(a.split.seed != b.split.seed);
  CHECK(a.mining.seed != b.mining.seed);
  CHECK(a.train.seed != b.train.seed);
  CHECK(*a.generators[0].seed != *b.generators[0].seed);

  // explicit component seeds win unless the seed is overridden on the command line
  auto c = parse_config("seed: 10\nmining:\n  seed: 99\ngenerators:\n  - name: g\n    seed: 5\n");
  auto d = c;
  finalize(c, false);
  CHECK(c.mining.seed == 99);
  CHECK(*c.generators[0].seed == 5);
  finalize(d, true);
  CHECK(d.mining.seed == derive_seed(10, "mining"));
  CHECK(*d.generators[0].seed == derive_seed(10, "generator:g"));
}

TEST_CASE("required paths must exist") {
  testutil::TempDir dir("config");
  testutil::write_file(dir / "pool.jsonl", "");
  auto cfg = parse_config("paths:\n  pool: pool.jsonl\n", dir.path());
  CHECK(*cfg.paths.pool == dir / "pool.jsonl");
  CHECK_NOTHROW(require_paths(cfg, {"pool"}));
  try {
    require_paths(cfg, {"holdout"});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "paths.holdout");
  }
  cfg.paths.templates = dir / "missing";
  CHECK_THROWS_AS(require_paths(cfg, {"pool"}), ConfigError);
}

TEST_CASE("resolved config serializes every section") {
  auto cfg = parse_config("seed: 4\n");
  finalize(cfg, false);
  const auto j = to_json(cfg);
  for (const char* k : {"seed", "paths", "split", "mining", "train", "generators", "eval", "scaling"}) {
    CHECK(j.contains(k));
  }
  CHECK(j["mining"]["seed"] == cfg.mining.seed);
}
