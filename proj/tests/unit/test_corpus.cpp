#include <doctest.h>

#include <map>
#include <set>
#include <unordered_map>

#include "helpers.hpp"
#include "hnm/corpus.hpp"
#include "hnm/textnorm.hpp"

using namespace hnm;
using testutil::human;

namespace {

std::string jsonl_line(const std::string& id, const std::string& text, const std::string& label,
                       const std::string& domain, const std::string& extra = "") {
  nlohmann::json j = {{"id", id}, {"text", text}, {"label", label}, {"domain", domain}};
  std::string s = j.dump();
  if (!extra.empty()) s.insert(s.size() - 1, "," + extra);
  return s + "\n";
}

Collection spread(std::size_t n, std::size_t domains) {
  Collection out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(human("d" + std::to_string(i), "dom" + std::to_string(i % domains),
                        "text number " + std::to_string(i)));
  }
  return out;
}

std::set<std::string> ids(const Collection& c) {
  std::set<std::string> out;
  for (const auto& d : c) out.insert(d.id);
  return out;
}

}  // namespace

TEST_CASE("load keeps file order and derives word counts") {
  testutil::TempDir dir("corpus");
  const auto path = dir / "three.jsonl";
  testutil::write_file(path, jsonl_line("b", "two words", "human", "email") +
                                 jsonl_line("a", "one", "human", "news") +
                                 jsonl_line("c", "three little words", "ai", "news", "\"generator\":\"g\""));
  const auto docs = corpus::load(path);
  REQUIRE(docs.size() == 3);
  CHECK(docs[0].id == "b");
  CHECK(docs[1].id == "a");
  CHECK(docs[2].id == "c");
  CHECK(docs[0].word_count == 2);
  CHECK(docs[2].word_count == 3);
  CHECK(docs[2].generator == std::optional<std::string>("g"));
}

TEST_CASE("ai record without generator names the id") {
  try {
    corpus::parse_jsonl(jsonl_line("ok", "x", "human", "email") + jsonl_line("bad-ai", "y", "ai", "email"));
    FAIL("expected an invariant error");
  } catch (const CorpusError& e) {
    CHECK(e.kind() == CorpusError::Kind::invariant);
    CHECK(std::string(e.what()).find("bad-ai") != std::string::npos);
    CHECK(e.line() == 2);
  }
}

TEST_CASE("human record with a generator is rejected") {
  CHECK_THROWS_AS(corpus::parse_jsonl(jsonl_line("h", "x", "human", "email", "\"generator\":\"g\"")),
                  CorpusError);
}

TEST_CASE("duplicate ids are all listed") {
  Rng rng(11);
  std::string content;
  std::vector<std::string> all_ids;
  for (int i = 0; i < 990; ++i) all_ids.push_back("doc-" + std::to_string(i));
  for (int k = 0; k < 10; ++k) all_ids.push_back(all_ids[rng.below(990)]);
  rng.shuffle(all_ids);
  for (const auto& id : all_ids) content += jsonl_line(id, "t", "human", "email");

  std::unordered_map<std::string, int> counts;
  for (const auto& id : all_ids) ++counts[id];
  std::set<std::string> expected;
  for (const auto& [id, c] : counts) {
    if (c > 1) expected.insert(id);
  }

  try {
    corpus::parse_jsonl(content);
    FAIL("expected duplicate-id error");
  } catch (const CorpusError& e) {
    CHECK(e.kind() == CorpusError::Kind::duplicate_id);
    const std::set<std::string> got(e.ids().begin(), e.ids().end());
    CHECK(got == expected);
    CHECK(e.ids().size() == expected.size());
  }
}

TEST_CASE("malformed line is reported with its number") {
  std::string content;
  for (int i = 1; i <= 10; ++i) {
    content += i == 7 ? std::string("{\"id\": \"x7\", oops\n")
                      : jsonl_line("x" + std::to_string(i), "t", "human", "email");
  }
  try {
    corpus::parse_jsonl(content);
    FAIL("expected parse error");
  } catch (const CorpusError& e) {
    CHECK(e.kind() == CorpusError::Kind::parse);
    CHECK(e.line() == 7);
    CHECK(std::string(e.what()).find("line 7") != std::string::npos);
  }
}

TEST_CASE("missing required field is a parse error") {
  CHECK_THROWS_AS(corpus::parse_jsonl("{\"id\":\"a\",\"text\":\"t\",\"label\":\"human\"}\n"), CorpusError);
  CHECK_THROWS_AS(corpus::parse_jsonl("{\"id\":\"a\",\"text\":\"t\",\"label\":\"robot\",\"domain\":\"x\"}\n"),
                  CorpusError);
}

TEST_CASE("mirror_of must point at a human document") {
  Collection c;
  c.push_back(human("h1", "email", "hello"));
  auto m = make_document("m1", "mirror", Label::ai, "email");
  m.generator = "g";
  m.mirror_of = "h1";
  c.push_back(m);
  CHECK_NOTHROW(corpus::validate(c));
  auto m2 = m;
  m2.id = "m2";
  m2.mirror_of = "m1";
  c.push_back(m2);
  CHECK_THROWS_AS(corpus::validate(c), CorpusError);
}

TEST_CASE("csv ingestion handles quoting") {
  const std::string csv =
      "id,text,label,domain,generator,year\n"
      "a,\"Hello, world\",human,email,,2019\n"
      "b,\"She said \"\"hi\"\"\nthen left\",ai,news,gpt,\n";
  const auto docs = corpus::parse_csv(csv);
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].text == "Hello, world");
  CHECK(docs[0].year == std::optional<int>(2019));
  CHECK(docs[1].text == "She said \"hi\"\nthen left");
  CHECK(docs[1].generator == std::optional<std::string>("gpt"));
}

TEST_CASE("save and load round-trip including unknown fields") {
  testutil::TempDir dir("roundtrip");
  Collection c;
  auto h = human("h1", "reviews", "Great “coffee”, friendly staff.");
  h.year = 2015;
  h.extra["rating"] = 4;
  h.extra["topic"] = "coffee";
  c.push_back(h);
  auto m = make_document("h1#m0", "A mirror text.", Label::ai, "reviews", "mirror:t");
  m.generator = "sim";
  m.mirror_of = "h1";
  c.push_back(m);
  corpus::save(dir / "c.jsonl", c);
  const auto back = corpus::load(dir / "c.jsonl");
  CHECK(back == c);
  CHECK(corpus::to_jsonl(back) == corpus::to_jsonl(c));
}

TEST_CASE("split degenerate fraction keeps everything") {
  const auto s = corpus::split(spread(100, 4), {1, 0.0, true});
  CHECK(s.train_pool.size() == 100);
  CHECK(s.holdout.empty());
}

TEST_CASE("stratified split holds out the same share of every domain") {
  const auto pool = spread(1000, 5);
  const auto s = corpus::split(pool, {42, 0.2, true});
  std::map<std::string, int> tally;
  for (const auto& d : s.holdout) ++tally[d.domain];
  REQUIRE(tally.size() == 5);
  for (const auto& [domain, n] : tally) CHECK_MESSAGE(n == 40, domain);
}

TEST_CASE("split is deterministic, disjoint and exhaustive") {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto pool = spread(10 + rng.below(300), 1 + rng.below(6));
    const corpus::SplitSpec spec{rng.next(), rng.uniform() * 0.9, rng.chance(0.5)};
    const auto a = corpus::split(pool, spec);
    const auto b = corpus::split(pool, spec);
    CHECK(corpus::to_jsonl(a.holdout) == corpus::to_jsonl(b.holdout));
    const auto ta = ids(a.train_pool), ha = ids(a.holdout);
    for (const auto& id : ha) CHECK_FALSE(ta.contains(id));
    CHECK(ta.size() + ha.size() == pool.size());
    if (!spec.per_domain) {
      CHECK(ha.size() == static_cast<std::size_t>(std::llround(spec.holdout_fraction * pool.size())));
    }
  }
}

TEST_CASE("split errors") {
  CHECK_THROWS_AS(corpus::split({}, {}), CorpusError);
  Collection lonely = spread(10, 2);
  lonely.push_back(human("solo", "rare", "x"));
  try {
    corpus::split(lonely, {1, 0.5, true});
    FAIL("expected unstratifiable");
  } catch (const CorpusError& e) {
    CHECK(e.kind() == CorpusError::Kind::unstratifiable);
  }
  CHECK_NOTHROW(corpus::split(lonely, {1, 0.5, false}));
}

TEST_CASE("dedupe examples") {
  Collection c = {human("a", "e", "He said \"hello\" there"), human("b", "e", "He said “hello” there")};
  const auto out = corpus::dedupe(c);
  REQUIRE(out.size() == 1);
  CHECK(out[0].id == "a");
  CHECK(corpus::dedupe({}).empty());
}

TEST_CASE("dedupe matches a pairwise oracle and is idempotent") {
  Rng rng(31);
  Collection c;
  for (int i = 0; i < 450; ++i) {
    c.push_back(human("u" + std::to_string(i), "e", "unique text " + std::to_string(i) + " " +
                                                       testutil::words(rng.below(5), "w")));
  }
  const std::vector<std::string> variants = {"  ", "\t", " \n\n\n", "  "};
  for (int k = 0; k < 50; ++k) {
    const auto& src = c[rng.below(450)];
    std::string t = src.text;
    t.insert(0, variants[k % variants.size()]);
    const auto pos = rng.below(c.size() + 1);
    c.insert(c.begin() + static_cast<long>(pos), human("dup" + std::to_string(k), "e", t));
  }
  // Pairwise oracle: keep a doc unless an earlier doc normalizes to the same text.
  std::vector<std::string> expected;
  for (std::size_t i = 0; i < c.size(); ++i) {
    bool dup = false;
    for (std::size_t j = 0; j < i && !dup; ++j) {
      dup = textnorm::normalize(c[i].text) == textnorm::normalize(c[j].text);
    }
    if (!dup) expected.push_back(c[i].id);
  }
  const auto out = corpus::dedupe(c);
  std::vector<std::string> got;
  for (const auto& d : out) got.push_back(d.id);
  CHECK(got == expected);
  CHECK(out.size() == 450);
  CHECK(corpus::dedupe(out) == out);
}

TEST_CASE("domains lists distinct sorted tags") {
  CHECK(corpus::domains(spread(10, 3)) == std::vector<std::string>{"dom0", "dom1", "dom2"});
}
