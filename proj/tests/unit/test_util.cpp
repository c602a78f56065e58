#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

#include "helpers.hpp"
#include "hnm/hash.hpp"
#include "hnm/log.hpp"
#include "hnm/parallel.hpp"
#include "hnm/rational.hpp"
#include "hnm/rng.hpp"

using namespace hnm;

TEST_CASE("fnv1a64 matches published test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("fnv1a128 matches published test vectors") {
  CHECK(fnv1a128("").hex() == "6c62272e07bb014262b821756295c58d");
  CHECK(fnv1a128("a").hex() == "d228cb696f1a8caf78912b704e4a8964");
  CHECK(fnv1a128("a") != fnv1a128("b"));
}

TEST_CASE("rng is reproducible and below() stays in range") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  Rng r(7);
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = r.below(7);
    REQUIRE(v < 7);
    ++hist[v];
  }
  for (int h : hist) CHECK(h > 800);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("shuffle is a seeded permutation") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto a = v, b = v;
  Rng(3).shuffle(a);
  Rng(3).shuffle(b);
  CHECK(a == b);
  CHECK(a != v);
  std::sort(a.begin(), a.end());
  CHECK(a == v);
}

TEST_CASE("derive_seed separates tags") {
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(derive_seed(1, "tag" + std::to_string(i)));
  CHECK(seen.size() == 1000);
  CHECK(derive_seed(1, "x") == derive_seed(1, "x"));
  CHECK(derive_seed(1, "x") != derive_seed(2, "x"));
  CHECK(derive_seed(5, std::uint64_t{1}) != derive_seed(5, std::uint64_t{2}));
}

TEST_CASE("parallel_for output is independent of worker count") {
  std::vector<std::uint64_t> serial(5000), threaded(5000);
  set_workers(1);
  parallel_for(serial.size(), [&](std::size_t i) { serial[i] = splitmix64(i); });
  set_workers(4);
  parallel_for(threaded.size(), [&](std::size_t i) { threaded[i] = splitmix64(i); });
  CHECK(serial == threaded);
  std::vector<std::size_t> idx(5000);
  std::iota(idx.begin(), idx.end(), 0);
  const auto mapped = parallel_map<std::uint64_t>(idx, [](std::size_t i) { return splitmix64(i); });
  CHECK(mapped == serial);
  set_workers(1);
}

TEST_CASE("parallel_for rethrows worker exceptions") {
  set_workers(3);
  CHECK_THROWS_AS(parallel_for(1000, [](std::size_t i) {
                    if (i == 517) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
  set_workers(1);
}

TEST_CASE("rational arithmetic stays in lowest terms") {
  const Rational a(2, 4);
  CHECK(a.num() == 1);
  CHECK(a.den() == 2);
  CHECK((Rational(1, 3) + Rational(1, 6)) == Rational(1, 2));
  CHECK((Rational(3, 4) / 3) == Rational(1, 4));
  CHECK(Rational(1, 3) < Rational(1, 2));
  CHECK(Rational::parse("6/8") == Rational(3, 4));
  CHECK(Rational(3, 4).str() == "3/4");
  CHECK_THROWS(Rational(1, 0));
}

TEST_CASE("log events are single JSON lines") {
  testutil::TempDir dir("log");
  log::set_level(log::Level::info);
  log::attach_file(dir / "run.log");
  log::debug("hidden", {{"x", 1}});
  log::info("shown", {{"x", 2}});
  log::detach_file();
  log::set_level(log::Level::warn);
  const auto text = testutil::read_file(dir / "run.log");
  // The run log keeps every level; the level only filters stderr.
  const auto nl = text.find('\n');
  CHECK(nlohmann::json::parse(text.substr(0, nl))["level"] == "debug");
  const auto j = nlohmann::json::parse(text.substr(nl + 1, text.find('\n', nl + 1) - nl - 1));
  CHECK(j["event"] == "shown");
  CHECK(j["x"] == 2);
  CHECK(j["level"] == "info");
  CHECK(j.contains("ts_ms"));
  CHECK_THROWS_AS(log::parse_level("loud"), std::invalid_argument);
}
