#include <doctest.h>

#include <cmath>
#include <map>

#include "helpers.hpp"
#include "hnm/hash.hpp"
#include "hnm/mirrorgen.hpp"
#include "hnm/model.hpp"
#include "hnm/rng.hpp"
#include "hnm/synth.hpp"
#include "hnm/textnorm.hpp"

using namespace hnm;
using namespace hnm::model;

namespace {

// Reference featurizer: count n-grams in an ordered map keyed by bucket.
FeatureVector naive_featurize(const std::string& text, const FeatureConfig& cfg) {
  std::map<std::uint32_t, std::uint32_t> counts;
  for (int n : cfg.ngram_sizes) {
    for (std::size_t i = 0; i + n <= text.size(); ++i) {
      const auto h = fnv1a64(text.substr(i, n)) % (std::uint64_t{1} << cfg.hash_bits);
      ++counts[static_cast<std::uint32_t>(h)];
    }
  }
  FeatureVector v;
  for (auto [k, c] : counts) {
    v.index.push_back(k);
    v.count.push_back(c);
  }
  return v;
}

std::string random_text(Rng& rng, std::size_t len) {
  static const std::string alphabet = "abcde fghij.,";
  std::string s;
  for (std::size_t i = 0; i < len; ++i) s += alphabet[rng.below(alphabet.size())];
  return s;
}

struct Toy {
  std::vector<FeatureVector> feats;
  std::vector<Label> labels;
  std::vector<const FeatureVector*> ptrs() const {
    std::vector<const FeatureVector*> p;
    for (const auto& f : feats) p.push_back(&f);
    return p;
  }
};

Toy separable(std::size_t n, const FeatureConfig& fc) {
  Toy t;
  for (std::size_t i = 0; i < n; ++i) {
    const bool ai = i % 2 == 0;
    const std::string text = ai ? "the model delves into tapestry " + std::to_string(i)
                                : "hey so i went out lol " + std::to_string(i);
    t.feats.push_back(featurize(text, fc));
    t.labels.push_back(ai ? Label::ai : Label::human);
  }
  return t;
}

}  // namespace

TEST_CASE("featurize examples") {
  CHECK(featurize("").nnz() == 0);
  CHECK(featurize("ab").nnz() == 0);
  CHECK(featurize("aaaa").total() == 3);  // two 3-grams, one 4-gram
  CHECK(featurize("abcde").total() == 3 + 2 + 1);
  const auto v = featurize("aaaa", {.hash_bits = 18, .ngram_sizes = {3}});
  REQUIRE(v.nnz() == 1);
  CHECK(v.index[0] == (fnv1a64("aaa") & 0x3ffff));
  CHECK(v.count[0] == 2);
}

TEST_CASE("featurize matches a naive oracle") {
  Rng rng(5);
  for (int bits : {4, 10, 18}) {
    const FeatureConfig fc{.hash_bits = bits, .ngram_sizes = {3, 4, 5}};
    for (int trial = 0; trial < 100; ++trial) {
      const auto text = random_text(rng, rng.below(121));
      const auto v = featurize(text, fc);
      CHECK(v == naive_featurize(text, fc));
      for (std::size_t k = 1; k < v.index.size(); ++k) CHECK(v.index[k - 1] < v.index[k]);
      for (auto i : v.index) CHECK(i < fc.dimension());
    }
  }
}

TEST_CASE("scores of a zero model are one half") {
  ClassifierModel m;
  CHECK(m.score("anything at all") == doctest::Approx(0.5));
  CHECK(m.score(FeatureVector{}) == doctest::Approx(0.5));
  CHECK(logistic(0.0) == 0.5);
  CHECK(logistic(-800.0) >= 0.0);
  CHECK(logistic(800.0) <= 1.0);
}

TEST_CASE("score is the logistic of the normalized dot product") {
  ClassifierModel m({.hash_bits = 8, .ngram_sizes = {3}});
  Rng rng(3);
  for (auto& w : m.mutable_weights()) w = rng.uniform() - 0.5;
  m.set_bias(0.25);
  const auto x = featurize("banana bandana", m.features());
  double dot = 0, norm = 0;
  for (std::size_t k = 0; k < x.nnz(); ++k) {
    dot += m.weights()[x.index[k]] * x.count[k];
    norm += double(x.count[k]) * x.count[k];
  }
  const double z = 0.25 + dot / std::sqrt(norm);
  CHECK(m.score(x) == doctest::Approx(1.0 / (1.0 + std::exp(-z))).epsilon(1e-12));
}

TEST_CASE("batch prediction equals single prediction") {
  ClassifierModel m({.hash_bits = 10, .ngram_sizes = {3, 4}});
  Rng rng(8);
  for (auto& w : m.mutable_weights()) w = rng.uniform() * 2 - 1;
  std::vector<std::string> texts;
  for (int i = 0; i < 300; ++i) texts.push_back(random_text(rng, 50));
  const auto batch = predict_batch(m, texts);
  for (std::size_t i = 0; i < texts.size(); ++i) CHECK(batch[i] == predict(m, texts[i]));
  std::vector<FeatureVector> feats;
  for (const auto& t : texts) feats.push_back(featurize(t, m.features()));
  std::vector<const FeatureVector*> ptrs;
  for (const auto& f : feats) ptrs.push_back(&f);
  CHECK(predict_batch(m, ptrs) == batch);
}

TEST_CASE("separable data is learned") {
  const FeatureConfig fc{.hash_bits = 12};
  const auto toy = separable(200, fc);
  const auto ptrs = toy.ptrs();
  TrainConfig cfg;
  cfg.max_epochs = 5;
  const auto r = train(ptrs, toy.labels, cfg, fc);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ptrs.size(); ++i) {
    const bool ai = r.model.score(*ptrs[i]) > 0.5;
    correct += ai == (toy.labels[i] == Label::ai);
  }
  CHECK(correct == ptrs.size());
}

TEST_CASE("training is deterministic and keeps the best checkpoint") {
  const FeatureConfig fc{.hash_bits = 12};
  const auto toy = separable(120, fc);
  const auto ptrs = toy.ptrs();
  TrainConfig cfg;
  cfg.seed = 9;
  const auto a = train(ptrs, toy.labels, cfg, fc);
  const auto b = train(ptrs, toy.labels, cfg, fc);
  CHECK(a.model == b.model);
  CHECK(a.model.serialize() == b.model.serialize());
  REQUIRE(!a.history.empty());
  for (const auto& e : a.history) CHECK(a.best_validation_loss <= e.validation_loss);
  CHECK(a.history[a.best_epoch - a.history.front().epoch].validation_loss == a.best_validation_loss);
  cfg.seed = 10;
  CHECK(!(train(ptrs, toy.labels, cfg, fc).model == a.model));
}

TEST_CASE("training input errors") {
  const FeatureConfig fc{.hash_bits = 8};
  auto toy = separable(20, fc);
  for (auto& l : toy.labels) l = Label::human;
  const auto ptrs = toy.ptrs();
  CHECK_THROWS_AS(train(ptrs, toy.labels, TrainConfig{}, fc), TrainError);
  std::vector<Label> short_labels(3, Label::ai);
  CHECK_THROWS(train(ptrs, short_labels, TrainConfig{}, fc));
  TrainConfig bad;
  bad.validation_fraction = 1.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = {};
  bad.patience = 0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("analytic gradient matches finite differences") {
  const FeatureConfig fc{.hash_bits = 6, .ngram_sizes = {3, 4}};
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    Toy toy;
    std::vector<double> cw;
    for (int i = 0; i < 12; ++i) {
      toy.feats.push_back(featurize(random_text(rng, 40), fc));
      toy.labels.push_back(rng.uniform() < 0.5 ? Label::ai : Label::human);
      cw.push_back(0.5 + rng.uniform());
    }
    ClassifierModel m(fc);
    for (auto& w : m.mutable_weights()) w = rng.uniform() * 2 - 1;
    m.set_bias(rng.uniform() - 0.5);
    const auto ptrs = toy.ptrs();
    const double l2 = 1e-3;
    const auto g = loss_and_gradient(m, ptrs, toy.labels, cw, l2);
    const double h = 1e-6;
    for (std::size_t k = 0; k < m.weights().size(); ++k) {
      auto plus = m, minus = m;
      plus.mutable_weights()[k] += h;
      minus.mutable_weights()[k] -= h;
      const double num = (loss_and_gradient(plus, ptrs, toy.labels, cw, l2).loss -
                          loss_and_gradient(minus, ptrs, toy.labels, cw, l2).loss) / (2 * h);
      CHECK(std::abs(num - g.grad_w[k]) <= 1e-6 * std::max(1.0, std::abs(num)));
    }
    auto plus = m, minus = m;
    plus.set_bias(m.bias() + h);
    minus.set_bias(m.bias() - h);
    const double num = (loss_and_gradient(plus, ptrs, toy.labels, cw, l2).loss -
                        loss_and_gradient(minus, ptrs, toy.labels, cw, l2).loss) / (2 * h);
    CHECK(std::abs(num - g.grad_b) <= 1e-6 * std::max(1.0, std::abs(num)));
  }
}

TEST_CASE("serialization round trip and format errors") {
  ClassifierModel m({.hash_bits = 9, .ngram_sizes = {3, 5}});
  Rng rng(2);
  for (auto& w : m.mutable_weights()) w = rng.uniform();
  m.set_bias(-1.5);
  m.mutable_meta() = {.seed = 77, .rounds_seen = 3};
  const auto bytes = m.serialize();
  CHECK(ClassifierModel::deserialize(bytes) == m);

  testutil::TempDir dir("model");
  m.save(dir / "m.bin");
  CHECK(ClassifierModel::load(dir / "m.bin") == m);

  auto bad = bytes;
  bad[0] ^= 0x55;
  CHECK_THROWS_AS(ClassifierModel::deserialize(bad), ModelFormatError);
  CHECK_THROWS_AS(ClassifierModel::deserialize(bytes.substr(0, bytes.size() - 8)), ModelFormatError);
  CHECK_THROWS_AS(ClassifierModel::deserialize(""), ModelFormatError);
}

TEST_CASE("feature cache returns stable featurizations") {
  Collection docs;
  for (int i = 0; i < 50; ++i) docs.push_back(testutil::human("d" + std::to_string(i), "email", testutil::words(20)));
  FeatureCache cache({.hash_bits = 10});
  cache.ensure(docs);
  cache.ensure(docs);
  CHECK(cache.size() == 50);
  const auto ptrs = cache.lookup(docs);
  for (std::size_t i = 0; i < docs.size(); ++i) CHECK(*ptrs[i] == featurize(docs[i].text, {.hash_bits = 10}));
}

TEST_CASE("a trained detector separates simulacrum mirrors from humans") {
  const auto humans = synth::make_corpus({.seed = 4, .humans_per_domain = 200});
  const auto templates = mirrorgen::TemplateSet::builtin();
  mirrorgen::GeneratorSpec spec;
  spec.seed = 4;
  auto gen = mirrorgen::make_generator(spec);
  const auto batch = mirrorgen::mirror_documents(humans, templates, {gen.get()}, {.seed = 4});
  Collection all = humans;
  for (auto d : batch.mirrors) all.push_back(d);
  for (auto& d : all) d.text = textnorm::normalize(d.text);
  const auto r = train(all, TrainConfig{});
  double h = 0, a = 0;
  std::size_t nh = 0, na = 0;
  for (const auto& d : all) {
    const double s = r.model.score(d.text);
    (d.label == Label::ai ? a : h) += s;
    ++(d.label == Label::ai ? na : nh);
  }
  CHECK(a / na > h / nh + 0.3);
}
