#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hnm/corpus.hpp"

namespace hnm::synth {

// Seeded generator for a desk-scale human corpus. Most documents are written
// in a casual, bursty voice; a planted "formulaic" subpopulation uses regular
// sentences, formal connectives, tell phrases, and part of the generated-text
// vocabulary, which makes those documents hard negatives for a detector.
struct CorpusSpec {
  std::uint64_t seed = 7;
  std::vector<std::string> domains = {"email", "essays", "news", "reviews", "wiki"};
  std::size_t humans_per_domain = 2000;
  // Share of formulaic documents per domain; domains not listed use default_hard_fraction.
  std::map<std::string, double> hard_fraction = {
      {"email", 0.04}, {"essays", 0.06}, {"news", 0.03}, {"reviews", 0.05}, {"wiki", 0.08}};
  double default_hard_fraction = 0.05;
  std::size_t min_words = 80;
  std::size_t max_words = 260;
  std::string id_prefix = "h";
};

Collection make_corpus(const CorpusSpec& spec);

// One document; `formulaic` selects the hard-negative voice.
Document make_human(const std::string& domain, const std::string& id, bool formulaic,
                    std::uint64_t seed, std::size_t min_words = 80, std::size_t max_words = 260);

// Metadata key marking planted formulaic documents ("formulaic": true).
inline constexpr const char* kFormulaicKey = "formulaic";

}  // namespace hnm::synth
