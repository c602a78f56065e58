#include "hnm/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "hnm/mirrorgen.hpp"
#include "hnm/rng.hpp"

namespace hnm::synth {
namespace {

struct DomainLexicon {
  std::vector<std::string> nouns;
  std::vector<std::string> verbs;  // past tense
  std::vector<std::string> adjectives;
};

const DomainLexicon& lexicon(const std::string& domain) {
  static const std::map<std::string, DomainLexicon> kLex = {
      {"reviews",
       {{"pasta", "waiter", "patio", "burger", "dessert", "menu", "booth", "salad", "coffee",
         "bartender", "parking", "noodles", "fries", "brunch", "tacos", "manager", "pizza",
         "soup", "reservation", "staff", "counter", "sandwich", "steak", "kitchen"},
        {"ordered", "tried", "waited", "loved", "hated", "grabbed", "shared", "returned",
         "asked", "paid", "tipped", "sat", "finished", "recommended"},
        {"cold", "greasy", "crispy", "slow", "friendly", "rude", "cheap", "pricey", "cozy",
         "loud", "fresh", "bland", "salty", "huge"}}},
      {"news",
       {{"council", "mayor", "budget", "police", "school", "election", "bridge", "storm",
         "court", "residents", "hospital", "union", "officials", "highway", "festival",
         "company", "vote", "senator", "factory", "ordinance", "district", "flooding"},
        {"announced", "approved", "rejected", "reported", "confirmed", "delayed", "closed",
         "opened", "voted", "warned", "said", "filed", "launched", "cut"},
        {"local", "federal", "annual", "unexpected", "contested", "temporary", "regional",
         "public", "former", "proposed", "emergency", "municipal"}}},
      {"essays",
       {{"grandmother", "summer", "soccer", "piano", "teacher", "homework", "friendship",
         "village", "library", "brother", "garden", "exam", "camp", "violin", "museum",
         "neighbor", "bicycle", "winter", "notebook", "classroom", "dog", "hospital"},
        {"learned", "realized", "remembered", "struggled", "practiced", "argued", "noticed",
         "believed", "decided", "failed", "wondered", "discovered", "changed", "missed"},
        {"nervous", "proud", "difficult", "strange", "quiet", "patient", "scared", "curious",
         "honest", "small", "tired", "stubborn"}}},
      {"wiki",
       {{"river", "species", "dynasty", "railway", "cathedral", "province", "genus", "treaty",
         "mountain", "population", "album", "parish", "battle", "fortress", "island",
         "language", "compound", "municipality", "monastery", "orbit", "canal", "census"},
        {"founded", "located", "described", "recorded", "built", "named", "ceded", "released",
         "merged", "discovered", "established", "renamed", "abandoned", "classified"},
        {"northern", "medieval", "endemic", "coastal", "ancient", "eastern", "tributary",
         "baroque", "volcanic", "rural", "colonial", "alpine"}}},
      {"email",
       {{"meeting", "invoice", "deadline", "calendar", "report", "client", "spreadsheet",
         "contract", "schedule", "budget", "presentation", "agenda", "shipment", "vendor",
         "draft", "feedback", "call", "proposal", "team", "office", "update", "slides"},
        {"attached", "forwarded", "scheduled", "moved", "sent", "reviewed", "missed",
         "approved", "updated", "pinged", "cancelled", "signed", "booked", "checked"},
        {"quick", "urgent", "final", "updated", "revised", "weekly", "late", "short",
         "pending", "internal", "rough", "shared"}}},
  };
  static const DomainLexicon kGeneric = {
      {"thing", "place", "week", "problem", "story", "idea", "plan", "question", "result"},
      {"made", "found", "took", "saw", "kept", "left", "told", "tried"},
      {"good", "bad", "new", "old", "big", "little", "odd", "fine"}};
  auto it = kLex.find(domain);
  return it == kLex.end() ? kGeneric : it->second;
}

const std::vector<std::string> kCasualStarts = {
    "honestly", "so", "anyway", "ok so", "well", "also", "btw", "and yeah", "but", "lol"};
const std::vector<std::string> kCasualTails = {
    "i guess", "to be fair", "no joke", "for real", "if that makes sense", "which was weird",
    "more or less", "kinda", "as usual", "at least for me"};
const std::vector<std::string> kContractions = {
    "didn't", "wasn't", "couldn't", "it's", "i'm", "we'd", "they're", "won't", "can't", "i've"};
const std::vector<std::string> kTimes = {
    "yesterday", "last week", "on tuesday", "this morning", "twice", "back in may",
    "after lunch", "around 9", "three times", "last year"};

// Half of the generated-text vocabulary appears in formal human writing too.
const std::vector<std::string> kFormalAdjectives = {
    "significant", "valuable", "essential", "notable", "meaningful", "diverse",
    "impressive", "thoughtful", "memorable", "dynamic", "comprehensive", "remarkable"};
const std::vector<std::string> kFormalVerbs = {
    "provides", "offers", "reflects", "demonstrates", "ensures", "illustrates", "emphasizes",
    "highlights", "enhances"};
const std::vector<std::string> kFormalNouns = {
    "experience", "approach", "aspect", "quality", "impact", "role", "perspective", "element",
    "balance"};
const std::vector<std::string> kFormalOpeners = {
    "Moreover", "Additionally", "Furthermore", "Overall", "Consequently", "In addition",
    "As a result", "Notably"};

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::string w;
  for (char c : s) {
    if (c == ' ') {
      if (!w.empty()) out.push_back(std::move(w));
      w.clear();
    } else {
      w.push_back(c);
    }
  }
  if (!w.empty()) out.push_back(std::move(w));
  return out;
}

std::string rare_word(Rng& rng) {
  const auto& table = mirrorgen::synonym_table();
  auto it = table.begin();
  std::advance(it, static_cast<long>(rng.below(table.size())));
  return it->first;
}

class HumanWriter {
 public:
  HumanWriter(Rng& rng, const DomainLexicon& lex, std::vector<std::string> topic)
      : rng_(rng), lex_(lex), topic_(std::move(topic)) {}

  std::string noun() {
    if (rng_.chance(0.45)) return rng_.pick(topic_);
    if (rng_.chance(0.06)) return rare_word(rng_);
    return rng_.pick(lex_.nouns);
  }
  std::string adj() {
    if (rng_.chance(0.08)) return rare_word(rng_);
    return rng_.pick(lex_.adjectives);
  }
  std::string verb() { return rng_.pick(lex_.verbs); }

  // Casual voice: bursty lengths, first person, contractions, asides.
  std::vector<std::string> casual_sentence(std::size_t len) {
    std::vector<std::string> w;
    if (rng_.chance(0.25)) append(w, rng_.pick(kCasualStarts));
    while (w.size() < len) {
      switch (rng_.below(8)) {
        case 0: append(w, {"i", verb(), "the", noun(), rng_.pick(kTimes)}); break;
        case 1: append(w, {"the", noun(), "was", adj(), "and", "the", noun(), rng_.pick(kContractions), "help"}); break;
        case 2: append(w, {"we", verb(), "a", adj(), noun()}); break;
        case 3: append(w, {"my", noun(), rng_.pick(kContractions), "even", "care"}); break;
        case 4: append(w, {"(" + noun(), "was", adj() + ")"}); break;
        case 5: append(w, {"about", std::to_string(2 + rng_.below(40)), noun() + "s"}); break;
        case 6: append(w, rng_.pick(kCasualTails)); break;
        default: append(w, {"so", "the", adj(), noun(), "just", verb(), "it"}); break;
      }
    }
    w.resize(len);
    return w;
  }

  // Formulaic voice: regular lengths, connectives, formal vocabulary.
  std::vector<std::string> formal_sentence(std::size_t len) {
    std::vector<std::string> w;
    if (rng_.chance(0.45)) {
      auto opener = split(rng_.pick(kFormalOpeners));
      opener.back() += ",";
      w = std::move(opener);
    }
    while (w.size() < len) {
      switch (rng_.below(5)) {
        case 0: append(w, {"the", noun(), rng_.pick(kFormalVerbs), "a", rng_.pick(kFormalAdjectives), rng_.pick(kFormalNouns)}); break;
        case 1: append(w, {rng_.pick(kFormalAdjectives), noun(), "and", adj(), noun()}); break;
        case 2: append(w, {"this", rng_.pick(kFormalNouns), verb(), "the", noun()}); break;
        case 3: append(w, {"for", "the", noun(), "and", "the", noun()}); break;
        default: append(w, {"which", rng_.pick(kFormalVerbs), "its", adj(), noun()}); break;
      }
    }
    w.resize(len);
    return w;
  }

 private:
  static void append(std::vector<std::string>& w, const std::string& phrase) {
    for (auto& p : split(phrase)) w.push_back(std::move(p));
  }
  static void append(std::vector<std::string>& w, std::initializer_list<std::string> more) {
    for (const auto& m : more) append(w, m);
  }

  Rng& rng_;
  const DomainLexicon& lex_;
  std::vector<std::string> topic_;
};

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

const std::vector<std::string> kBusinessFirst = {"Golden", "Blue", "Rusty", "Lucky", "Corner",
                                                 "Little", "Olive", "Harbor", "Maple", "Red"};
const std::vector<std::string> kBusinessLast = {"Spoon", "Door", "Kitchen", "Diner", "Cafe",
                                                "Grill", "Table", "Bistro", "Garden", "Oven"};

}  // namespace

Document make_human(const std::string& domain, const std::string& id, bool formulaic,
                    std::uint64_t seed, std::size_t min_words, std::size_t max_words) {
  Rng rng(seed);
  const auto& lex = lexicon(domain);
  std::vector<std::string> topic;
  auto nouns = lex.nouns;
  rng.shuffle(nouns);
  topic.assign(nouns.begin(), nouns.begin() + static_cast<long>(std::min<std::size_t>(3, nouns.size())));
  HumanWriter writer(rng, lex, topic);

  const std::size_t total = min_words + static_cast<std::size_t>(rng.below(max_words - min_words + 1));
  std::vector<std::vector<std::string>> sentences;
  std::size_t used = 0;
  while (used < total) {
    std::size_t len;
    if (formulaic) {
      len = 12 + rng.below(5);
    } else {
      const auto bucket = rng.below(10);
      len = bucket < 3 ? 3 + rng.below(5) : bucket < 8 ? 8 + rng.below(11) : 19 + rng.below(17);
    }
    if (total - used < len + 3) len = total - used;
    auto s = formulaic ? writer.formal_sentence(len) : writer.casual_sentence(len);
    used += s.size();
    sentences.push_back(std::move(s));
  }

  if (formulaic) {
    // Tell phrases at roughly the rate generated text carries them.
    const double expected = 1.5 * static_cast<double>(total) / 100.0;
    auto n = static_cast<std::size_t>(std::floor(expected));
    if (rng.uniform() < expected - std::floor(expected)) ++n;
    std::vector<std::size_t> order(sentences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::size_t placed = 0;
    for (std::size_t k = 0; placed < n && k < order.size(); ++k) {
      auto& s = sentences[order[k]];
      auto tell = split(rng.pick(textnorm::default_tells()));
      if (tell.size() >= s.size()) continue;
      tell.back() += ",";
      std::vector<std::string> merged = tell;
      merged.insert(merged.end(), s.begin() + static_cast<long>(tell.size()), s.end());
      s = std::move(merged);
      ++placed;
    }
  }

  std::string text;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    auto& s = sentences[i];
    s.front() = capitalize(s.front());
    for (auto& w : s) {
      if (w == "i") w = "I";
      if (w == "i'm") w = "I'm";
      if (w == "i've") w = "I've";
      if (w == "ai") w = "AI";
    }
    while (!s.back().empty() && s.back().back() == ',') s.back().pop_back();
    const char* end = ".";
    if (!formulaic) {
      const auto r = rng.below(20);
      end = r == 0 ? "!!" : r == 1 ? "?" : r == 2 ? "..." : r == 3 ? "!" : ".";
    }
    s.back() += end;
    if (!text.empty()) {
      // Paragraph breaks every few sentences.
      text += (rng.chance(formulaic ? 0.15 : 0.2)) ? "\n\n" : " ";
    }
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (k > 0) text += ' ';
      text += s[k];
    }
  }

  Document d = make_document(id, text, Label::human, domain, "synth:" + domain);
  d.year = 2005 + static_cast<int>(rng.below(17));
  std::string topic_str;
  for (const auto& t : topic) {
    if (!topic_str.empty()) topic_str += ", ";
    topic_str += t;
  }
  d.extra["topic"] = topic_str;
  if (domain == "reviews") {
    d.extra["rating"] = static_cast<int>(1 + rng.below(5));
    d.extra["business"] = "The " + rng.pick(kBusinessFirst) + " " + rng.pick(kBusinessLast);
  }
  if (formulaic) d.extra[kFormulaicKey] = true;
  return d;
}

Collection make_corpus(const CorpusSpec& spec) {
  Collection out;
  out.reserve(spec.domains.size() * spec.humans_per_domain);
  for (const auto& domain : spec.domains) {
    const auto it = spec.hard_fraction.find(domain);
    const double frac = it == spec.hard_fraction.end() ? spec.default_hard_fraction : it->second;
    const auto n_hard = static_cast<std::size_t>(std::llround(frac * spec.humans_per_domain));
    // Formulaic documents are spread through the domain at seeded positions.
    std::vector<std::size_t> slots(spec.humans_per_domain);
    for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
    Rng rng(derive_seed(spec.seed, "hard:" + domain));
    rng.shuffle(slots);
    std::vector<char> hard(spec.humans_per_domain, 0);
    for (std::size_t k = 0; k < n_hard && k < slots.size(); ++k) hard[slots[k]] = 1;
    const std::size_t base = out.size();
    out.resize(base + spec.humans_per_domain);
    for (std::size_t i = 0; i < spec.humans_per_domain; ++i) {
      const std::string id = spec.id_prefix + "-" + domain + "-" + std::to_string(i);
      out[base + i] = make_human(domain, id, hard[i] != 0, derive_seed(spec.seed, id),
                                 spec.min_words, spec.max_words);
    }
  }
  return out;
}

}  // namespace hnm::synth
