#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "hnm/mirrorgen.hpp"
#include "hnm/rng.hpp"

namespace hnm::mirrorgen {
namespace {

const std::vector<std::string> kAdjectives = {
    "vibrant",   "seamless",   "comprehensive", "remarkable", "exceptional", "significant",
    "valuable",  "essential",  "notable",       "meaningful", "engaging",    "diverse",
    "robust",    "innovative", "memorable",     "impressive", "thoughtful",  "dynamic",
    "intricate", "profound",   "captivating",   "invaluable", "pivotal",     "nuanced"};

const std::vector<std::string> kVerbs = {
    "highlights", "showcases",  "offers",      "provides", "enhances", "underscores",
    "fosters",    "ensures",    "reflects",    "demonstrates", "captures", "embodies",
    "elevates",   "illustrates", "emphasizes", "navigates", "unlocks",  "cultivates"};

const std::vector<std::string> kNouns = {
    "experience", "approach", "aspect",      "journey", "landscape",  "realm",
    "insight",    "balance",  "element",     "perspective", "commitment", "atmosphere",
    "quality",    "impact",   "role",        "tapestry", "testament",  "framework"};

const std::vector<std::string> kOpeners = {
    "Moreover", "Additionally", "Furthermore", "Overall", "Ultimately",
    "Notably",  "Importantly",  "In addition", "As a result", "Consequently"};

const std::set<std::string, std::less<>> kStopwords = {
    "about", "above", "after", "again", "also",  "because", "been",  "before", "being",
    "could", "does",  "doing", "down",  "each",  "from",    "have",  "having", "here",
    "into",  "just",  "make",  "more",  "most",  "only",    "other", "over",   "same",
    "should", "some", "such",  "than",  "that",  "their",   "them",  "then",   "there",
    "these", "they",  "this",  "those", "through", "under", "until", "very",   "were",
    "what",  "when",  "where", "which", "while", "will",    "with",  "would",  "your",
    "write", "words", "around", "long", "start", "sentences", "following", "title",
    "give",  "response", "include", "information", "besides", "actual", "word", "count"};

std::vector<std::string> content_words(const MirrorPrompt& prompt) {
  std::vector<std::string> out;
  std::set<std::string, std::less<>> seen;
  for (const auto& [name, value] : prompt.slots) {
    if (name == "length") continue;
    std::string word;
    auto flush = [&] {
      if (word.size() >= 4 && !kStopwords.contains(word) && seen.insert(word).second) {
        out.push_back(word);
      }
      word.clear();
    };
    for (char c : value) {
      if (std::isalpha(static_cast<unsigned char>(c))) {
        word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      } else {
        flush();
      }
    }
    flush();
  }
  return out;
}

// Mean words per sentence in the source material, if any is present.
double source_sentence_mean(const MirrorPrompt& prompt) {
  for (const char* key : {"document", "excerpt"}) {
    auto it = prompt.slots.find(key);
    if (it == prompt.slots.end()) continue;
    std::size_t words = 0;
    std::size_t sentences = 0;
    bool in_word = false;
    for (char c : it->second) {
      const bool ws = std::isspace(static_cast<unsigned char>(c));
      if (!ws && !in_word) ++words;
      in_word = !ws;
      if (c == '.' || c == '!' || c == '?') ++sentences;
    }
    if (words > 0) return static_cast<double>(words) / std::max<std::size_t>(1, sentences);
  }
  return 14.0;
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::string w;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!w.empty()) out.push_back(std::move(w));
      w.clear();
    } else {
      w.push_back(c);
    }
  }
  if (!w.empty()) out.push_back(std::move(w));
  return out;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

class Writer {
 public:
  Writer(Rng& rng, const std::vector<std::string>& content, const SimulacrumConfig& cfg)
      : rng_(rng), content_(content), cfg_(cfg) {}

  std::string content_word() {
    if (content_.empty()) return rng_.pick(kNouns);
    std::string w = rng_.pick(content_);
    const auto& table = synonym_table();
    if (auto it = table.find(w); it != table.end() && rng_.chance(cfg_.synonym_rate)) {
      return it->second;
    }
    return w;
  }

  // Appends clause words until the sentence holds `target` words.
  void fill(std::vector<std::string>& words, std::size_t target) {
    while (words.size() < target) {
      switch (rng_.below(6)) {
        case 0: append(words, {"the", content_word(), rng_.pick(kVerbs), "a", rng_.pick(kAdjectives), rng_.pick(kNouns)}); break;
        case 1: append(words, {rng_.pick(kAdjectives), content_word(), "and", rng_.pick(kAdjectives), rng_.pick(kNouns)}); break;
        case 2: append(words, {"this", rng_.pick(kNouns), rng_.pick(kVerbs), "the", content_word()}); break;
        case 3: append(words, {"with", "a", rng_.pick(kAdjectives), "focus", "on", content_word()}); break;
        case 4: append(words, {"for", "the", content_word(), "and", "the", content_word()}); break;
        default: append(words, {"which", rng_.pick(kVerbs), "its", rng_.pick(kAdjectives), rng_.pick(kNouns)}); break;
      }
    }
    words.resize(target);
  }

 private:
  static void append(std::vector<std::string>& words, std::initializer_list<std::string> more) {
    words.insert(words.end(), more.begin(), more.end());
  }

  Rng& rng_;
  const std::vector<std::string>& content_;
  const SimulacrumConfig& cfg_;
};

}  // namespace

const std::map<std::string, std::string, std::less<>>& synonym_table() {
  static const std::map<std::string, std::string, std::less<>> kTable = {
      {"ameliorate", "improve"},   {"bedraggled", "messy"},    {"boisterous", "loud"},
      {"cacophony", "noise"},      {"capacious", "roomy"},     {"cantankerous", "grumpy"},
      {"convivial", "friendly"},   {"copious", "plenty"},      {"crestfallen", "sad"},
      {"dilapidated", "rundown"},  {"ebullient", "cheerful"},  {"egregious", "terrible"},
      {"ersatz", "fake"},          {"fastidious", "careful"},  {"gargantuan", "huge"},
      {"garrulous", "chatty"},     {"gossamer", "delicate"},   {"halcyon", "peaceful"},
      {"imbroglio", "mess"},       {"insouciant", "carefree"}, {"lackadaisical", "lazy"},
      {"lugubrious", "gloomy"},    {"mellifluous", "smooth"},  {"nonplussed", "confused"},
      {"obstreperous", "unruly"},  {"palatable", "tasty"},     {"parsimonious", "stingy"},
      {"penurious", "poor"},       {"perfunctory", "quick"},   {"persnickety", "fussy"},
      {"quixotic", "idealistic"},  {"ramshackle", "shaky"},    {"recalcitrant", "stubborn"},
      {"sagacious", "wise"},       {"scrumptious", "delicious"}, {"serendipitous", "lucky"},
      {"superfluous", "extra"},    {"taciturn", "quiet"},      {"truculent", "hostile"},
      {"ubiquitous", "common"},    {"vexing", "annoying"},     {"wizened", "wrinkled"}};
  return kTable;
}

std::string simulacrum_title(const MirrorPrompt& prompt, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "title"));
  const auto content = content_words(prompt);
  auto word = [&] { return capitalize(content.empty() ? rng.pick(kNouns) : rng.pick(content)); };
  return "The " + capitalize(rng.pick(kAdjectives)) + " " + word() + " of " + word();
}

std::string simulacrum_generate(const MirrorPrompt& prompt, std::uint64_t seed,
                                const SimulacrumConfig& cfg) {
  Rng rng(seed);
  const auto content = content_words(prompt);
  Writer writer(rng, content, cfg);

  const double target = static_cast<double>(prompt.target_words > 0 ? prompt.target_words : 200);
  const double jitter = (2.0 * rng.uniform() - 1.0) * cfg.length_jitter;
  const auto total = static_cast<std::size_t>(std::max(1.0, std::round(target * (1.0 + jitter))));

  const double mean = std::clamp(source_sentence_mean(prompt), 8.0, 24.0);
  const int spread = std::max(0, cfg.sentence_spread);

  std::vector<std::vector<std::string>> sentences;
  std::size_t used = 0;
  if (prompt.style == Style::continuation) {
    if (auto it = prompt.slots.find("excerpt"); it != prompt.slots.end()) {
      auto words = split_words(it->second);
      if (words.size() > total) words.resize(total);
      used = words.size();
      if (!words.empty()) sentences.push_back(std::move(words));
    }
  }
  const std::size_t opening = sentences.size();

  while (used < total) {
    const long delta = spread == 0 ? 0 : static_cast<long>(rng.below(2 * spread + 1)) - spread;
    auto len = static_cast<std::size_t>(std::max(3L, std::lround(mean) + delta));
    if (total - used < len + 3) len = total - used;  // fold a short tail into this sentence
    std::vector<std::string> words;
    if (rng.chance(0.3)) {
      auto opener = split_words(rng.pick(kOpeners));
      if (opener.size() + 3 <= len) {
        words = std::move(opener);
        words.back() += ",";
      }
    }
    writer.fill(words, len);
    used += words.size();
    sentences.push_back(std::move(words));
  }

  // Tell injection: expected rate per 100 words, placed at sentence starts.
  const double expected = cfg.tell_rate * static_cast<double>(total) / 100.0;
  auto n_tells = static_cast<std::size_t>(std::floor(expected));
  if (rng.uniform() < expected - std::floor(expected)) ++n_tells;
  std::vector<std::size_t> slots;
  for (std::size_t i = opening; i < sentences.size(); ++i) slots.push_back(i);
  rng.shuffle(slots);
  if (!cfg.tells.empty()) {
    std::size_t placed = 0;
    for (std::size_t k = 0; placed < n_tells && k < slots.size(); ++k) {
      auto& s = sentences[slots[k]];
      auto tell = split_words(rng.pick(cfg.tells));
      if (tell.empty() || tell.size() >= s.size()) continue;
      tell.back() += ",";
      // Replace the sentence head so the sentence keeps its length.
      std::vector<std::string> merged = tell;
      merged.insert(merged.end(), s.begin() + static_cast<long>(tell.size()), s.end());
      s = std::move(merged);
      ++placed;
    }
  }

  std::string out;
  if (cfg.preamble_rate > 0 && rng.chance(cfg.preamble_rate)) {
    out += "Sure! Here is the " + prompt.domain + " piece you asked for:\n\n";
  }
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    auto& s = sentences[i];
    if (s.empty()) continue;
    if (i >= opening) {
      s.front() = capitalize(s.front());
      for (auto& w : s) {
        if (w == "i") w = "I";
        if (w == "ai") w = "AI";
      }
      auto& last = s.back();
      while (!last.empty() && last.back() == ',') last.pop_back();
      last += ".";
    }
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (!out.empty() && out.back() != '\n') out += ' ';
      out += s[k];
    }
  }
  return out;
}

std::string SimulacrumGenerator::complete(const MirrorPrompt& prompt, const std::vector<Turn>& turns,
                                          std::uint64_t seed) {
  // The first call of a double prompt asks for the title only.
  if (prompt.pending_slot && turns.size() < prompt.turns.size()) {
    return simulacrum_title(prompt, seed);
  }
  return simulacrum_generate(prompt, seed, cfg_);
}

}  // namespace hnm::mirrorgen
