#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hnm/corpus.hpp"
#include "hnm/textnorm.hpp"

namespace hnm::mirrorgen {

enum class Role { prompt, assistant };
enum class Style { single, double_prompt, continuation };

std::string_view to_string(Role r);
std::string_view to_string(Style s);
Style parse_style(std::string_view s);

struct Turn {
  Role role = Role::prompt;
  std::string text;
  friend bool operator==(const Turn&, const Turn&) = default;
};

struct MirrorTemplate {
  std::string template_id;
  std::string domain;
  Style style = Style::single;
  std::vector<Turn> turns;  // text holds <slot_name> placeholders
  std::optional<std::string> anti_tell_suffix;

  // Slot the first generator call fills in a double_prompt template.
  std::optional<std::string> assistant_slot() const;
  std::vector<std::string> slots() const;
};

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Template file: "key: value" header lines (template_id, domain, style,
// anti_tell_suffix), a line "---", then turns introduced by "[prompt]" or
// "[assistant]" lines. Lines starting with '#' in the header are comments.
MirrorTemplate parse_template(std::string_view content);
MirrorTemplate load_template(const std::filesystem::path& path);
void validate(const MirrorTemplate& t);

// All *.tmpl files in a directory, keyed by domain (sorted by template_id).
class TemplateSet {
 public:
  TemplateSet() = default;
  explicit TemplateSet(std::vector<MirrorTemplate> templates);
  static TemplateSet load_dir(const std::filesystem::path& dir);
  static TemplateSet builtin();  // the templates bundled under core/data/templates

  // Deterministic choice among the domain's templates, keyed by document id.
  const MirrorTemplate& for_document(const Document& doc) const;
  bool has_domain(std::string_view domain) const;
  const std::vector<MirrorTemplate>& all() const { return templates_; }

 private:
  std::vector<MirrorTemplate> templates_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> by_domain_;
};

struct MirrorPrompt {
  std::string source_id;
  std::string domain;
  std::string template_id;
  Style style = Style::single;
  std::vector<Turn> turns;
  std::optional<std::string> pending_slot;  // unresolved until the first call returns
  std::size_t target_words = 0;
  std::map<std::string, std::string> slots;  // resolved slot values

  friend bool operator==(const MirrorPrompt&, const MirrorPrompt&) = default;
};

class PromptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Nearest multiple of 50 (halves round up), never below 50.
std::size_t length_target(std::size_t words);

// First two sentences of normalized text (the whole text if it has fewer).
std::string leading_sentences(std::string_view normalized, std::size_t count = 2);

MirrorPrompt build_prompt(const Document& doc, const MirrorTemplate& t);

// Substitutes the pending slot into every turn and clears it.
MirrorPrompt resolve_pending(MirrorPrompt prompt, std::string_view value);

// ---------------------------------------------------------------------------
// Generators

struct SimulacrumConfig {
  double tell_rate = 1.5;        // injected tell phrases per 100 words
  double synonym_rate = 0.10;    // probability a table word is swapped for its common synonym
  double length_jitter = 0.08;   // |output/target - 1| stays below this (< 0.10)
  int sentence_spread = 2;       // sentence lengths within mean +/- spread
  double preamble_rate = 0.0;    // chance of an LLM-style "Sure! ..." first paragraph
  std::vector<std::string> tells = textnorm::default_tells();
};

struct GeneratorSpec {
  std::string name = "simulacrum";
  std::string endpoint = "offline";  // "offline" or an http(s) base URL
  std::string adapter = "openai";    // remote response shape: "openai" or "text"
  std::string path = "/v1/chat/completions";
  std::string model;                 // remote model id; defaults to name
  std::string api_key_env = "HNM_GENERATOR_API_KEY";
  double temperature = 1.0;
  int max_tokens = 1024;
  std::size_t max_in_flight = 4;
  int retry_budget = 3;
  int backoff_ms = 200;  // first retry delay; doubles each attempt
  int timeout_s = 60;
  std::optional<std::uint64_t> seed;  // required for offline generators
  SimulacrumConfig simulacrum;
  std::optional<std::filesystem::path> audit_log;

  bool offline() const { return endpoint == "offline"; }
};

void validate(const GeneratorSpec& spec);  // throws std::invalid_argument

class GeneratorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Generator {
 public:
  virtual ~Generator() = default;
  virtual const std::string& name() const = 0;
  // Returns the assistant reply to the given turn list. `prompt` carries the
  // slot context; remote backends only look at `turns`.
  virtual std::string complete(const MirrorPrompt& prompt, const std::vector<Turn>& turns,
                               std::uint64_t seed) = 0;
};

std::unique_ptr<Generator> make_generator(const GeneratorSpec& spec);

// Deterministic offline stand-in for an LLM.
std::string simulacrum_generate(const MirrorPrompt& prompt, std::uint64_t seed,
                                const SimulacrumConfig& cfg = {});
std::string simulacrum_title(const MirrorPrompt& prompt, std::uint64_t seed);

// Rare word -> common synonym table used by the simulacrum.
const std::map<std::string, std::string, std::less<>>& synonym_table();

class SimulacrumGenerator final : public Generator {
 public:
  SimulacrumGenerator(std::string name, SimulacrumConfig cfg)
      : name_(std::move(name)), cfg_(std::move(cfg)) {}
  const std::string& name() const override { return name_; }
  std::string complete(const MirrorPrompt& prompt, const std::vector<Turn>& turns,
                       std::uint64_t seed) override;

 private:
  std::string name_;
  SimulacrumConfig cfg_;
};

// Generic chat-completion client: POST {"model","messages":[{role,content}],...}
// and read either choices[0].message.content ("openai") or "text" ("text").
class RemoteChatGenerator final : public Generator {
 public:
  explicit RemoteChatGenerator(GeneratorSpec spec);
  ~RemoteChatGenerator() override;
  const std::string& name() const override { return spec_.name; }
  std::string complete(const MirrorPrompt& prompt, const std::vector<Turn>& turns,
                       std::uint64_t seed) override;

  std::size_t peak_in_flight() const;

 private:
  struct State;
  GeneratorSpec spec_;
  std::unique_ptr<State> state_;
};

// ---------------------------------------------------------------------------
// Mirror generation

struct MirrorOptions {
  std::size_t min_words = textnorm::kDefaultMinWords;
  int max_attempts = 3;  // rejected generations are retried with a fresh seed
  std::uint64_t seed = 0;
  std::size_t fanout = 1;  // mirrors per human document
  textnorm::TellLexicon lexicon;
};

struct MirrorOutcome {
  std::optional<Document> mirror;
  std::optional<textnorm::Rejection> rejection;  // last rejection when no mirror
  int attempts = 0;
  std::string error;  // transport failure text, if any
};

std::string mirror_id(std::string_view source_id, std::size_t fanout_index);

// One mirror for one prompt: generator call(s), cleaning, rejection retries.
// Throws GeneratorError if the backend fails beyond its retry budget.
MirrorOutcome generate_mirror(const MirrorPrompt& prompt, Generator& gen,
                              const MirrorOptions& opts, std::size_t fanout_index = 0);

struct MirrorRequest {
  const Document* source = nullptr;
  std::size_t fanout_index = 0;
  std::size_t generator_index = 0;
};

struct BatchResult {
  Collection mirrors;                 // accepted mirrors in request order
  std::vector<MirrorOutcome> outcomes;  // aligned with requests
  std::size_t rejected = 0;
  std::size_t failed = 0;
};

// Builds prompts and mirrors every human document `fanout` times, assigning
// generators round-robin by request index. Bounded by `max_concurrency`
// worker threads; results are restored to request order. Failed items are
// logged and skipped.
BatchResult mirror_documents(const Collection& humans, const TemplateSet& templates,
                             const std::vector<Generator*>& generators, const MirrorOptions& opts,
                             std::size_t max_concurrency = 1);

}  // namespace hnm::mirrorgen
