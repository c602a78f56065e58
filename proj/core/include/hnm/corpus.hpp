#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hnm {

enum class Label { human = 0, ai = 1 };

std::string_view to_string(Label label);
Label parse_label(std::string_view s);  // throws std::invalid_argument

struct Document {
  std::string id;
  std::string text;
  Label label = Label::human;
  std::string domain;
  std::string source;
  std::optional<int> year;
  std::optional<std::string> generator;
  std::optional<std::string> mirror_of;
  std::size_t word_count = 0;
  // Fields not in the schema, preserved verbatim on round-trip.
  nlohmann::json extra = nlohmann::json::object();

  bool is_human() const { return label == Label::human; }
  bool is_ai() const { return label == Label::ai; }

  friend bool operator==(const Document&, const Document&) = default;
};

using Collection = std::vector<Document>;

// Builds a Document with word_count populated from the text.
Document make_document(std::string id, std::string text, Label label, std::string domain,
                       std::string source = {});

class CorpusError : public std::runtime_error {
 public:
  enum class Kind { io, parse, invariant, duplicate_id, empty_pool, unstratifiable };

  CorpusError(Kind kind, std::string message, std::size_t line = 0,
              std::vector<std::string> ids = {})
      : std::runtime_error(std::move(message)), kind_(kind), line_(line), ids_(std::move(ids)) {}

  Kind kind() const { return kind_; }
  std::size_t line() const { return line_; }  // 1-based, 0 when not line-specific
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  Kind kind_;
  std::size_t line_;
  std::vector<std::string> ids_;
};

namespace corpus {

enum class Format { jsonl, csv };

Format format_from_path(const std::filesystem::path& path);

// Checks the per-document invariants; throws CorpusError(invariant) naming the id.
void validate(const Document& doc);

// Checks id uniqueness and mirror_of links that resolve inside the collection.
void validate(const Collection& docs);

Document from_json(const nlohmann::json& j);  // throws CorpusError(parse/invariant)
nlohmann::json to_json(const Document& doc);

Collection load(const std::filesystem::path& path, Format format);
Collection load(const std::filesystem::path& path);  // format from extension

Collection parse_jsonl(std::string_view content);
Collection parse_csv(std::string_view content);

void save(const std::filesystem::path& path, const Collection& docs);
std::string to_jsonl(const Collection& docs);

struct SplitSpec {
  std::uint64_t seed = 0;
  double holdout_fraction = 0.0;
  bool per_domain = true;
};

struct Split {
  Collection train_pool;
  Collection holdout;
};

// Deterministic partition; both halves keep the pool's relative order.
Split split(const Collection& pool, const SplitSpec& spec);

// Drops later documents whose normalized text hashes equal to an earlier one.
Collection dedupe(const Collection& docs);

// Sorted list of distinct domains.
std::vector<std::string> domains(const Collection& docs);

}  // namespace corpus
}  // namespace hnm
