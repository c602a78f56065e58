#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hnm::textnorm {

inline constexpr std::size_t kDefaultMinWords = 50;

// Leading phrases that mark an LLM preamble paragraph. Matching is
// case-sensitive against the literal strings.
const std::vector<std::string>& boilerplate_prefixes();

struct StripResult {
  std::string text;
  bool stripped = false;
};

// Removes the first paragraph (up to the first blank line, or the whole text)
// when it begins with one of boilerplate_prefixes() after leading whitespace.
StripResult strip_boilerplate(std::string_view text);

// Emoji removal, ASCII transliteration, whitespace normalization. Idempotent;
// the output holds only printable ASCII, spaces, and '\n'.
std::string normalize(std::string_view text);

// The three stages of normalize(), exposed for the fixed cleaning pipeline.
std::string remove_emoji(std::string_view text, std::size_t* removed = nullptr);
std::string transliterate(std::string_view text, std::size_t* dropped = nullptr);
std::string normalize_whitespace(std::string_view text, std::size_t* removed = nullptr);

// Number of maximal non-whitespace runs in normalize(text).
std::size_t word_count(std::string_view text);

// Same count on text that is already normalized (skips the normalize pass).
std::size_t count_words_normalized(std::string_view normalized);

bool reject_short(std::string_view text, std::size_t min_words = kDefaultMinWords);

struct TellHit {
  std::string phrase;
  std::size_t position = 0;  // code-point offset into the searched text

  friend bool operator==(const TellHit&, const TellHit&) = default;
};

class TellLexicon {
 public:
  TellLexicon();  // built-in defaults
  explicit TellLexicon(std::vector<std::string> phrases);

  // One phrase per line; blank lines and lines starting with '#' are skipped.
  static TellLexicon from_file(const std::filesystem::path& path);

  const std::vector<std::string>& phrases() const { return phrases_; }

 private:
  std::vector<std::string> phrases_;  // lower-cased
};

const std::vector<std::string>& default_tells();

// Case-insensitive whole-word matches, sorted by position then phrase.
std::vector<TellHit> find_tells(std::string_view text, const TellLexicon& lexicon = TellLexicon());

enum class Rejection { too_short, empty_after_strip };

std::string_view to_string(Rejection r);

struct NormalizationReport {
  bool stripped_boilerplate = false;
  std::size_t removed_char_count = 0;
  std::optional<Rejection> rejected;
  std::vector<TellHit> tells_found;  // positions index into the cleaned text
};

struct CleanResult {
  std::string text;
  NormalizationReport report;
};

// Fixed pipeline: emoji removal -> transliteration -> boilerplate strip ->
// whitespace normalization -> short rejection (counted after stripping).
CleanResult clean(std::string_view raw, std::size_t min_words = kDefaultMinWords,
                  const TellLexicon& lexicon = TellLexicon());

// UTF-8 helpers shared with the tell scanner.
std::vector<char32_t> decode_utf8(std::string_view text);
void append_utf8(std::string& out, char32_t cp);

}  // namespace hnm::textnorm
