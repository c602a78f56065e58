#include "hnm/textnorm.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <stdexcept>

namespace hnm::textnorm {
namespace {

struct TranslitEntry {
  char32_t cp;
  const char* ascii;
};

constexpr TranslitEntry kTranslit[] = {
#include "translit_table.inc"
};

const char* lookup_translit(char32_t cp) {
  const auto* end = std::end(kTranslit);
  const auto* it = std::lower_bound(std::begin(kTranslit), end, cp,
                                    [](const TranslitEntry& e, char32_t c) { return e.cp < c; });
  if (it != end && it->cp == cp) return it->ascii;
  return nullptr;
}

bool is_emoji(char32_t cp) {
  return (cp >= 0x1F000 && cp <= 0x1FAFF) ||  // pictographs, emoticons, flags, symbols
         (cp >= 0x2600 && cp <= 0x27BF) ||    // misc symbols, dingbats
         (cp >= 0x2300 && cp <= 0x23FF) ||    // misc technical (watch, hourglass, ...)
         (cp >= 0x2B00 && cp <= 0x2BFF) ||    // arrows/stars used as emoji
         (cp >= 0xFE00 && cp <= 0xFE0F) ||    // variation selectors
         (cp >= 0xE0000 && cp <= 0xE007F) ||  // tag sequences
         cp == 0x200D || cp == 0x20E3 || cp == 0x3030 || cp == 0x303D || cp == 0x3297 ||
         cp == 0x3299 || cp == 0x2B50 || cp == 0x2B55;
}

bool is_hspace(char c) { return c == ' ' || c == '\t' || c == '\v' || c == '\f' || c == '\r'; }

bool is_word_cp(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9') ||
           cp == '_';
  }
  return cp >= 0xC0 && cp <= 0x24F && cp != 0xD7 && cp != 0xF7;
}

char32_t ascii_lower(char32_t cp) { return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp; }

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
  }
  return out;
}

bool line_is_blank(std::string_view text, std::size_t begin, std::size_t end) {
  for (std::size_t i = begin; i < end; ++i) {
    if (!is_hspace(text[i])) return false;
  }
  return true;
}

}  // namespace

std::vector<char32_t> decode_utf8(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    }
    int len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    bool ok = true;
    for (int k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

const std::vector<std::string>& boilerplate_prefixes() {
  static const std::vector<std::string> kPrefixes = {
      "Sure", "Here is a", "Title:", "Abstract:", "I have:", "I'm happy to help"};
  return kPrefixes;
}

StripResult strip_boilerplate(std::string_view text) {
  std::size_t start = 0;
  while (start < text.size() && (is_hspace(text[start]) || text[start] == '\n')) ++start;
  const std::string_view head = text.substr(start);

  bool matched = false;
  for (const auto& prefix : boilerplate_prefixes()) {
    if (head.starts_with(prefix)) {
      matched = true;
      break;
    }
  }
  // The curly-apostrophe spelling of "I'm happy to help".
  if (!matched && head.starts_with("I\xE2\x80\x99m happy to help")) matched = true;
  if (!matched) return {std::string(text), false};

  // Find the first blank line after the paragraph start.
  std::size_t line_begin = start;
  std::size_t rest = std::string_view::npos;
  while (line_begin < text.size()) {
    std::size_t nl = text.find('\n', line_begin);
    const std::size_t line_end = nl == std::string_view::npos ? text.size() : nl;
    if (line_begin > start && line_is_blank(text, line_begin, line_end)) {
      rest = line_end;
      break;
    }
    if (nl == std::string_view::npos) break;
    line_begin = nl + 1;
  }
  if (rest == std::string_view::npos) return {std::string(), true};

  while (rest < text.size() && (is_hspace(text[rest]) || text[rest] == '\n')) ++rest;
  return {std::string(text.substr(rest)), true};
}

std::string remove_emoji(std::string_view text, std::size_t* removed) {
  std::string out;
  out.reserve(text.size());
  std::size_t n = 0;
  for (char32_t cp : decode_utf8(text)) {
    if (is_emoji(cp)) {
      ++n;
      continue;
    }
    append_utf8(out, cp);
  }
  if (removed) *removed = n;
  return out;
}

std::string transliterate(std::string_view text, std::size_t* dropped) {
  std::string out;
  out.reserve(text.size());
  std::size_t n = 0;
  for (char32_t cp : decode_utf8(text)) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
      continue;
    }
    if (const char* ascii = lookup_translit(cp)) {
      if (*ascii == '\0') ++n;
      out += ascii;
    } else {
      ++n;
    }
  }
  if (dropped) *dropped = n;
  return out;
}

std::string normalize_whitespace(std::string_view text, std::size_t* removed) {
  std::string out;
  out.reserve(text.size());
  std::size_t pending_newlines = 0;
  std::string line;

  auto flush_line = [&] {
    // line already has single interior spaces; trim the trailing one.
    while (!line.empty() && line.back() == ' ') line.pop_back();
    if (line.empty()) {
      ++pending_newlines;
      return;
    }
    if (!out.empty()) {
      if (pending_newlines >= 1) out += "\n\n";
      else out += '\n';
    }
    out += line;
    line.clear();
    pending_newlines = 0;
  };

  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '\r') {
      // CRLF and lone CR both end a line.
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
      c = '\n';
    }
    if (c == '\n') {
      flush_line();
      ++i;
      continue;
    }
    const auto uc = static_cast<unsigned char>(c);
    if (is_hspace(c)) {
      if (!line.empty() && line.back() != ' ') line.push_back(' ');
    } else if (uc < 0x20 || uc == 0x7F) {
      // other control characters are dropped
    } else {
      line.push_back(c);
    }
    ++i;
  }
  flush_line();
  if (removed) {
    const std::size_t kept = out.size();
    *removed = text.size() > kept ? text.size() - kept : 0;
  }
  return out;
}

std::string normalize(std::string_view text) {
  return normalize_whitespace(transliterate(remove_emoji(text)));
}

std::size_t count_words_normalized(std::string_view s) {
  std::size_t count = 0;
  bool in_word = false;
  for (char c : s) {
    const bool ws = c == ' ' || c == '\n' || is_hspace(c);
    if (!ws && !in_word) ++count;
    in_word = !ws;
  }
  return count;
}

std::size_t word_count(std::string_view text) { return count_words_normalized(normalize(text)); }

bool reject_short(std::string_view text, std::size_t min_words) {
  return word_count(text) < min_words;
}

const std::vector<std::string>& default_tells() {
  static const std::vector<std::string> kTells = {
      "delve", "it is important to note", "as an ai language model", "in conclusion",
      "i hope this helps"};
  return kTells;
}

TellLexicon::TellLexicon() : TellLexicon(default_tells()) {}

TellLexicon::TellLexicon(std::vector<std::string> phrases) {
  for (auto& p : phrases) {
    auto lowered = lower_ascii(p);
    if (!lowered.empty()) phrases_.push_back(std::move(lowered));
  }
}

TellLexicon TellLexicon::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tell lexicon: " + path.string());
  std::vector<std::string> phrases;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    std::size_t b = 0;
    while (b < line.size() && line[b] == ' ') ++b;
    line = line.substr(b);
    if (line.empty() || line[0] == '#') continue;
    phrases.push_back(line);
  }
  return TellLexicon(std::move(phrases));
}

std::vector<TellHit> find_tells(std::string_view text, const TellLexicon& lexicon) {
  const auto cps = decode_utf8(text);
  std::vector<TellHit> hits;
  for (const auto& phrase : lexicon.phrases()) {
    const auto pcs = decode_utf8(phrase);
    if (pcs.empty() || pcs.size() > cps.size()) continue;
    std::size_t p = 0;
    while (p + pcs.size() <= cps.size()) {
      bool eq = true;
      for (std::size_t k = 0; k < pcs.size(); ++k) {
        if (ascii_lower(cps[p + k]) != pcs[k]) {
          eq = false;
          break;
        }
      }
      if (eq) {
        const bool left_ok = p == 0 || !is_word_cp(cps[p - 1]);
        const std::size_t after = p + pcs.size();
        const bool right_ok = after == cps.size() || !is_word_cp(cps[after]);
        if (left_ok && right_ok) {
          hits.push_back({phrase, p});
          p = after;
          continue;
        }
      }
      ++p;
    }
  }
  std::sort(hits.begin(), hits.end(), [](const TellHit& a, const TellHit& b) {
    return a.position != b.position ? a.position < b.position : a.phrase < b.phrase;
  });
  return hits;
}

std::string_view to_string(Rejection r) {
  return r == Rejection::too_short ? "too_short" : "empty_after_strip";
}

CleanResult clean(std::string_view raw, std::size_t min_words, const TellLexicon& lexicon) {
  CleanResult result;
  auto& report = result.report;
  std::size_t emoji = 0;
  std::size_t dropped = 0;
  std::size_t ws_removed = 0;
  const std::string no_emoji = remove_emoji(raw, &emoji);
  const std::string ascii = transliterate(no_emoji, &dropped);
  auto stripped = strip_boilerplate(ascii);
  report.stripped_boilerplate = stripped.stripped;
  const std::size_t boiler_removed = ascii.size() - stripped.text.size();
  result.text = normalize_whitespace(stripped.text, &ws_removed);
  report.removed_char_count = emoji + dropped + boiler_removed + ws_removed;

  if (result.text.empty() && report.stripped_boilerplate) {
    report.rejected = Rejection::empty_after_strip;
  } else if (count_words_normalized(result.text) < min_words) {
    report.rejected = Rejection::too_short;
  }
  report.tells_found = find_tells(result.text, lexicon);
  return result;
}

}  // namespace hnm::textnorm
