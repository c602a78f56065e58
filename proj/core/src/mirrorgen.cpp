#include "hnm/mirrorgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "hnm/log.hpp"
#include "hnm/rng.hpp"

namespace hnm::mirrorgen {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Names of <slot> placeholders in order of first appearance.
std::vector<std::string> scan_slots(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = text.find('<', pos)) != std::string_view::npos) {
    const std::size_t close = text.find('>', pos + 1);
    if (close == std::string_view::npos) break;
    const auto name = text.substr(pos + 1, close - pos - 1);
    const bool ident = !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    });
    if (ident) {
      out.emplace_back(name);
      pos = close + 1;
    } else {
      pos = pos + 1;
    }
  }
  return out;
}

std::string substitute(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t open = text.find('<', pos);
    if (open == std::string_view::npos) break;
    const std::size_t close = text.find('>', open + 1);
    if (close == std::string_view::npos) break;
    const std::string name(text.substr(open + 1, close - open - 1));
    auto it = values.find(name);
    out.append(text.substr(pos, open - pos));
    if (it != values.end()) {
      out += it->second;
      pos = close + 1;
    } else {
      out.push_back('<');
      pos = open + 1;
    }
  }
  out.append(text.substr(std::min(pos, text.size())));
  return out;
}

std::string metadata_value(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_array()) {
    std::string out;
    for (const auto& e : v) {
      if (!out.empty()) out += ", ";
      out += metadata_value(e);
    }
    return out;
  }
  return v.dump();
}

}  // namespace

std::string_view to_string(Role r) { return r == Role::prompt ? "prompt" : "assistant"; }

std::string_view to_string(Style s) {
  switch (s) {
    case Style::single: return "single";
    case Style::double_prompt: return "double_prompt";
    case Style::continuation: return "continuation";
  }
  return "?";
}

Style parse_style(std::string_view s) {
  if (s == "single") return Style::single;
  if (s == "double_prompt") return Style::double_prompt;
  if (s == "continuation") return Style::continuation;
  throw TemplateError("unknown template style: " + std::string(s));
}

std::optional<std::string> MirrorTemplate::assistant_slot() const {
  for (const auto& t : turns) {
    if (t.role != Role::assistant) continue;
    const auto names = scan_slots(t.text);
    if (names.size() == 1) return names.front();
  }
  return std::nullopt;
}

std::vector<std::string> MirrorTemplate::slots() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& t : turns) {
    for (auto& n : scan_slots(t.text)) {
      if (seen.insert(n).second) out.push_back(n);
    }
  }
  return out;
}

void validate(const MirrorTemplate& t) {
  auto fail = [&](const std::string& why) {
    throw TemplateError("template " + t.template_id + ": " + why);
  };
  if (t.template_id.empty()) throw TemplateError("template without template_id");
  if (t.domain.empty()) fail("missing domain");
  if (t.turns.empty()) fail("no turns");
  if (t.turns.back().role != Role::prompt) fail("last turn must be a prompt");
  const auto assistants = std::count_if(t.turns.begin(), t.turns.end(),
                                        [](const Turn& x) { return x.role == Role::assistant; });
  if (t.style == Style::double_prompt) {
    if (assistants != 1) fail("double_prompt needs exactly one assistant turn");
    std::size_t pos = 0;
    while (t.turns[pos].role != Role::assistant) ++pos;
    const auto names = scan_slots(t.turns[pos].text);
    if (names.size() != 1 || trim(t.turns[pos].text) != "<" + names.front() + ">") {
      fail("assistant turn must be a single <slot> placeholder");
    }
    if (pos == 0 || pos + 1 >= t.turns.size()) fail("assistant turn must sit between prompts");
  } else if (assistants != 0) {
    fail("only double_prompt templates may contain assistant turns");
  }
  if (t.style == Style::continuation) {
    const auto s = t.slots();
    if (std::find(s.begin(), s.end(), "excerpt") == s.end()) fail("continuation needs <excerpt>");
  }
}

MirrorTemplate parse_template(std::string_view content) {
  MirrorTemplate t;
  std::istringstream in{std::string(content)};
  std::string line;
  bool in_header = true;
  std::optional<Turn> current;
  auto flush = [&] {
    if (current) {
      current->text = trim(current->text);
      t.turns.push_back(std::move(*current));
      current.reset();
    }
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (in_header) {
      const auto trimmed = trim(line);
      if (trimmed.empty() || trimmed[0] == '#') continue;
      if (trimmed == "---") {
        in_header = false;
        continue;
      }
      const auto colon = trimmed.find(':');
      if (colon == std::string::npos) throw TemplateError("bad header line: " + trimmed);
      const auto key = trim(std::string_view(trimmed).substr(0, colon));
      const auto value = trim(std::string_view(trimmed).substr(colon + 1));
      if (key == "template_id") t.template_id = value;
      else if (key == "domain") t.domain = value;
      else if (key == "style") t.style = parse_style(value);
      else if (key == "anti_tell_suffix") t.anti_tell_suffix = value;
      else throw TemplateError("unknown header key: " + key);
      continue;
    }
    const auto trimmed = trim(line);
    if (trimmed == "[prompt]" || trimmed == "[assistant]") {
      flush();
      current = Turn{trimmed == "[prompt]" ? Role::prompt : Role::assistant, {}};
      continue;
    }
    if (!current) {
      if (trimmed.empty()) continue;
      throw TemplateError("text outside of a turn: " + trimmed);
    }
    if (!current->text.empty()) current->text += '\n';
    current->text += line;
  }
  flush();
  if (in_header) throw TemplateError("template lacks '---' separator");
  validate(t);
  return t;
}

MirrorTemplate load_template(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TemplateError("cannot open template " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_template(ss.str());
  } catch (const TemplateError& e) {
    throw TemplateError(path.string() + ": " + e.what());
  }
}

TemplateSet::TemplateSet(std::vector<MirrorTemplate> templates) : templates_(std::move(templates)) {
  std::sort(templates_.begin(), templates_.end(),
            [](const auto& a, const auto& b) { return a.template_id < b.template_id; });
  for (std::size_t i = 0; i < templates_.size(); ++i) {
    if (i > 0 && templates_[i].template_id == templates_[i - 1].template_id) {
      throw TemplateError("duplicate template_id " + templates_[i].template_id);
    }
    by_domain_[templates_[i].domain].push_back(i);
  }
}

TemplateSet TemplateSet::load_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw TemplateError("template directory not found: " + dir.string());
  }
  std::vector<MirrorTemplate> ts;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".tmpl") {
      ts.push_back(load_template(entry.path()));
    }
  }
  return TemplateSet(std::move(ts));
}

namespace {
const char* const kBuiltinTemplates[] = {
#include "builtin_templates.inc"
};
}  // namespace

TemplateSet TemplateSet::builtin() {
  std::vector<MirrorTemplate> ts;
  for (const char* text : kBuiltinTemplates) ts.push_back(parse_template(text));
  return TemplateSet(std::move(ts));
}

bool TemplateSet::has_domain(std::string_view domain) const {
  return by_domain_.find(domain) != by_domain_.end();
}

const MirrorTemplate& TemplateSet::for_document(const Document& doc) const {
  auto it = by_domain_.find(doc.domain);
  if (it == by_domain_.end()) throw PromptError("no template for domain '" + doc.domain + "'");
  const auto& idx = it->second;
  if (idx.size() == 1) return templates_[idx.front()];
  return templates_[idx[derive_seed(0, doc.id) % idx.size()]];
}

std::size_t length_target(std::size_t words) {
  const std::size_t rounded = ((words + 25) / 50) * 50;
  return std::max<std::size_t>(50, rounded);
}

std::string leading_sentences(std::string_view text, std::size_t count) {
  std::size_t found = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    // Absorb closing quotes/brackets and repeated terminators.
    std::size_t end = i + 1;
    while (end < text.size() && (text[end] == '.' || text[end] == '!' || text[end] == '?' ||
                                 text[end] == '"' || text[end] == '\'' || text[end] == ')')) {
      ++end;
    }
    if (end == text.size() || text[end] == ' ' || text[end] == '\n') {
      if (++found == count) return trim(text.substr(0, end));
    }
    i = end - 1;
  }
  return trim(text);
}

MirrorPrompt build_prompt(const Document& doc, const MirrorTemplate& t) {
  if (!doc.is_human()) throw PromptError("document " + doc.id + " is not human-labeled");
  if (doc.domain != t.domain) {
    throw PromptError("template " + t.template_id + " is for domain '" + t.domain +
                      "', document " + doc.id + " is '" + doc.domain + "'");
  }
  MirrorPrompt p;
  p.source_id = doc.id;
  p.domain = doc.domain;
  p.template_id = t.template_id;
  p.style = t.style;
  p.target_words = length_target(doc.word_count);
  const auto pending = t.style == Style::double_prompt ? t.assistant_slot() : std::nullopt;
  p.pending_slot = pending;

  const std::string normalized = textnorm::normalize(doc.text);
  for (const auto& name : t.slots()) {
    if (pending && name == *pending) continue;
    if (name == "length") {
      p.slots[name] = std::to_string(p.target_words);
    } else if (name == "excerpt") {
      p.slots[name] = leading_sentences(normalized, 2);
    } else if (name == "document") {
      p.slots[name] = normalized;
    } else if (name == "domain") {
      p.slots[name] = doc.domain;
    } else if (auto it = doc.extra.find(name); it != doc.extra.end() && !it->is_null()) {
      p.slots[name] = metadata_value(*it);
    } else {
      throw PromptError("document " + doc.id + ": unresolvable slot <" + name + "> in template " +
                        t.template_id);
    }
  }
  for (const auto& turn : t.turns) p.turns.push_back({turn.role, substitute(turn.text, p.slots)});
  if (t.anti_tell_suffix) {
    for (auto it = p.turns.rbegin(); it != p.turns.rend(); ++it) {
      if (it->role == Role::prompt) {
        it->text += " " + *t.anti_tell_suffix;
        break;
      }
    }
  }
  return p;
}

MirrorPrompt resolve_pending(MirrorPrompt prompt, std::string_view value) {
  if (!prompt.pending_slot) return prompt;
  std::map<std::string, std::string> v{{*prompt.pending_slot, std::string(value)}};
  for (auto& t : prompt.turns) t.text = substitute(t.text, v);
  prompt.slots[*prompt.pending_slot] = std::string(value);
  prompt.pending_slot.reset();
  return prompt;
}

std::string mirror_id(std::string_view source_id, std::size_t fanout_index) {
  return std::string(source_id) + "#m" + std::to_string(fanout_index);
}

namespace {

// First non-empty line, without surrounding quotes or a "Title:" label.
std::string clean_title(std::string_view raw) {
  std::istringstream in{std::string(raw)};
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.rfind("Title:", 0) == 0) t = trim(std::string_view(t).substr(6));
    while (!t.empty() && (t.front() == '"' || t.front() == '*')) t.erase(t.begin());
    while (!t.empty() && (t.back() == '"' || t.back() == '*')) t.pop_back();
    if (!t.empty()) return textnorm::normalize(t);
  }
  return {};
}

}  // namespace

MirrorOutcome generate_mirror(const MirrorPrompt& prompt, Generator& gen,
                              const MirrorOptions& opts, std::size_t fanout_index) {
  MirrorOutcome outcome;
  const std::string base = prompt.source_id + "#" + std::to_string(fanout_index);
  for (int attempt = 0; attempt < std::max(1, opts.max_attempts); ++attempt) {
    ++outcome.attempts;
    const std::uint64_t seed =
        derive_seed(opts.seed, base + "#" + std::to_string(attempt) + "#" + gen.name());
    MirrorPrompt resolved = prompt;
    if (prompt.pending_slot) {
      // First call: everything before the assistant placeholder.
      std::vector<Turn> first;
      for (const auto& t : prompt.turns) {
        if (t.role == Role::assistant) break;
        first.push_back(t);
      }
      const auto title = clean_title(gen.complete(prompt, first, derive_seed(seed, "first")));
      if (title.empty()) {
        outcome.rejection = textnorm::Rejection::empty_after_strip;
        continue;
      }
      resolved = resolve_pending(prompt, title);
    }
    const std::string raw = gen.complete(resolved, resolved.turns, seed);
    auto cleaned = textnorm::clean(raw, opts.min_words, opts.lexicon);
    if (cleaned.report.rejected) {
      outcome.rejection = cleaned.report.rejected;
      continue;
    }
    Document d = make_document(mirror_id(prompt.source_id, fanout_index), std::move(cleaned.text),
                               Label::ai, prompt.domain, "mirror:" + prompt.template_id);
    d.generator = gen.name();
    d.mirror_of = prompt.source_id;
    outcome.mirror = std::move(d);
    outcome.rejection.reset();
    return outcome;
  }
  return outcome;
}

BatchResult mirror_documents(const Collection& humans, const TemplateSet& templates,
                             const std::vector<Generator*>& generators, const MirrorOptions& opts,
                             std::size_t max_concurrency) {
  if (generators.empty()) throw std::invalid_argument("no generators configured");
  std::vector<MirrorRequest> requests;
  requests.reserve(humans.size() * opts.fanout);
  for (const auto& doc : humans) {
    for (std::size_t k = 0; k < opts.fanout; ++k) {
      requests.push_back({&doc, k, requests.size() % generators.size()});
    }
  }
  BatchResult result;
  result.outcomes.resize(requests.size());
  std::atomic<std::size_t> cursor{0};
  auto work = [&] {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= requests.size()) return;
      const auto& req = requests[i];
      auto& out = result.outcomes[i];
      try {
        const auto prompt = build_prompt(*req.source, templates.for_document(*req.source));
        out = generate_mirror(prompt, *generators[req.generator_index], opts, req.fanout_index);
      } catch (const std::exception& e) {
        out.error = e.what();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(max_concurrency, requests.size()));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < requests.size(); ++i) {
    auto& out = result.outcomes[i];
    if (out.mirror) {
      result.mirrors.push_back(*out.mirror);
    } else if (!out.error.empty()) {
      ++result.failed;
      log::warn("mirror.failed", {{"source_id", requests[i].source->id}, {"error", out.error}});
    } else {
      ++result.rejected;
      log::debug("mirror.rejected",
                 {{"source_id", requests[i].source->id},
                  {"reason", out.rejection ? std::string(textnorm::to_string(*out.rejection))
                                           : std::string("unknown")}});
    }
  }
  return result;
}

}  // namespace hnm::mirrorgen
