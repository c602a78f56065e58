#include "hnm/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "hnm/hash.hpp"
#include "hnm/log.hpp"
#include "hnm/parallel.hpp"
#include "hnm/rng.hpp"
#include "hnm/textnorm.hpp"

namespace hnm {

std::string_view to_string(Label label) { return label == Label::ai ? "ai" : "human"; }

Label parse_label(std::string_view s) {
  if (s == "human") return Label::human;
  if (s == "ai") return Label::ai;
  throw std::invalid_argument("label must be \"human\" or \"ai\", got \"" + std::string(s) + "\"");
}

Document make_document(std::string id, std::string text, Label label, std::string domain,
                       std::string source) {
  Document d;
  d.id = std::move(id);
  d.text = std::move(text);
  d.label = label;
  d.domain = std::move(domain);
  d.source = std::move(source);
  d.word_count = textnorm::word_count(d.text);
  return d;
}

namespace corpus {
namespace {

using Kind = CorpusError::Kind;

const std::set<std::string, std::less<>> kKnownFields = {
    "id", "text", "label", "domain", "source", "year", "generator", "mirror_of", "word_count"};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError(Kind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string_view> split_lines(std::string_view content) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    std::string_view line = content.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  return lines;
}

void check_duplicates(const Collection& docs) {
  std::unordered_map<std::string_view, std::size_t> seen;
  std::vector<std::string> dups;
  for (const auto& d : docs) {
    if (++seen[d.id] == 2) dups.push_back(d.id);
  }
  if (!dups.empty()) {
    std::string msg = "duplicate id(s):";
    for (const auto& id : dups) msg += " " + id;
    throw CorpusError(Kind::duplicate_id, msg, 0, dups);
  }
}

void warn_on_recent_humans(const Collection& docs) {
  std::size_t recent = 0;
  std::string example;
  for (const auto& d : docs) {
    if (d.is_human() && d.year && *d.year > 2021) {
      if (recent++ == 0) example = d.id;
    }
  }
  if (recent > 0) {
    log::warn("corpus.human_after_2021", {{"count", recent}, {"example_id", example}});
  }
}

// Minimal RFC 4180 reader: quoted fields, doubled quotes, embedded newlines.
std::vector<std::pair<std::size_t, std::vector<std::string>>> read_csv_records(
    std::string_view content) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> records;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  std::size_t line = 1;
  std::size_t row_line = 1;
  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) throw CorpusError(Kind::parse, "stray quote", line);
        in_quotes = true;
        any = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any || !field.empty()) {
          row.push_back(std::move(field));
          records.emplace_back(row_line, std::move(row));
        }
        row.clear();
        field.clear();
        any = false;
        ++line;
        row_line = line;
        break;
      default:
        field.push_back(c);
        any = true;
    }
  }
  if (in_quotes) throw CorpusError(Kind::parse, "unterminated quoted field", row_line);
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    records.emplace_back(row_line, std::move(row));
  }
  return records;
}

}  // namespace

Format format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return Format::csv;
  return Format::jsonl;
}

void validate(const Document& d) {
  auto fail = [&](const std::string& why) {
    throw CorpusError(Kind::invariant, "document " + d.id + ": " + why, 0, {d.id});
  };
  if (d.id.empty()) throw CorpusError(Kind::invariant, "document with empty id");
  if (d.domain.empty()) fail("empty domain");
  if (d.is_ai() && !d.generator) fail("label=ai requires generator");
  if (d.is_human() && d.generator) fail("label=human must not have generator");
  if (d.mirror_of && !d.is_ai()) fail("mirror_of requires label=ai");
}

void validate(const Collection& docs) {
  for (const auto& d : docs) validate(d);
  check_duplicates(docs);
  std::unordered_map<std::string_view, const Document*> by_id;
  for (const auto& d : docs) by_id.emplace(d.id, &d);
  for (const auto& d : docs) {
    if (!d.mirror_of) continue;
    auto it = by_id.find(*d.mirror_of);
    if (it != by_id.end() && !it->second->is_human()) {
      throw CorpusError(Kind::invariant,
                        "document " + d.id + ": mirror_of " + *d.mirror_of + " is not human", 0,
                        {d.id});
    }
  }
}

Document from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw CorpusError(Kind::parse, "record is not a JSON object");
  auto req_string = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
      std::string id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : "?";
      throw CorpusError(Kind::invariant,
                        "document " + id + ": missing or non-string field '" + key + "'", 0,
                        {id});
    }
    return it->get<std::string>();
  };
  auto opt_string = [&](const char* key) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) {
      throw CorpusError(Kind::parse, std::string("field '") + key + "' must be a string");
    }
    return it->get<std::string>();
  };

  Document d;
  d.id = req_string("id");
  d.text = req_string("text");
  try {
    d.label = parse_label(req_string("label"));
  } catch (const std::invalid_argument& e) {
    throw CorpusError(Kind::invariant, "document " + d.id + ": " + e.what(), 0, {d.id});
  }
  d.domain = req_string("domain");
  d.source = opt_string("source").value_or("");
  if (auto it = j.find("year"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) {
      throw CorpusError(Kind::parse, "document " + d.id + ": year must be an integer", 0, {d.id});
    }
    d.year = it->get<int>();
  }
  d.generator = opt_string("generator");
  d.mirror_of = opt_string("mirror_of");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!kKnownFields.contains(it.key())) d.extra[it.key()] = it.value();
  }
  d.word_count = textnorm::word_count(d.text);
  validate(d);
  return d;
}

namespace {

nlohmann::ordered_json to_ordered_json(const Document& d) {
  nlohmann::ordered_json o;
  o["id"] = d.id;
  o["text"] = d.text;
  o["label"] = to_string(d.label);
  o["domain"] = d.domain;
  o["source"] = d.source;
  if (d.year) o["year"] = *d.year;
  if (d.generator) o["generator"] = *d.generator;
  if (d.mirror_of) o["mirror_of"] = *d.mirror_of;
  o["word_count"] = d.word_count;
  for (auto& [k, v] : d.extra.items()) o[k] = v;
  return o;
}

}  // namespace

nlohmann::json to_json(const Document& d) { return nlohmann::json::parse(to_ordered_json(d).dump()); }

std::string to_jsonl(const Collection& docs) {
  std::vector<std::string> lines(docs.size());
  parallel_for(docs.size(), [&](std::size_t i) {
    const auto o = to_ordered_json(docs[i]);
    lines[i] = o.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  });
  std::string out;
  for (auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

void save(const std::filesystem::path& path, const Collection& docs) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CorpusError(Kind::io, "cannot write " + tmp);
    out << to_jsonl(docs);
    if (!out) throw CorpusError(Kind::io, "write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Collection parse_jsonl(std::string_view content) {
  const auto lines = split_lines(content);
  std::vector<std::optional<Document>> parsed(lines.size());
  std::vector<std::optional<CorpusError>> failures(lines.size());
  parallel_for(lines.size(), [&](std::size_t i) {
    const auto line = lines[i];
    if (line.find_first_not_of(" \t") == std::string_view::npos) return;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      failures[i].emplace(Kind::parse,
                          "line " + std::to_string(i + 1) + ": malformed JSON (" + e.what() + ")",
                          i + 1);
      return;
    }
    try {
      parsed[i] = from_json(j);
    } catch (const CorpusError& e) {
      failures[i].emplace(e.kind(), "line " + std::to_string(i + 1) + ": " + e.what(), i + 1,
                          e.ids());
    }
  });
  for (auto& f : failures) {
    if (f) throw *f;
  }
  Collection docs;
  docs.reserve(lines.size());
  for (auto& p : parsed) {
    if (p) docs.push_back(std::move(*p));
  }
  validate(docs);
  warn_on_recent_humans(docs);
  return docs;
}

Collection parse_csv(std::string_view content) {
  auto records = read_csv_records(content);
  if (records.empty()) return {};
  const auto header = records.front().second;
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* req : {"id", "text", "label", "domain"}) {
    if (!col.contains(req)) {
      throw CorpusError(Kind::parse, std::string("csv header lacks column '") + req + "'", 1);
    }
  }
  Collection docs;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& [line, row] = records[r];
    if (row.size() != header.size()) {
      throw CorpusError(Kind::parse,
                        "line " + std::to_string(line) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(row.size()),
                        line);
    }
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t c = 0; c < header.size(); ++c) {
      const auto& name = header[c];
      const auto& value = row[c];
      if (name == "word_count") continue;
      if ((name == "year" || name == "generator" || name == "mirror_of") && value.empty()) {
        continue;
      }
      if (name == "year") {
        try {
          std::size_t used = 0;
          const int y = std::stoi(value, &used);
          if (used != value.size()) throw std::invalid_argument("trailing");
          j[name] = y;
        } catch (const std::exception&) {
          throw CorpusError(Kind::parse, "line " + std::to_string(line) + ": bad year", line);
        }
        continue;
      }
      j[name] = value;
    }
    try {
      docs.push_back(from_json(j));
    } catch (const CorpusError& e) {
      throw CorpusError(e.kind(), "line " + std::to_string(line) + ": " + e.what(), line, e.ids());
    }
  }
  validate(docs);
  warn_on_recent_humans(docs);
  return docs;
}

Collection load(const std::filesystem::path& path, Format format) {
  const std::string content = read_file(path);
  return format == Format::csv ? parse_csv(content) : parse_jsonl(content);
}

Collection load(const std::filesystem::path& path) { return load(path, format_from_path(path)); }

std::vector<std::string> domains(const Collection& docs) {
  std::set<std::string> s;
  for (const auto& d : docs) s.insert(d.domain);
  return {s.begin(), s.end()};
}

Split split(const Collection& pool, const SplitSpec& spec) {
  if (pool.empty()) throw CorpusError(Kind::empty_pool, "cannot split an empty pool");
  if (!(spec.holdout_fraction >= 0.0 && spec.holdout_fraction < 1.0)) {
    throw std::invalid_argument("holdout_fraction must be in [0, 1)");
  }
  std::map<std::string, std::vector<std::size_t>> groups;
  if (spec.per_domain) {
    for (std::size_t i = 0; i < pool.size(); ++i) groups[pool[i].domain].push_back(i);
    for (const auto& [domain, members] : groups) {
      if (members.size() < 2) {
        throw CorpusError(Kind::unstratifiable,
                          "domain '" + domain + "' has fewer than 2 documents", 0);
      }
    }
  } else {
    auto& all = groups[""];
    all.resize(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) all[i] = i;
  }

  std::vector<char> held(pool.size(), 0);
  for (auto& [key, members] : groups) {
    const auto k = static_cast<std::size_t>(
        std::llround(spec.holdout_fraction * static_cast<double>(members.size())));
    Rng rng(derive_seed(spec.seed, "split:" + key));
    auto order = members;
    rng.shuffle(order);
    for (std::size_t i = 0; i < k && i < order.size(); ++i) held[order[i]] = 1;
  }
  Split out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    (held[i] ? out.holdout : out.train_pool).push_back(pool[i]);
  }
  return out;
}

Collection dedupe(const Collection& docs) {
  std::vector<Hash128> keys(docs.size());
  parallel_for(docs.size(),
               [&](std::size_t i) { keys[i] = fnv1a128(textnorm::normalize(docs[i].text)); });
  std::unordered_set<Hash128, Hash128Hasher> seen;
  Collection out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (seen.insert(keys[i]).second) out.push_back(docs[i]);
  }
  return out;
}

}  // namespace corpus
}  // namespace hnm
