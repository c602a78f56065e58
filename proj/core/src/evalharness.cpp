#include "hnm/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "hnm/hash.hpp"
#include "hnm/log.hpp"
#include "hnm/parallel.hpp"
#include "hnm/rng.hpp"

namespace hnm::eval {
namespace {

std::optional<Rational> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return Rational(static_cast<std::int64_t>(num), static_cast<std::int64_t>(den));
}

void tally(Counts& c, double score, Label label, double threshold) {
  const bool predicted_ai = score > threshold;
  if (label == Label::ai) {
    (predicted_ai ? c.tp : c.fn) += 1;
  } else {
    (predicted_ai ? c.fp : c.tn) += 1;
  }
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string opt_str(const std::optional<Rational>& r) { return r ? r->str() : ""; }

nlohmann::json metrics_json(const Metrics& m) {
  nlohmann::json j = {{"tp", m.counts.tp}, {"fp", m.counts.fp}, {"tn", m.counts.tn},
                      {"fn", m.counts.fn}};
  auto put = [&](const char* key, const std::optional<Rational>& r) {
    if (r) {
      j[key] = r->str();
      j[std::string(key) + "_value"] = r->value();
    } else {
      j[key] = nullptr;
    }
  };
  put("accuracy", m.accuracy);
  put("fpr", m.fpr);
  put("fnr", m.fnr);
  return j;
}

Metrics metrics_from_json(const nlohmann::json& j) {
  Counts c{j.at("tp").get<std::uint64_t>(), j.at("fp").get<std::uint64_t>(),
           j.at("tn").get<std::uint64_t>(), j.at("fn").get<std::uint64_t>()};
  Metrics m = Metrics::from_counts(c);
  auto check = [&](const char* key, const std::optional<Rational>& r) {
    const auto& v = j.at(key);
    const bool present = !v.is_null();
    if (present != r.has_value() || (present && Rational::parse(v.get<std::string>()) != *r)) {
      throw EvalError(std::string("report field ") + key + " disagrees with its counts");
    }
  };
  check("accuracy", m.accuracy);
  check("fpr", m.fpr);
  check("fnr", m.fnr);
  return m;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

Metrics Metrics::from_counts(const Counts& c) {
  Metrics m;
  m.counts = c;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.fpr = ratio(c.fp, c.fp + c.tn);
  m.fnr = ratio(c.fn, c.fn + c.tp);
  return m;
}

std::optional<Rational> EvalReport::recall(const std::string& generator) const {
  auto it = per_generator.find(generator);
  if (it == per_generator.end()) return std::nullopt;
  const auto& c = it->second.counts;
  return ratio(c.tp, c.tp + c.fn);
}

EvalReport confusion(std::span<const double> scores, std::span<const Label> labels,
                     double threshold) {
  if (scores.size() != labels.size()) {
    throw EvalError("scores and labels differ in length (" + std::to_string(scores.size()) +
                    " vs " + std::to_string(labels.size()) + ")");
  }
  if (scores.empty()) throw EvalError("confusion on empty input");
  Counts c;
  for (std::size_t i = 0; i < scores.size(); ++i) tally(c, scores[i], labels[i], threshold);
  EvalReport r;
  r.overall = Metrics::from_counts(c);
  r.threshold = threshold;
  return r;
}

EvalReport evaluate(std::span<const double> scores, const Collection& docs, double threshold) {
  std::vector<Label> labels(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) labels[i] = docs[i].label;
  EvalReport r = confusion(scores, labels, threshold);
  std::map<std::string, Counts> dom;
  std::map<std::string, Counts> gen;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    tally(dom[docs[i].domain], scores[i], docs[i].label, threshold);
    if (docs[i].is_ai()) tally(gen[docs[i].generator.value_or("?")], scores[i], Label::ai, threshold);
  }
  for (auto& [k, c] : dom) r.per_domain[k] = Metrics::from_counts(c);
  for (auto& [k, c] : gen) r.per_generator[k] = Metrics::from_counts(c);
  return r;
}

double calibrate_threshold(std::span<const double> human_scores, double target_fpr) {
  if (human_scores.empty()) throw EvalError("calibrate_threshold on empty human scores");
  if (!(target_fpr >= 0.0 && target_fpr < 1.0)) throw EvalError("target_fpr must be in [0, 1)");
  std::vector<double> sorted(human_scores.begin(), human_scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto n = sorted.size();
  const double nd = static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::floor(target_fpr * nd));
  // Align with the realized-FPR test (count / N <= target) despite rounding.
  while (k + 1 < n && static_cast<double>(k + 1) / nd <= target_fpr) ++k;
  while (k > 0 && static_cast<double>(k) / nd > target_fpr) --k;
  return sorted[std::min(k, n - 1)];
}

RecallAtFpr recall_at_fpr(std::span<const double> human_scores,
                          const std::map<std::string, std::vector<double>>& ai_scores,
                          double target_fpr) {
  RecallAtFpr r;
  r.target_fpr = target_fpr;
  r.threshold = calibrate_threshold(human_scores, target_fpr);
  const auto above = std::count_if(human_scores.begin(), human_scores.end(),
                                   [&](double s) { return s > r.threshold; });
  r.realized_fpr = Rational(above, static_cast<std::int64_t>(human_scores.size()));
  for (const auto& [gen, scores] : ai_scores) {
    if (scores.empty()) throw EvalError("no AI documents for generator " + gen);
    const auto hit = std::count_if(scores.begin(), scores.end(),
                                   [&](double s) { return s > r.threshold; });
    r.recall[gen] = Rational(hit, static_cast<std::int64_t>(scores.size()));
  }
  return r;
}

std::map<std::string, Collection> by_generator(const Collection& ai_docs) {
  std::map<std::string, Collection> out;
  for (const auto& d : ai_docs) {
    if (d.is_ai()) out[d.generator.value_or("?")].push_back(d);
  }
  return out;
}

namespace {
std::vector<double> score_docs(const model::ClassifierModel& m, const Collection& docs) {
  std::vector<double> out(docs.size());
  parallel_for(docs.size(), [&](std::size_t i) { out[i] = m.score(docs[i].text); });
  return out;
}
}  // namespace

RecallAtFpr recall_at_fpr(const model::ClassifierModel& m, const Collection& humans,
                          const std::map<std::string, Collection>& ai_by_generator,
                          double target_fpr) {
  if (humans.empty()) throw EvalError("recall_at_fpr needs human documents");
  std::map<std::string, std::vector<double>> ai;
  for (const auto& [gen, docs] : ai_by_generator) {
    if (docs.empty()) throw EvalError("no AI documents for generator " + gen);
    ai[gen] = score_docs(m, docs);
  }
  return recall_at_fpr(score_docs(m, humans), ai, target_fpr);
}

DomainFprTable domain_fpr_table(std::span<const double> scores, const Collection& holdout,
                                double threshold, const std::vector<std::string>& expected) {
  if (scores.size() != holdout.size()) throw EvalError("scores and holdout differ in length");
  DomainFprTable t;
  t.threshold = threshold;
  for (std::size_t i = 0; i < holdout.size(); ++i) {
    if (!holdout[i].is_human()) {
      throw EvalError("holdout document " + holdout[i].id + " is not human-labeled");
    }
    tally(t.counts[holdout[i].domain], scores[i], Label::human, threshold);
  }
  for (const auto& d : expected) {
    if (!t.counts.contains(d)) t.excluded.push_back(d);
  }
  if (t.counts.empty()) throw EvalError("domain_fpr_table on empty holdout");
  Rational sum;
  for (const auto& [d, c] : t.counts) {
    const Rational f(static_cast<std::int64_t>(c.fp), static_cast<std::int64_t>(c.fp + c.tn));
    t.fpr[d] = f;
    sum = sum + f;
  }
  t.weighted_total = sum / static_cast<std::int64_t>(t.counts.size());
  return t;
}

DomainFprTable domain_fpr_table(const model::ClassifierModel& m, const Collection& holdout,
                                double threshold, const std::vector<std::string>& expected) {
  return domain_fpr_table(score_docs(m, holdout), holdout, threshold, expected);
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["threshold"] = r.threshold;
  j["calibration_target"] = r.calibration_target ? nlohmann::json(*r.calibration_target) : nlohmann::json(nullptr);
  j["overall"] = metrics_json(r.overall);
  j["per_domain"] = nlohmann::json::object();
  for (const auto& [k, m] : r.per_domain) j["per_domain"][k] = metrics_json(m);
  j["per_generator"] = nlohmann::json::object();
  for (const auto& [k, m] : r.per_generator) {
    auto mj = metrics_json(m);
    const auto rec = r.recall(k);
    mj["recall"] = rec ? nlohmann::json(rec->str()) : nlohmann::json(nullptr);
    j["per_generator"][k] = mj;
  }
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.threshold = j.at("threshold").get<double>();
  if (!j.at("calibration_target").is_null()) r.calibration_target = j["calibration_target"].get<double>();
  r.overall = metrics_from_json(j.at("overall"));
  for (const auto& [k, v] : j.at("per_domain").items()) r.per_domain[k] = metrics_from_json(v);
  for (const auto& [k, v] : j.at("per_generator").items()) r.per_generator[k] = metrics_from_json(v);
  return r;
}

std::string to_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "slice_type,slice,threshold,calibration_target,tp,fp,tn,fn,accuracy,fpr,fnr\n";
  const std::string target = r.calibration_target ? fmt_double(*r.calibration_target) : "";
  auto row = [&](const std::string& type, const std::string& name, const Metrics& m) {
    out << type << ',' << csv_field(name) << ',' << fmt_double(r.threshold) << ',' << target << ','
        << m.counts.tp << ',' << m.counts.fp << ',' << m.counts.tn << ',' << m.counts.fn << ','
        << opt_str(m.accuracy) << ',' << opt_str(m.fpr) << ',' << opt_str(m.fnr) << '\n';
  };
  row("overall", "all", r.overall);
  for (const auto& [k, m] : r.per_domain) row("domain", k, m);
  for (const auto& [k, m] : r.per_generator) row("generator", k, m);
  return out.str();
}

EvalReport report_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw EvalError("empty report csv");
  EvalReport r;
  bool saw_overall = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 11) throw EvalError("report csv row has " + std::to_string(f.size()) + " fields");
    r.threshold = std::stod(f[2]);
    if (!f[3].empty()) r.calibration_target = std::stod(f[3]);
    Counts c{std::stoull(f[4]), std::stoull(f[5]), std::stoull(f[6]), std::stoull(f[7])};
    const Metrics m = Metrics::from_counts(c);
    if (opt_str(m.accuracy) != f[8] || opt_str(m.fpr) != f[9] || opt_str(m.fnr) != f[10]) {
      throw EvalError("report csv ratios disagree with counts for slice " + f[1]);
    }
    if (f[0] == "overall") {
      r.overall = m;
      saw_overall = true;
    } else if (f[0] == "domain") {
      r.per_domain[f[1]] = m;
    } else if (f[0] == "generator") {
      r.per_generator[f[1]] = m;
    } else {
      throw EvalError("unknown slice type " + f[0]);
    }
  }
  if (!saw_overall) throw EvalError("report csv lacks the overall row");
  return r;
}

nlohmann::json to_json(const RecallAtFpr& r) {
  nlohmann::json j = {{"threshold", r.threshold},
                      {"target_fpr", r.target_fpr},
                      {"realized_fpr", r.realized_fpr.str()},
                      {"realized_fpr_value", r.realized_fpr.value()}};
  j["recall"] = nlohmann::json::object();
  for (const auto& [g, v] : r.recall) j["recall"][g] = {{"exact", v.str()}, {"value", v.value()}};
  return j;
}

void write_report(const std::filesystem::path& dir, const EvalReport& r,
                  const std::optional<RecallAtFpr>& recall) {
  std::filesystem::create_directories(dir);
  auto j = to_json(r);
  if (recall) j["recall_at_fpr"] = to_json(*recall);
  std::ofstream(dir / "report.json") << j.dump(2) << '\n';
  std::ofstream(dir / "report.csv") << to_csv(r);
}

nlohmann::json to_json(const DomainFprTable& t) {
  nlohmann::json j;
  j["threshold"] = t.threshold;
  j["domains"] = nlohmann::json::object();
  for (const auto& [d, f] : t.fpr) {
    const auto& c = t.counts.at(d);
    j["domains"][d] = {{"fp", c.fp}, {"n", c.fp + c.tn}, {"fpr", f.str()}, {"fpr_value", f.value()}};
  }
  j["weighted_total"] = t.weighted_total.str();
  j["weighted_total_value"] = t.weighted_total.value();
  j["excluded"] = t.excluded;
  return j;
}

DomainFprTable domain_fpr_table_from_json(const nlohmann::json& j) {
  DomainFprTable t;
  t.threshold = j.at("threshold").get<double>();
  for (const auto& [d, v] : j.at("domains").items()) {
    const auto fp = v.at("fp").get<std::uint64_t>();
    const auto n = v.at("n").get<std::uint64_t>();
    if (fp > n || n == 0) throw EvalError("invalid domain row " + d);
    t.counts[d] = Counts{0, fp, n - fp, 0};
    t.fpr[d] = Rational(static_cast<std::int64_t>(fp), static_cast<std::int64_t>(n));
  }
  t.weighted_total = Rational::parse(j.at("weighted_total").get<std::string>());
  t.excluded = j.at("excluded").get<std::vector<std::string>>();
  return t;
}

std::string to_csv(const DomainFprTable& t) {
  std::ostringstream out;
  out << "domain,fp,n,fpr,fpr_value\n";
  for (const auto& [d, f] : t.fpr) {
    const auto& c = t.counts.at(d);
    out << csv_field(d) << ',' << c.fp << ',' << (c.fp + c.tn) << ',' << f.str() << ','
        << fmt_double(f.value()) << '\n';
  }
  out << "TOTAL_DOMAIN_WEIGHTED,,," << t.weighted_total.str() << ','
      << fmt_double(t.weighted_total.value()) << '\n';
  return out.str();
}

ScalingCurve scaling_experiment(const Collection& pool, const std::vector<std::size_t>& sizes,
                                const mirrorgen::TemplateSet& templates,
                                const std::vector<mirrorgen::Generator*>& generators,
                                const model::TrainConfig& train_cfg, const ScalingOptions& opts) {
  if (sizes.empty()) throw EvalError("scaling_experiment needs at least one size");
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    if (sizes[i] <= sizes[i - 1]) throw EvalError("scaling sizes must be strictly increasing");
  }
  std::map<std::string, std::vector<std::size_t>> humans_by_domain;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].is_human()) humans_by_domain[pool[i].domain].push_back(i);
  }
  if (humans_by_domain.empty()) throw EvalError("scaling pool has no human documents");

  // Fixed common test set, disjoint from every training sample.
  Collection test_humans;
  std::map<std::string, std::vector<std::size_t>> available;
  for (auto& [domain, idx] : humans_by_domain) {
    auto order = idx;
    Rng(derive_seed(opts.seed, "scaling-test:" + domain)).shuffle(order);
    const std::size_t n_test = std::min(opts.test_humans_per_domain, order.size());
    if (order.size() - n_test < sizes.back()) {
      throw EvalError("infeasible size " + std::to_string(sizes.back()) + " for domain " + domain +
                      ": only " + std::to_string(order.size() - n_test) + " documents available");
    }
    std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<long>(n_test));
    std::sort(test.begin(), test.end());
    for (auto i : test) test_humans.push_back(pool[i]);
    available[domain].assign(order.begin() + static_cast<long>(n_test), order.end());
  }
  auto test_mirrors = mirrorgen::mirror_documents(test_humans, templates, generators, opts.mirror);
  Collection test_set = test_humans;
  test_set.insert(test_set.end(), test_mirrors.mirrors.begin(), test_mirrors.mirrors.end());
  std::vector<model::FeatureVector> test_features(test_set.size());
  parallel_for(test_set.size(), [&](std::size_t i) {
    test_features[i] = model::featurize(test_set[i].text, opts.features);
  });

  ScalingCurve curve;
  for (const auto size : sizes) {
    Collection humans;
    for (auto& [domain, idx] : available) {
      auto order = idx;
      Rng(derive_seed(opts.seed, "scaling-sample:" + domain + ":" + std::to_string(size)))
          .shuffle(order);
      order.resize(size);
      std::sort(order.begin(), order.end());
      for (auto i : order) humans.push_back(pool[i]);
    }
    auto mirrors = mirrorgen::mirror_documents(humans, templates, generators, opts.mirror);
    Collection train_set = std::move(humans);
    train_set.insert(train_set.end(), mirrors.mirrors.begin(), mirrors.mirrors.end());

    auto cfg = train_cfg;
    cfg.seed = derive_seed(train_cfg.seed, size);
    auto result = model::train(train_set, cfg, opts.features);

    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
      const double z = result.model.linear(test_features[i]);
      const int y = test_set[i].is_ai() ? 1 : 0;
      loss += std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - y * z;
      correct += ((z > 0) == (y == 1));
    }
    ScalingPoint p;
    p.size_per_domain = size;
    p.test_loss = loss / static_cast<double>(test_set.size());
    p.test_accuracy = static_cast<double>(correct) / static_cast<double>(test_set.size());
    const auto bytes = result.model.serialize();
    char id[17];
    std::snprintf(id, sizeof id, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    p.checkpoint_id = id;
    p.best_epoch = result.best_epoch;
    p.train_documents = train_set.size();
    if (opts.checkpoint_dir) {
      result.model.save(*opts.checkpoint_dir / ("size-" + std::to_string(size) + ".bin"));
    }
    log::info("scaling.point", {{"size_per_domain", size},
                                {"test_loss", p.test_loss},
                                {"test_accuracy", p.test_accuracy},
                                {"best_epoch", p.best_epoch},
                                {"train_documents", p.train_documents}});
    curve.points.push_back(std::move(p));
  }
  return curve;
}

std::string to_csv(const ScalingCurve& c) {
  std::ostringstream out;
  out << "size,loss,accuracy,checkpoint_id,best_epoch,train_documents\n";
  for (const auto& p : c.points) {
    out << p.size_per_domain << ',' << fmt_double(p.test_loss) << ','
        << fmt_double(p.test_accuracy) << ',' << p.checkpoint_id << ',' << p.best_epoch << ','
        << p.train_documents << '\n';
  }
  return out.str();
}

ScalingCurve curve_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  ScalingCurve c;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw EvalError("scaling csv row has wrong field count");
    c.points.push_back({std::stoull(f[0]), std::stod(f[1]), std::stod(f[2]), f[3],
                        std::stoi(f[4]), std::stoull(f[5])});
  }
  return c;
}

}  // namespace hnm::eval
