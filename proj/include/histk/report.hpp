#pragma once

// Structured (JSON) and plain-text renderings of every result type, plus
// checks of measured statistics against published reference values.

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "histk/conllu.hpp"
#include "histk/eval_metrics.hpp"
#include "histk/ner.hpp"
#include "histk/parse/train.hpp"
#include "histk/text_clean.hpp"
#include "histk/treebank_stats.hpp"

namespace histk::report {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// Two-decimal value for display; JSON keeps the exact double next to it.
inline std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline Json to_json(const Hundredths& h) { return h.value(); }

inline Json to_json(const ValidationReport& r) {
  Json v = Json::array();
  for (const auto& x : r.violations)
    v.push_back({{"kind", std::string(to_string(x.kind))}, {"ids", x.ids}, {"message", x.message}});
  return v;
}

inline Json to_json(const BasicStats& b) {
  return {{"num_sentences", b.num_sentences},
          {"num_tokens", b.num_tokens},
          {"num_multiword_ranges", b.num_multiword_ranges},
          {"avg_tokens_per_sentence", to_json(b.avg_tokens_per_sentence)},
          {"avg_tokens_per_sentence_raw", b.avg_tokens_per_sentence_raw},
          {"num_unique_upos", b.num_unique_upos},
          {"num_unique_feats", b.num_unique_feats},
          {"num_unique_deprels", b.num_unique_deprels}};
}

inline Json to_json(const RelationDistribution& d) {
  Json rows = Json::array();
  for (const auto& r : d.rows) rows.push_back({{"deprel", r.deprel}, {"count", r.count}, {"percent", to_json(r.percent)}});
  return {{"total_relations", d.total_relations}, {"rows", rows}};
}

inline Json to_json(const std::vector<ComparisonRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    Json metrics = Json::array();
    for (const auto& m : r.metrics)
      metrics.push_back(
          {{"relation", m.relation}, {"count", m.count}, {"percent", to_json(m.percent)}, {"absent", m.absent}});
    out.push_back({{"treebank", r.treebank_name},
                   {"avg_tokens_per_sentence", to_json(r.avg_tokens)},
                   {"avg_tokens_per_sentence_raw", r.avg_tokens_raw},
                   {"metrics", metrics}});
  }
  return out;
}

inline Json to_json(const NerStats& s) {
  Json ents = Json::object();
  std::size_t total = 0;
  for (const auto& [k, v] : s.entities) {
    ents[k] = v;
    total += v;
  }
  return {{"sentences", s.sentences}, {"tokens", s.tokens}, {"docstarts", s.docstarts}, {"entities", ents},
          {"entities_total", total}};
}

inline Json to_json(const PRF& p) {
  return {{"tp", p.tp}, {"fp", p.fp}, {"fn", p.fn}, {"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

inline Json to_json(const AttachmentScores& a) {
  return {{"uas", a.uas},
          {"las", a.las},
          {"correct_heads", a.correct_heads},
          {"correct_labeled", a.correct_labeled},
          {"total", a.total},
          {"excluded", a.excluded}};
}

inline Json to_json(const TaggingScores& t) {
  Json per = Json::object();
  for (const auto& [k, v] : t.per_tag) per[k] = to_json(v);
  Json conf = Json::array();
  for (const auto& [k, v] : t.confusion) conf.push_back({{"gold", k.first}, {"predicted", k.second}, {"count", v}});
  return {{"accuracy", t.accuracy}, {"macro_f1", t.macro_f1}, {"correct", t.correct},
          {"total", t.total},       {"per_tag", per},         {"confusion", conf}};
}

inline Json to_json(const SpanPRF& s) {
  Json per = Json::object();
  for (const auto& [k, v] : s.per_type) per[k] = to_json(v);
  return {{"micro", to_json(s.micro)}, {"per_type", per}};
}

inline Json to_json(const KappaResult& k) {
  return {{"kappa", k.kappa},       {"observed", k.observed},   {"expected", k.expected},
          {"n", k.n},               {"agreements", k.agreements}, {"chance_products", k.chance_products}};
}

inline Json to_json(const clean::RepairReport& r) {
  Json changes = Json::array();
  for (const auto& c : r.changes) {
    Json j = {{"step", r.steps.at(c.step)},
              {"rule_id", c.rule_id},
              {"class", std::string(clean::to_string(c.error_class))},
              {"offset", c.offset},
              {"before", c.before},
              {"after", c.after},
              {"confidence", c.confidence}};
    if (!c.alternatives.empty()) j["alternatives"] = c.alternatives;
    changes.push_back(std::move(j));
  }
  Json flags = Json::array();
  for (const auto& f : r.flags)
    flags.push_back({{"offset", f.offset},
                     {"length", f.length},
                     {"text", f.text},
                     {"reason", f.reason},
                     {"class", std::string(clean::to_string(f.error_class))}});
  Json per_rule = Json::object();
  for (const auto& [k, v] : r.per_rule) per_rule[k] = v;
  Json per_class = Json::object();
  for (const auto& [k, v] : r.per_class) per_class[std::string(clean::to_string(k))] = v;
  Json per_char = Json::object();
  for (const auto& [k, v] : r.per_character) per_char[k] = v;
  return {{"total_changes", r.total_changes()}, {"changes", changes},   {"flags", flags},
          {"per_rule", per_rule},               {"per_class", per_class}, {"per_character", per_char}};
}

inline Json to_json(const parse::TrainLog& log) {
  Json epochs = Json::array();
  for (const auto& e : log.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"loss", e.loss},
                      {"dev_primary", e.dev.primary},
                      {"dev_secondary", e.dev.secondary},
                      {"learning_rate", e.learning_rate},
                      {"step", e.step},
                      {"improved", e.improved}});
  return {{"best_epoch", log.best_epoch},
          {"best_score", log.best_score},
          {"stopped_early", log.stopped_early},
          {"epochs", epochs}};
}

// ---------------------------------------------------------------------------
// Reference checks. Each entry states the published value, the measured value
// and their difference, so a snapshot that differs from the publication is
// reported rather than hidden.

struct ReferenceCheck {
  std::string field;
  double expected = 0.0;
  double measured = 0.0;
  double tolerance = 0.0;

  double delta() const { return measured - expected; }
  // Values are compared in hundredths so 13.70 vs 13.7 is not a float question.
  bool ok() const {
    return std::llround(std::fabs(measured - expected) * 100.0) <= std::llround(tolerance * 100.0);
  }
};

inline Json to_json(const std::vector<ReferenceCheck>& checks) {
  Json out = Json::array();
  for (const auto& c : checks)
    out.push_back({{"field", c.field},
                   {"expected", c.expected},
                   {"measured", c.measured},
                   {"delta", c.delta()},
                   {"tolerance", c.tolerance},
                   {"ok", c.ok()}});
  return out;
}

inline bool all_ok(const std::vector<ReferenceCheck>& checks) {
  for (const auto& c : checks)
    if (!c.ok()) return false;
  return true;
}

// Reference layout: see data/reference/ota_boun.json.
inline std::vector<ReferenceCheck> check_treebank_reference(const BasicStats& b, const RelationDistribution& d,
                                                            const nlohmann::json& ref) {
  std::vector<ReferenceCheck> out;
  const double tol = ref.contains("tolerance") ? ref["tolerance"].value("percent", 0.01) : 0.01;
  if (ref.contains("basic")) {
    const auto& r = ref["basic"];
    auto count = [&](const char* key, std::size_t measured) {
      if (r.contains(key)) out.push_back({key, r[key].get<double>(), static_cast<double>(measured), 0.0});
    };
    count("num_sentences", b.num_sentences);
    count("num_tokens", b.num_tokens);
    count("num_unique_upos", b.num_unique_upos);
    count("num_unique_feats", b.num_unique_feats);
    count("num_unique_deprels", b.num_unique_deprels);
    if (r.contains("avg_tokens_per_sentence"))
      out.push_back({"avg_tokens_per_sentence", r["avg_tokens_per_sentence"].get<double>(),
                     b.avg_tokens_per_sentence.value(), tol});
  }
  if (ref.contains("relations")) {
    std::size_t ref_total = 0;
    for (const auto& [rel, v] : ref["relations"].items()) {
      const auto* row = d.find(rel);
      const double count = row ? static_cast<double>(row->count) : 0.0;
      const double pct = row ? row->percent.value() : 0.0;
      out.push_back({rel + ".count", v["count"].get<double>(), count, 0.0});
      out.push_back({rel + ".percent", v["percent"].get<double>(), pct, tol});
      ref_total += v["count"].get<std::size_t>();
    }
    out.push_back({"total_relations", static_cast<double>(ref_total), static_cast<double>(d.total_relations), 0.0});
  }
  return out;
}

inline std::vector<ReferenceCheck> check_comparison_reference(const ComparisonRow& row, const nlohmann::json& ref) {
  std::vector<ReferenceCheck> out;
  const double tol = ref.contains("tolerance") ? ref["tolerance"].value("percent", 0.01) : 0.01;
  if (!ref.contains("comparison")) return out;
  for (const auto& [key, v] : ref["comparison"].items()) {
    if (key == "avg_tokens_per_sentence") {
      out.push_back({key, v.get<double>(), row.avg_tokens.value(), tol});
      continue;
    }
    double measured = 0.0;
    for (const auto& m : row.metrics)
      if (m.relation == key) measured = m.percent.value();
    out.push_back({key + ".percent", v.get<double>(), measured, tol});
  }
  return out;
}

// Reference layout: see data/reference/histr.json. stats are keyed by partition.
inline std::vector<ReferenceCheck> check_ner_reference(const std::map<std::string, NerStats>& stats,
                                                       const nlohmann::json& ref) {
  std::vector<ReferenceCheck> out;
  NerStats total;
  for (const auto& [part, v] : ref.at("partitions").items()) {
    auto it = stats.find(part);
    if (it == stats.end()) continue;
    total += it->second;
    out.push_back({part + ".sentences", v["sentences"].get<double>(), static_cast<double>(it->second.sentences), 0});
    for (const char* t : {"PERSON", "LOCATION"})
      if (v.contains(t))
        out.push_back({part + "." + t, v[t].get<double>(), static_cast<double>(it->second.count(t)), 0});
  }
  if (stats.size() == ref.at("partitions").size() && ref.contains("total")) {
    const auto& t = ref["total"];
    out.push_back({"total.sentences", t["sentences"].get<double>(), static_cast<double>(total.sentences), 0});
    for (const char* k : {"PERSON", "LOCATION"})
      out.push_back({std::string("total.") + k, t[k].get<double>(), static_cast<double>(total.count(k)), 0});
  }
  if (ref.contains("train_tokens") && stats.count("train"))
    out.push_back({"train.tokens", ref["train_tokens"].get<double>(),
                   static_cast<double>(stats.at("train").tokens), 0});
  return out;
}

// ---------------------------------------------------------------------------
// Plain text

inline std::string text_basic(const std::string& name, const BasicStats& b) {
  std::ostringstream o;
  o << name << "\n"
    << "  sentences              " << b.num_sentences << "\n"
    << "  tokens                 " << b.num_tokens << "\n"
    << "  avg tokens/sentence    " << fixed2(b.avg_tokens_per_sentence.value()) << " ("
    << b.avg_tokens_per_sentence_raw << ")\n"
    << "  unique UPOS            " << b.num_unique_upos << "\n"
    << "  unique features        " << b.num_unique_feats << "\n"
    << "  unique relations       " << b.num_unique_deprels << "\n";
  if (b.num_multiword_ranges) o << "  multiword ranges       " << b.num_multiword_ranges << "\n";
  return o.str();
}

inline std::string text_relations(const RelationDistribution& d) {
  std::ostringstream o;
  o << "  relation          count      %\n";
  for (const auto& r : d.rows)
    o << "  " << std::left << std::setw(16) << r.deprel << std::right << std::setw(7) << r.count << std::setw(8)
      << fixed2(r.percent.value()) << "\n";
  o << "  total " << d.total_relations << "\n";
  return o.str();
}

inline std::string text_comparison(const std::vector<ComparisonRow>& rows) {
  std::ostringstream o;
  o << std::left << std::setw(24) << "";
  for (const auto& r : rows) o << std::right << std::setw(14) << r.treebank_name;
  o << "\n" << std::left << std::setw(24) << "avg tokens/sentence";
  for (const auto& r : rows) o << std::right << std::setw(14) << fixed2(r.avg_tokens.value());
  o << "\n";
  if (rows.empty()) return o.str();
  for (std::size_t m = 0; m < rows[0].metrics.size(); ++m) {
    o << std::left << std::setw(24) << (rows[0].metrics[m].relation + " (%)");
    for (const auto& r : rows)
      o << std::right << std::setw(14) << (r.metrics[m].absent ? std::string("-") : fixed2(r.metrics[m].percent.value()));
    o << "\n";
  }
  return o.str();
}

inline std::string text_checks(const std::vector<ReferenceCheck>& checks) {
  std::ostringstream o;
  for (const auto& c : checks) {
    if (c.ok() && c.delta() == 0.0) continue;
    o << "  " << (c.ok() ? "within tolerance " : "DIFFERS ") << c.field << ": expected " << c.expected
      << ", measured " << c.measured << ", delta " << c.delta() << "\n";
  }
  const bool ok = all_ok(checks);
  o << "  reference check: " << (ok ? "all values match" : "some values differ") << " (" << checks.size()
    << " fields)\n";
  return o.str();
}

inline std::string text_prf(const std::string& label, const PRF& p) {
  std::ostringstream o;
  o << "  " << std::left << std::setw(12) << label << " P " << fixed2(p.precision) << "  R " << fixed2(p.recall)
    << "  F1 " << fixed2(p.f1) << "  (tp " << p.tp << ", fp " << p.fp << ", fn " << p.fn << ")\n";
  return o.str();
}

}  // namespace histk::report
