#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "histk/conllu.hpp"

namespace histk {

// Fixed-point value with two decimals, rounded half-up from an exact ratio.
struct Hundredths {
  std::int64_t units = 0;  // value * 100

  double value() const { return static_cast<double>(units) / 100.0; }
  friend auto operator<=>(const Hundredths&, const Hundredths&) = default;

  // round_half_up(scale * num / den, 2) using integer arithmetic only.
  static Hundredths of_ratio(std::int64_t num, std::int64_t den, std::int64_t scale = 1) {
    if (den <= 0) throw std::invalid_argument("ratio with non-positive denominator");
    const std::int64_t scaled = num * scale * 100;
    return Hundredths{(2 * scaled + den) / (2 * den)};
  }
};

struct BasicStats {
  std::size_t num_sentences = 0;
  std::size_t num_tokens = 0;  // syntactic words; range lines excluded
  std::size_t num_multiword_ranges = 0;
  double avg_tokens_per_sentence_raw = 0.0;
  Hundredths avg_tokens_per_sentence;
  std::size_t num_unique_upos = 0;
  std::size_t num_unique_feats = 0;  // distinct key=value pairs
  std::size_t num_unique_deprels = 0;
};

struct RelationRow {
  std::string deprel;
  std::size_t count = 0;
  Hundredths percent;
};

struct RelationDistribution {
  std::vector<RelationRow> rows;  // sorted by deprel, byte order
  std::size_t total_relations = 0;

  const RelationRow* find(const std::string& deprel) const {
    auto it = std::lower_bound(rows.begin(), rows.end(), deprel,
                               [](const RelationRow& r, const std::string& d) { return r.deprel < d; });
    return it != rows.end() && it->deprel == deprel ? &*it : nullptr;
  }
};

struct MetricPercent {
  std::string relation;
  std::size_t count = 0;
  Hundredths percent;
  bool absent = false;  // relation never occurs in this treebank
};

struct ComparisonRow {
  std::string treebank_name;
  Hundredths avg_tokens;
  double avg_tokens_raw = 0.0;
  std::vector<MetricPercent> metrics;  // in requested order
};

// Order-independent partial counts; merge() is commutative and associative.
class TreebankAccumulator {
 public:
  void add(const Sentence& s) {
    ++sentences_;
    tokens_ += s.tokens.size();
    ranges_ += s.mwt.size();
    for (const auto& t : s.tokens) {
      upos_.insert(t.upos);
      ++deprels_[t.deprel];
      for (const auto& f : t.feats) feats_.insert(f.key + "=" + f.value);
    }
  }

  void add(const Treebank& tb) {
    for (const auto& s : tb.sentences) add(s);
  }

  void merge(const TreebankAccumulator& o) {
    sentences_ += o.sentences_;
    tokens_ += o.tokens_;
    ranges_ += o.ranges_;
    upos_.insert(o.upos_.begin(), o.upos_.end());
    feats_.insert(o.feats_.begin(), o.feats_.end());
    for (const auto& [k, v] : o.deprels_) deprels_[k] += v;
  }

  BasicStats basic() const {
    if (sentences_ == 0) throw std::invalid_argument("statistics over an empty treebank");
    BasicStats b;
    b.num_sentences = sentences_;
    b.num_tokens = tokens_;
    b.num_multiword_ranges = ranges_;
    b.avg_tokens_per_sentence_raw = static_cast<double>(tokens_) / static_cast<double>(sentences_);
    b.avg_tokens_per_sentence = Hundredths::of_ratio(static_cast<std::int64_t>(tokens_),
                                                     static_cast<std::int64_t>(sentences_));
    b.num_unique_upos = upos_.size();
    b.num_unique_feats = feats_.size();
    b.num_unique_deprels = deprels_.size();
    return b;
  }

  RelationDistribution relations() const {
    if (sentences_ == 0) throw std::invalid_argument("statistics over an empty treebank");
    RelationDistribution d;
    for (const auto& [rel, n] : deprels_) d.total_relations += n;
    for (const auto& [rel, n] : deprels_)
      d.rows.push_back(RelationRow{rel, n,
                                   Hundredths::of_ratio(static_cast<std::int64_t>(n),
                                                        static_cast<std::int64_t>(d.total_relations), 100)});
    return d;
  }

 private:
  std::size_t sentences_ = 0;
  std::size_t tokens_ = 0;
  std::size_t ranges_ = 0;
  std::set<std::string> upos_;
  std::set<std::string> feats_;
  std::map<std::string, std::size_t> deprels_;
};

inline BasicStats basic_stats(const Treebank& tb) {
  TreebankAccumulator acc;
  acc.add(tb);
  return acc.basic();
}

// Percent denominator is the number of relation rows (one per syntactic word).
inline RelationDistribution relation_distribution(const Treebank& tb) {
  TreebankAccumulator acc;
  acc.add(tb);
  return acc.relations();
}

inline std::vector<ComparisonRow> compare_treebanks(const std::vector<const Treebank*>& tbs,
                                                    const std::vector<std::string>& metrics) {
  if (tbs.empty()) throw std::invalid_argument("compare_treebanks needs at least one treebank");
  std::vector<ComparisonRow> rows;
  for (const Treebank* tb : tbs) {
    TreebankAccumulator acc;
    acc.add(*tb);
    auto basic = acc.basic();
    auto dist = acc.relations();
    ComparisonRow row;
    row.treebank_name = tb->source_name;
    row.avg_tokens = basic.avg_tokens_per_sentence;
    row.avg_tokens_raw = basic.avg_tokens_per_sentence_raw;
    for (const auto& m : metrics) {
      MetricPercent mp{m, 0, {}, true};
      if (const auto* r = dist.find(m)) {
        mp.count = r->count;
        mp.percent = r->percent;
        mp.absent = false;
      }
      row.metrics.push_back(mp);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<ComparisonRow> compare_treebanks(const std::vector<Treebank>& tbs,
                                                    const std::vector<std::string>& metrics) {
  std::vector<const Treebank*> ptrs;
  for (const auto& tb : tbs) ptrs.push_back(&tb);
  return compare_treebanks(ptrs, metrics);
}

}  // namespace histk
