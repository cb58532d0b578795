#pragma once

// Attachment scores, tagging scores, exact-span NER P/R/F1 and Cohen's kappa.
// Every ratio is derived from integer counts that are kept in the result.

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "histk/conllu.hpp"
#include "histk/error.hpp"
#include "histk/ner.hpp"

namespace histk {

inline double percent(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

struct AttachmentScores {
  double uas = 0.0;
  double las = 0.0;
  std::size_t correct_heads = 0;
  std::size_t correct_labeled = 0;
  std::size_t total = 0;
  std::size_t excluded = 0;  // punctuation words skipped when include_punct is off
};

struct AttachmentOptions {
  bool include_punct = true;  // words whose gold UPOS is PUNCT
};

namespace detail {

inline void check_segmentation(const Treebank& gold, const Treebank& pred) {
  if (gold.sentences.size() != pred.sentences.size())
    throw SegmentationMismatch("sentence count differs: gold " + std::to_string(gold.sentences.size()) +
                                   ", predicted " + std::to_string(pred.sentences.size()),
                               std::min(gold.sentences.size(), pred.sentences.size()), 0);
  for (std::size_t s = 0; s < gold.sentences.size(); ++s) {
    const auto& g = gold.sentences[s].tokens;
    const auto& p = pred.sentences[s].tokens;
    if (g.size() != p.size())
      throw SegmentationMismatch("sentence " + std::to_string(s + 1) + ": gold has " + std::to_string(g.size()) +
                                     " words, predicted " + std::to_string(p.size()),
                                 s, std::min(g.size(), p.size()));
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g[i].form != p[i].form)
        throw SegmentationMismatch("sentence " + std::to_string(s + 1) + ", word " + std::to_string(i + 1) +
                                       ": gold form '" + g[i].form + "' vs predicted '" + p[i].form + "'",
                                   s, i);
  }
}

inline void check_tokenization(const NerCorpus& gold, const NerCorpus& pred) {
  if (gold.sentences.size() != pred.sentences.size())
    throw SegmentationMismatch("sentence count differs: gold " + std::to_string(gold.sentences.size()) +
                                   ", predicted " + std::to_string(pred.sentences.size()),
                               std::min(gold.sentences.size(), pred.sentences.size()), 0);
  for (std::size_t s = 0; s < gold.sentences.size(); ++s) {
    const auto& g = gold.sentences[s];
    const auto& p = pred.sentences[s];
    if (g.size() != p.size())
      throw SegmentationMismatch("sentence " + std::to_string(s + 1) + ": token count differs", s,
                                 std::min(g.size(), p.size()));
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g[i].form != p[i].form)
        throw SegmentationMismatch("sentence " + std::to_string(s + 1) + ", token " + std::to_string(i + 1) +
                                       ": '" + g[i].form + "' vs '" + p[i].form + "'",
                                   s, i);
  }
}

}  // namespace detail

inline AttachmentScores attachment_scores(const Treebank& gold, const Treebank& pred,
                                          AttachmentOptions opts = {}) {
  detail::check_segmentation(gold, pred);
  AttachmentScores r;
  for (std::size_t s = 0; s < gold.sentences.size(); ++s) {
    const auto& g = gold.sentences[s].tokens;
    const auto& p = pred.sentences[s].tokens;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!opts.include_punct && g[i].upos == "PUNCT") {
        ++r.excluded;
        continue;
      }
      ++r.total;
      if (g[i].head >= 0 && g[i].head == p[i].head) {
        ++r.correct_heads;
        if (g[i].deprel == p[i].deprel) ++r.correct_labeled;
      }
    }
  }
  r.uas = percent(r.correct_heads, r.total);
  r.las = percent(r.correct_labeled, r.total);
  return r;
}

struct PRF {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  // F1 as 2tp / (2tp + fp + fn), equal to 2PR / (P + R) and 0 when both are 0.
  void finish() {
    precision = percent(tp, tp + fp);
    recall = percent(tp, tp + fn);
    f1 = percent(2 * tp, 2 * tp + fp + fn);
  }
};

struct TaggingScores {
  double accuracy = 0.0;  // micro; equals micro F1 with one label per token
  double macro_f1 = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::map<std::string, PRF> per_tag;
  std::map<std::pair<std::string, std::string>, std::size_t> confusion;  // (gold, predicted)
};

inline TaggingScores tagging_scores(const std::vector<std::vector<std::string>>& gold,
                                    const std::vector<std::vector<std::string>>& pred) {
  TaggingScores r;
  for (std::size_t s = 0; s < gold.size(); ++s)
    for (std::size_t i = 0; i < gold[s].size(); ++i) {
      const auto& g = gold[s][i];
      const auto& p = pred[s][i];
      ++r.total;
      ++r.confusion[{g, p}];
      if (g == p) {
        ++r.correct;
        ++r.per_tag[g].tp;
      } else {
        ++r.per_tag[g].fn;
        ++r.per_tag[p].fp;
      }
    }
  r.accuracy = percent(r.correct, r.total);
  double sum = 0.0;
  for (auto& [tag, prf] : r.per_tag) {
    prf.finish();
    sum += prf.f1;
  }
  r.macro_f1 = r.per_tag.empty() ? 0.0 : sum / static_cast<double>(r.per_tag.size());
  return r;
}

inline TaggingScores upos_score(const Treebank& gold, const Treebank& pred) {
  detail::check_segmentation(gold, pred);
  std::vector<std::vector<std::string>> g, p;
  for (std::size_t s = 0; s < gold.sentences.size(); ++s) {
    g.emplace_back();
    p.emplace_back();
    for (std::size_t i = 0; i < gold.sentences[s].tokens.size(); ++i) {
      g.back().push_back(gold.sentences[s].tokens[i].upos);
      p.back().push_back(pred.sentences[s].tokens[i].upos);
    }
  }
  return tagging_scores(g, p);
}

struct SpanPRF {
  PRF micro;
  std::map<std::string, PRF> per_type;
};

// Exact-match span scoring. Both sides are first brought to IOB2 (a stray
// I-X opens a span), the usual convention for scoring system output.
inline SpanPRF ner_prf(const NerCorpus& gold, const NerCorpus& pred) {
  detail::check_tokenization(gold, pred);
  auto g_fixed = validate_bio(gold, BioMode::kRepair).first;
  auto p_fixed = validate_bio(pred, BioMode::kRepair).first;
  SpanPRF r;
  for (std::size_t s = 0; s < gold.sentences.size(); ++s) {
    auto gs = spans_from_bio(tags_of(g_fixed.sentences[s]));
    auto ps = spans_from_bio(tags_of(p_fixed.sentences[s]));
    std::set<EntitySpan> gset(gs.begin(), gs.end());
    std::set<EntitySpan> pset(ps.begin(), ps.end());
    for (const auto& sp : pset) {
      if (gset.count(sp))
        ++r.per_type[sp.entity_type].tp;
      else
        ++r.per_type[sp.entity_type].fp;
    }
    for (const auto& sp : gset)
      if (!pset.count(sp)) ++r.per_type[sp.entity_type].fn;
  }
  for (auto& [type, prf] : r.per_type) {
    r.micro.tp += prf.tp;
    r.micro.fp += prf.fp;
    r.micro.fn += prf.fn;
    prf.finish();
  }
  r.micro.finish();
  return r;
}

struct KappaResult {
  double observed = 0.0;  // p_o
  double expected = 0.0;  // p_e
  double kappa = 0.0;
  std::size_t n = 0;
  std::size_t agreements = 0;
  std::uint64_t chance_products = 0;  // sum over labels of count_a(k) * count_b(k)
};

inline KappaResult cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("kappa over sequences of different length (" + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  if (a.empty()) throw std::invalid_argument("kappa over empty sequences");
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> counts;
  KappaResult r;
  r.n = a.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) ++r.agreements;
    ++counts[a[i]].first;
    ++counts[b[i]].second;
  }
  for (const auto& [label, c] : counts) r.chance_products += c.first * c.second;
  const auto n = static_cast<std::uint64_t>(r.n);
  const double n2 = static_cast<double>(n * n);
  r.observed = static_cast<double>(r.agreements) / static_cast<double>(n);
  r.expected = static_cast<double>(r.chance_products) / n2;
  if (r.chance_products == n * n) {
    // Both annotators used one and the same label throughout.
    r.kappa = 1.0;
  } else {
    r.kappa = (static_cast<double>(r.agreements * n) - static_cast<double>(r.chance_products)) /
              (n2 - static_cast<double>(r.chance_products));
  }
  return r;
}

struct IaaReport {
  AttachmentScores attachment;  // first annotator taken as reference
  KappaResult deprel_kappa;
};

inline IaaReport iaa_report(const Treebank& ann_a, const Treebank& ann_b, AttachmentOptions opts = {}) {
  IaaReport r;
  r.attachment = attachment_scores(ann_a, ann_b, opts);
  std::vector<std::string> la, lb;
  for (std::size_t s = 0; s < ann_a.sentences.size(); ++s)
    for (std::size_t i = 0; i < ann_a.sentences[s].tokens.size(); ++i) {
      la.push_back(ann_a.sentences[s].tokens[i].deprel);
      lb.push_back(ann_b.sentences[s].tokens[i].deprel);
    }
  r.deprel_kappa = cohen_kappa(la, lb);
  return r;
}

}  // namespace histk
