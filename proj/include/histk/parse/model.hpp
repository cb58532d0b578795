#pragma once

// Parser and tagger models: parameters plus the inventories they were built
// with, example construction, loss with gradients, and prediction.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "histk/conllu.hpp"
#include "histk/ner.hpp"
#include "histk/parse/biaffine.hpp"
#include "histk/parse/encoder.hpp"
#include "histk/parse/mst.hpp"
#include "histk/parse/tagger.hpp"
#include "histk/parse/vectors.hpp"

namespace histk::parse {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Data carries labels or tags the model was not trained with.
class InventoryMismatch : public ModelError {
 public:
  using ModelError::ModelError;
};

struct ParserConfig {
  EncoderConfig encoder;
  int arc_hidden = ArcScorerParams::kDefaultHidden;
  int label_hidden = LabelScorerParams::kDefaultHidden;
  double arc_dropout = ArcScorerParams::kDefaultDropout;
  double label_dropout = LabelScorerParams::kDefaultDropout;
};

struct TaggerConfig {
  EncoderConfig encoder;
  double input_dropout = TaggerParams::kDefaultInputDropout;
};

struct ParserModel {
  EncoderConfig encoder_config;
  Vocabulary vocab;
  std::vector<std::string> labels;
  EncoderParams encoder;
  ArcScorerParams arc;
  LabelScorerParams label;

  int label_index(const std::string& l) const {
    auto it = std::lower_bound(labels.begin(), labels.end(), l);
    return it != labels.end() && *it == l ? static_cast<int>(it - labels.begin()) : -1;
  }

  template <typename F>
  void visit(F&& f) {
    encoder.visit(f);
    arc.visit(f);
    label.visit(f);
  }
  template <typename F>
  void visit(F&& f) const {
    encoder.visit(f);
    arc.visit(f);
    label.visit(f);
  }
};

struct TaggerModel {
  std::string task = "pos";  // "pos" fills UPOS, "ner" emits BIO tags
  EncoderConfig encoder_config;
  Vocabulary vocab;
  std::vector<std::string> tags;
  EncoderParams encoder;
  TaggerParams tagger;

  int tag_index(const std::string& t) const {
    auto it = std::lower_bound(tags.begin(), tags.end(), t);
    return it != tags.end() && *it == t ? static_cast<int>(it - tags.begin()) : -1;
  }

  template <typename F>
  void visit(F&& f) {
    encoder.visit(f);
    tagger.visit(f);
  }
  template <typename F>
  void visit(F&& f) const {
    encoder.visit(f);
    tagger.visit(f);
  }
};

struct TokenSeq {
  std::vector<int> ids;
  const Eigen::MatrixXd* external = nullptr;
};

struct ParseExample {
  TokenSeq x;
  Heads heads;
  std::vector<int> labels;
};

struct TagExample {
  TokenSeq x;
  std::vector<int> tags;
};

// Token forms and tags in parallel, one inner vector per sentence.
struct TagData {
  std::vector<std::vector<std::string>> forms;
  std::vector<std::vector<std::string>> tags;
};

inline TagData upos_data(const Treebank& tb) {
  TagData d;
  for (const auto& s : tb.sentences) {
    d.forms.emplace_back();
    d.tags.emplace_back();
    for (const auto& t : s.tokens) {
      d.forms.back().push_back(t.form);
      d.tags.back().push_back(t.upos);
    }
  }
  return d;
}

inline TagData ner_data(const NerCorpus& c) {
  TagData d;
  for (const auto& s : c.sentences) {
    d.forms.emplace_back();
    d.tags.emplace_back();
    for (const auto& t : s) {
      d.forms.back().push_back(t.form);
      d.tags.back().push_back(t.tag);
    }
  }
  return d;
}

namespace detail {

inline const Eigen::MatrixXd* external_for(const ExternalVectors* ext, std::size_t s, std::size_t n) {
  if (ext == nullptr) return nullptr;
  if (s >= ext->sentences.size())
    throw std::invalid_argument("external vectors cover " + std::to_string(ext->sentences.size()) +
                                " sentences; sentence " + std::to_string(s + 1) + " has none");
  const auto& m = ext->sentences[s];
  if (static_cast<std::size_t>(m.cols()) != n)
    throw std::invalid_argument("external vectors for sentence " + std::to_string(s + 1) + " have " +
                                std::to_string(m.cols()) + " rows for " + std::to_string(n) + " tokens");
  return &m;
}

inline void require_external(const EncoderConfig& cfg, const ExternalVectors* ext) {
  if (cfg.mode == EncoderMode::kExternalVectors && ext == nullptr)
    throw std::invalid_argument("external-vectors mode needs a vector file");
}

inline TokenSeq token_seq(const Vocabulary& v, const std::vector<std::string>& forms, const Eigen::MatrixXd* ext) {
  TokenSeq x;
  x.external = ext;
  for (const auto& f : forms) x.ids.push_back(v.id(f));
  return x;
}

inline std::vector<std::string> forms_of(const Sentence& s) {
  std::vector<std::string> f;
  for (const auto& t : s.tokens) f.push_back(t.form);
  return f;
}

inline double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  double mx = kMasked;
  for (Eigen::Index i = 0; i < v.size(); ++i) mx = std::max(mx, v(i));
  double z = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v(i) != kMasked) z += std::exp(v(i) - mx);
  return mx + std::log(z);
}

// Cross-entropy of each column against gold; writes softmax - onehot into grad.
inline double column_cross_entropy(const Eigen::MatrixXd& scores, const std::vector<int>& gold, int first_col,
                                   Eigen::MatrixXd& grad) {
  double loss = 0.0;
  for (std::size_t j = 0; j < gold.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j) + first_col;
    loss += log_sum_exp(scores.col(col)) - scores(gold[j], col);
    grad.col(col) = masked_softmax(scores.col(col));
    grad(gold[j], col) -= 1.0;
  }
  return loss;
}

}  // namespace detail

inline ParserModel init_parser(const Treebank& train, const ParserConfig& cfg, const ExternalVectors* ext,
                               Rng& rng) {
  cfg.encoder.validate();
  detail::require_external(cfg.encoder, ext);
  if (train.sentences.empty()) throw std::invalid_argument("training treebank is empty");
  ParserModel m;
  m.encoder_config = cfg.encoder;
  std::set<std::string> labels;
  for (const auto& s : train.sentences)
    for (const auto& t : s.tokens) {
      if (cfg.encoder.mode == EncoderMode::kTrainableLookup) m.vocab.add(t.form);
      labels.insert(t.deprel);
    }
  m.labels.assign(labels.begin(), labels.end());
  m.encoder = init_encoder(cfg.encoder, m.vocab.size(), ext ? ext->dim : 0, rng);
  const int d = encoder_dim(m.encoder);
  m.arc = init_arc_scorer(d, cfg.arc_hidden, rng);
  m.arc.dropout = cfg.arc_dropout;
  m.label = init_label_scorer(d, cfg.label_hidden, static_cast<int>(m.labels.size()), rng);
  m.label.dropout = cfg.label_dropout;
  return m;
}

inline TaggerModel init_tagger_model(const TagData& train, const TaggerConfig& cfg, const ExternalVectors* ext,
                                     Rng& rng) {
  cfg.encoder.validate();
  detail::require_external(cfg.encoder, ext);
  if (train.forms.empty()) throw std::invalid_argument("training data is empty");
  TaggerModel m;
  m.encoder_config = cfg.encoder;
  std::set<std::string> tags;
  for (std::size_t s = 0; s < train.forms.size(); ++s)
    for (std::size_t i = 0; i < train.forms[s].size(); ++i) {
      if (cfg.encoder.mode == EncoderMode::kTrainableLookup) m.vocab.add(train.forms[s][i]);
      tags.insert(train.tags[s][i]);
    }
  m.tags.assign(tags.begin(), tags.end());
  m.encoder = init_encoder(cfg.encoder, m.vocab.size(), ext ? ext->dim : 0, rng);
  m.tagger = init_tagger(encoder_dim(m.encoder), static_cast<int>(m.tags.size()), rng);
  m.tagger.input_dropout = cfg.input_dropout;
  return m;
}

inline std::vector<ParseExample> parse_examples(const ParserModel& m, const Treebank& tb,
                                                const ExternalVectors* ext) {
  detail::require_external(m.encoder_config, ext);
  std::vector<ParseExample> out;
  for (std::size_t s = 0; s < tb.sentences.size(); ++s) {
    const auto& sent = tb.sentences[s];
    ParseExample ex;
    ex.x = detail::token_seq(m.vocab, detail::forms_of(sent), detail::external_for(ext, s, sent.tokens.size()));
    for (const auto& t : sent.tokens) {
      if (t.head < 0) throw std::invalid_argument("sentence " + std::to_string(s + 1) + " has unannotated heads");
      const int l = m.label_index(t.deprel);
      if (l < 0)
        throw InventoryMismatch("relation '" + t.deprel + "' in sentence " + std::to_string(s + 1) +
                                " is not in the model's label inventory");
      ex.heads.push_back(t.head);
      ex.labels.push_back(l);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

inline std::vector<TagExample> tag_examples(const TaggerModel& m, const TagData& data, const ExternalVectors* ext) {
  detail::require_external(m.encoder_config, ext);
  std::vector<TagExample> out;
  for (std::size_t s = 0; s < data.forms.size(); ++s) {
    TagExample ex;
    ex.x = detail::token_seq(m.vocab, data.forms[s], detail::external_for(ext, s, data.forms[s].size()));
    for (const auto& t : data.tags[s]) {
      const int k = m.tag_index(t);
      if (k < 0)
        throw InventoryMismatch("tag '" + t + "' in sentence " + std::to_string(s + 1) +
                                " is not in the model's tag inventory");
      ex.tags.push_back(k);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

// Summed head and label cross-entropy of one sentence; labels are scored under
// the gold heads. Gradients are added into grad when it is non-null.
inline double parser_loss(const ParserModel& m, const ParseExample& ex, Noise noise, ParserModel* grad) {
  EncoderCache ec;
  const Eigen::MatrixXd E = encode(EncoderInput{ex.x.ids, ex.x.external}, m.encoder_config, m.encoder, noise, &ec);
  ArcCache ac;
  const ScoreMatrix S = score_arcs(E, m.arc, noise, &ac);
  LabelCache lc;
  const Eigen::MatrixXd Ls = score_labels(E, ex.heads, m.label, noise, &lc);

  Eigen::MatrixXd gS = Eigen::MatrixXd::Zero(S.arc.rows(), S.arc.cols());
  Eigen::MatrixXd gL = Eigen::MatrixXd::Zero(Ls.rows(), Ls.cols());
  double loss = detail::column_cross_entropy(S.arc, ex.heads, 1, gS);
  loss += detail::column_cross_entropy(Ls, ex.labels, 0, gL);
  if (grad != nullptr) {
    Eigen::MatrixXd dE = score_arcs_backward(E, m.arc, ac, gS, grad->arc);
    dE += score_labels_backward(E, ex.heads, m.label, lc, gL, grad->label);
    encode_backward(dE, m.encoder_config, ec, grad->encoder);
  }
  return loss;
}

inline double tagger_loss(const TaggerModel& m, const TagExample& ex, Noise noise, TaggerModel* grad) {
  EncoderCache ec;
  const Eigen::MatrixXd E = encode(EncoderInput{ex.x.ids, ex.x.external}, m.encoder_config, m.encoder, noise, &ec);
  TaggerCache tc;
  const Eigen::MatrixXd T = tag_scores(E, m.tagger, noise, &tc);
  Eigen::MatrixXd gT = Eigen::MatrixXd::Zero(T.rows(), T.cols());
  const double loss = detail::column_cross_entropy(T, ex.tags, 0, gT);
  if (grad != nullptr) {
    const Eigen::MatrixXd dE = tag_scores_backward(E, m.tagger, tc, gT, grad->tagger);
    encode_backward(dE, m.encoder_config, ec, grad->encoder);
  }
  return loss;
}

enum class Decoder { kMst, kGreedy };

struct ParsePrediction {
  Heads heads;
  std::vector<int> labels;
};

inline ParsePrediction predict(const ParserModel& m, const TokenSeq& x, Decoder dec = Decoder::kMst) {
  const Eigen::MatrixXd E = encode(EncoderInput{x.ids, x.external}, m.encoder_config, m.encoder, {});
  const ScoreMatrix S = score_arcs(E, m.arc);
  ParsePrediction p;
  p.heads = dec == Decoder::kMst ? decode_mst(S) : decode_greedy(S);
  const Eigen::MatrixXd L = score_labels(E, p.heads, m.label);
  // The root child takes `root`; no other word may.
  const int root = m.label_index("root");
  for (std::size_t d = 0; d < p.heads.size(); ++d) {
    const auto col = static_cast<Eigen::Index>(d);
    if (root < 0) {
      p.labels.push_back(argmax(L.col(col)));
    } else if (p.heads[d] == 0) {
      p.labels.push_back(root);
    } else {
      Eigen::VectorXd v = L.col(col);
      if (v.size() > 1) v(root) = kMasked;
      p.labels.push_back(argmax(v));
    }
  }
  return p;
}

// Copies tb and fills HEAD and DEPREL of every word.
inline Treebank parse_treebank(const ParserModel& m, const Treebank& tb, const ExternalVectors* ext,
                               Decoder dec = Decoder::kMst) {
  detail::require_external(m.encoder_config, ext);
  Treebank out = tb;
  for (std::size_t s = 0; s < out.sentences.size(); ++s) {
    auto& sent = out.sentences[s];
    const auto x =
        detail::token_seq(m.vocab, detail::forms_of(sent), detail::external_for(ext, s, sent.tokens.size()));
    const auto p = predict(m, x, dec);
    for (std::size_t i = 0; i < sent.tokens.size(); ++i) {
      sent.tokens[i].head = p.heads[i];
      sent.tokens[i].deprel = m.labels[p.labels[i]];
    }
  }
  return out;
}

inline std::vector<std::vector<std::string>> tag_sentences(const TaggerModel& m,
                                                           const std::vector<std::vector<std::string>>& forms,
                                                           const ExternalVectors* ext) {
  detail::require_external(m.encoder_config, ext);
  std::vector<std::vector<std::string>> out;
  for (std::size_t s = 0; s < forms.size(); ++s) {
    const auto x = detail::token_seq(m.vocab, forms[s], detail::external_for(ext, s, forms[s].size()));
    const Eigen::MatrixXd E = encode(EncoderInput{x.ids, x.external}, m.encoder_config, m.encoder, {});
    out.emplace_back();
    for (int k : tag(E, m.tagger)) out.back().push_back(m.tags[k]);
  }
  return out;
}

}  // namespace histk::parse
