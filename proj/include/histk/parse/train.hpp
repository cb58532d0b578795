#pragma once

// Mini-batch training with Adam, a warmup/inverse-square-root schedule and
// early stopping on a dev score. Single-threaded; examples are visited in a
// seeded shuffled order and gradients are summed in that order, so a fixed
// seed reproduces a run bit for bit.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "histk/eval_metrics.hpp"
#include "histk/ner.hpp"
#include "histk/parse/model.hpp"

namespace histk::parse {

inline constexpr std::uint64_t kDefaultSeed = 1907;

struct TrainConfig {
  static constexpr double kParserLearningRate = 4e-5;
  static constexpr double kNerLearningRate = 5e-5;

  double learning_rate = kParserLearningRate;
  int warmup_steps = 400;
  int batch_size = 32;
  int max_epochs = 300;
  int patience = 15;
  std::uint64_t seed = kDefaultSeed;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Decoder decoder = Decoder::kMst;  // used for dev scoring

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (warmup_steps <= 0) throw std::invalid_argument("warmup_steps must be positive");
    if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
    if (max_epochs <= 0) throw std::invalid_argument("max_epochs must be positive");
    if (patience <= 0) throw std::invalid_argument("patience must be positive");
    if (patience > max_epochs) throw std::invalid_argument("patience must not exceed max_epochs");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw std::invalid_argument("Adam betas must lie in [0,1)");
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  }
};

// lr(t) = base * min(t / warmup, sqrt(warmup / t)), t counted from 1.
inline double scheduled_lr(double base, std::int64_t step, int warmup) {
  const double t = static_cast<double>(std::max<std::int64_t>(step, 1));
  const double w = static_cast<double>(warmup);
  return base * std::min(t / w, std::sqrt(w / t));
}

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::int64_t step, int epoch)
      : std::runtime_error("loss became non-finite at step " + std::to_string(step) + " (epoch " +
                           std::to_string(epoch) + ")"),
        step_(step),
        epoch_(epoch) {}
  std::int64_t step() const noexcept { return step_; }
  int epoch() const noexcept { return epoch_; }

 private:
  std::int64_t step_;
  int epoch_;
};

struct DevScore {
  double primary = 0.0;    // LAS, tagging accuracy or span F1
  double secondary = 0.0;  // UAS or tagging accuracy
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;  // summed over the epoch
  DevScore dev;
  double learning_rate = 0.0;  // at the last step of the epoch
  std::int64_t step = 0;
  bool improved = false;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;
  double best_score = 0.0;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochLog&)>;

struct FlatView {
  std::string name;
  double* data;
  Eigen::Index size;
};

template <typename Model>
std::vector<FlatView> flat_views(Model& m) {
  std::vector<FlatView> v;
  m.visit([&](auto&& name, auto& mat) { v.push_back(FlatView{name, mat.data(), mat.size()}); });
  return v;
}

template <typename Model>
Model zeros_like(const Model& m) {
  Model z = m;
  z.visit([](auto&&, auto& mat) { mat.setZero(); });
  return z;
}

template <typename Model>
class Adam {
 public:
  Adam(const Model& like, const TrainConfig& cfg) : m_(zeros_like(like)), v_(zeros_like(like)), cfg_(cfg) {}

  void step(Model& params, Model& grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto p = flat_views(params);
    auto g = flat_views(grad);
    auto m = flat_views(m_);
    auto v = flat_views(v_);
    for (std::size_t b = 0; b < p.size(); ++b)
      for (Eigen::Index i = 0; i < p[b].size; ++i) {
        const double gi = g[b].data[i];
        m[b].data[i] = cfg_.beta1 * m[b].data[i] + (1.0 - cfg_.beta1) * gi;
        v[b].data[i] = cfg_.beta2 * v[b].data[i] + (1.0 - cfg_.beta2) * gi * gi;
        p[b].data[i] -= lr * (m[b].data[i] / c1) / (std::sqrt(v[b].data[i] / c2) + cfg_.epsilon);
      }
  }

 private:
  Model m_, v_;
  TrainConfig cfg_;
  std::int64_t t_ = 0;
};

// Generic loop. loss(model, example, noise, grad*) returns the example loss and
// adds its gradient; eval(model) scores the dev set. model ends at its best epoch.
template <typename Model, typename Example, typename LossFn, typename EvalFn>
TrainLog fit(Model& model, const std::vector<Example>& train, LossFn&& loss, EvalFn&& eval, const TrainConfig& cfg,
             const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("no training examples");
  Rng rng(cfg.seed + 1);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Model grad = zeros_like(model);
  Adam<Model> adam(model, cfg);
  Model best = model;
  TrainLog log;
  log.best_score = -std::numeric_limits<double>::infinity();
  std::int64_t step = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog el;
    el.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      grad.visit([](auto&&, auto& mat) { mat.setZero(); });
      double batch_loss = 0.0;
      for (std::size_t i = start; i < stop; ++i) batch_loss += loss(model, train[order[i]], Noise{&rng}, &grad);
      ++step;
      if (!std::isfinite(batch_loss)) throw TrainingDiverged(step, epoch);
      el.learning_rate = scheduled_lr(cfg.learning_rate, step, cfg.warmup_steps);
      adam.step(model, grad, el.learning_rate);
      // An overflowing update would otherwise surface later as a decoding failure.
      bool finite = true;
      model.visit([&](auto&&, auto& mat) { finite = finite && mat.allFinite(); });
      if (!finite) throw TrainingDiverged(step, epoch);
      el.loss += batch_loss;
    }
    el.step = step;
    el.dev = eval(static_cast<const Model&>(model));
    el.improved = el.dev.primary > log.best_score;
    if (el.improved) {
      log.best_score = el.dev.primary;
      log.best_epoch = epoch;
      best = model;
    }
    log.epochs.push_back(el);
    if (on_epoch) on_epoch(el);
    if (epoch - log.best_epoch >= cfg.patience) {
      log.stopped_early = epoch < cfg.max_epochs;
      break;
    }
  }
  model = std::move(best);
  return log;
}

struct ParserTrainResult {
  ParserModel model;
  TrainLog log;
};

inline DevScore parser_dev_score(const ParserModel& m, const Treebank& dev, const ExternalVectors* ext,
                                 Decoder dec) {
  const auto scores = attachment_scores(dev, parse_treebank(m, dev, ext, dec));
  return DevScore{scores.las, scores.uas};
}

inline ParserTrainResult train_parser(const Treebank& train, const Treebank& dev, const ParserConfig& pcfg,
                                      const TrainConfig& cfg, const ExternalVectors* train_ext = nullptr,
                                      const ExternalVectors* dev_ext = nullptr, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (dev.sentences.empty()) throw std::invalid_argument("dev treebank is empty");
  Rng rng(cfg.seed);
  ParserTrainResult r{init_parser(train, pcfg, train_ext, rng), {}};
  const auto examples = parse_examples(r.model, train, train_ext);
  r.log = fit(
      r.model, examples,
      [](const ParserModel& m, const ParseExample& ex, Noise noise, ParserModel* g) {
        return parser_loss(m, ex, noise, g);
      },
      [&](const ParserModel& m) { return parser_dev_score(m, dev, dev_ext, cfg.decoder); }, cfg, on_epoch);
  return r;
}

enum class TagScoring { kAccuracy, kSpanF1 };

struct TaggerTrainResult {
  TaggerModel model;
  TrainLog log;
};

inline DevScore tagger_dev_score(const TaggerModel& m, const TagData& dev, const ExternalVectors* ext,
                                 TagScoring scoring) {
  const auto pred = tag_sentences(m, dev.forms, ext);
  const auto acc = tagging_scores(dev.tags, pred);
  if (scoring == TagScoring::kAccuracy) return DevScore{acc.accuracy, acc.accuracy};
  NerCorpus gold, sys;
  for (std::size_t s = 0; s < dev.forms.size(); ++s) {
    gold.sentences.emplace_back();
    sys.sentences.emplace_back();
    for (std::size_t i = 0; i < dev.forms[s].size(); ++i) {
      gold.sentences.back().push_back(NerToken{dev.forms[s][i], dev.tags[s][i], {}});
      sys.sentences.back().push_back(NerToken{dev.forms[s][i], pred[s][i], {}});
    }
  }
  return DevScore{ner_prf(gold, sys).micro.f1, acc.accuracy};
}

inline TaggerTrainResult train_tagger(const TagData& train, const TagData& dev, const TaggerConfig& tcfg,
                                      const TrainConfig& cfg, TagScoring scoring = TagScoring::kAccuracy,
                                      const ExternalVectors* train_ext = nullptr,
                                      const ExternalVectors* dev_ext = nullptr, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (dev.forms.empty()) throw std::invalid_argument("dev data is empty");
  Rng rng(cfg.seed);
  TaggerTrainResult r{init_tagger_model(train, tcfg, train_ext, rng), {}};
  const auto examples = tag_examples(r.model, train, train_ext);
  r.log = fit(
      r.model, examples,
      [](const TaggerModel& m, const TagExample& ex, Noise noise, TaggerModel* g) {
        return tagger_loss(m, ex, noise, g);
      },
      [&](const TaggerModel& m) { return tagger_dev_score(m, dev, dev_ext, scoring); }, cfg, on_epoch);
  return r;
}

}  // namespace histk::parse
