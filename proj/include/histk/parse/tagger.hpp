#pragma once

// Per-token linear tagger: scores = W drop(E[:,1..n]) + b.

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

#include "histk/parse/biaffine.hpp"
#include "histk/parse/encoder.hpp"

namespace histk::parse {

struct TaggerParams {
  static constexpr double kDefaultInputDropout = 0.2;

  Eigen::MatrixXd W;  // T x d
  Eigen::VectorXd b;  // T
  double input_dropout = kDefaultInputDropout;

  int tags() const { return static_cast<int>(b.size()); }

  template <typename Self, typename F>
  static void visit_impl(Self& s, F&& f) {
    f("tagger.W", s.W);
    f("tagger.b", s.b);
  }
  template <typename F>
  void visit(F&& f) { visit_impl(*this, f); }
  template <typename F>
  void visit(F&& f) const { visit_impl(*this, f); }
};

inline TaggerParams init_tagger(int input_dim, int tags, Rng& rng) {
  if (tags <= 0) throw std::invalid_argument("tag inventory is empty");
  TaggerParams p;
  p.W = detail::gaussian(tags, input_dim, 1.0 / std::sqrt(static_cast<double>(input_dim)), rng);
  p.b = Eigen::VectorXd::Zero(tags);
  return p;
}

struct TaggerCache {
  Eigen::MatrixXd mask;
};

// T x n scores for the words (root column dropped).
inline Eigen::MatrixXd tag_scores(const Eigen::MatrixXd& emb, const TaggerParams& p, Noise noise = {},
                                  TaggerCache* cache = nullptr) {
  const Eigen::Index n = emb.cols() - 1;
  if (n < 1) throw std::invalid_argument("tag on an empty sentence");
  if (p.W.cols() != emb.rows() || p.W.rows() != p.b.size())
    throw std::invalid_argument("tagger expects input dimension " + std::to_string(p.W.cols()) + ", got " +
                                std::to_string(emb.rows()));
  TaggerCache local;
  TaggerCache& c = cache ? *cache : local;
  c.mask = dropout_mask(emb.rows(), n, p.input_dropout, noise);
  return (p.W * emb.rightCols(n).cwiseProduct(c.mask)).colwise() + p.b;
}

inline Eigen::MatrixXd tag_scores_backward(const Eigen::MatrixXd& emb, const TaggerParams& p, const TaggerCache& c,
                                           const Eigen::MatrixXd& grad, TaggerParams& g) {
  const Eigen::Index n = emb.cols() - 1;
  g.W.noalias() += grad * emb.rightCols(n).cwiseProduct(c.mask).transpose();
  g.b += grad.rowwise().sum();
  Eigen::MatrixXd d_emb = Eigen::MatrixXd::Zero(emb.rows(), emb.cols());
  d_emb.rightCols(n) = (p.W.transpose() * grad).cwiseProduct(c.mask);
  return d_emb;
}

// Tag indices, ties to the lowest index.
inline std::vector<int> tag(const Eigen::MatrixXd& emb, const TaggerParams& p) {
  return argmax_columns(tag_scores(emb, p));
}

}  // namespace histk::parse
