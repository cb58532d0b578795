#pragma once

// Biaffine arc and label scorers over encoder output E (d x (n+1), column 0 = root).
//
//   arc:   Hh = drop(tanh(Wh E + bh)), Hd = drop(tanh(Wd E + bd))      (768 wide)
//          S(h,d) = Hh[:,h]' U Hd[:,d] + b' Hh[:,h]
//   label: Lh, Ld as above (256 wide); for dependent d with head h
//          score_l = Lh[:,h]' U_l Ld[:,d] + Wh_l . Lh[:,h] + Wd_l . Ld[:,d] + b_l
//
// The label tensors U_l are stacked row-wise into one (L*k) x k matrix.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "histk/parse/encoder.hpp"
#include "histk/parse/mst.hpp"

namespace histk::parse {

struct Mlp {
  Eigen::MatrixXd W;  // k x d
  Eigen::VectorXd b;  // k
};

struct MlpCache {
  Eigen::MatrixXd out;   // after tanh and dropout
  Eigen::MatrixXd mask;  // dropout mask
  Eigen::MatrixXd act;   // tanh output before dropout
};

inline Eigen::MatrixXd mlp_forward(const Mlp& m, const Eigen::MatrixXd& x, double dropout, Noise noise, MlpCache& c) {
  if (m.W.cols() != x.rows())
    throw std::invalid_argument("MLP expects input dimension " + std::to_string(m.W.cols()) + ", got " +
                                std::to_string(x.rows()));
  c.act = ((m.W * x).colwise() + m.b).array().tanh().matrix();
  c.mask = dropout_mask(c.act.rows(), c.act.cols(), dropout, noise);
  c.out = c.act.cwiseProduct(c.mask);
  return c.out;
}

// Accumulates into gW, gb and returns dL/dx.
inline Eigen::MatrixXd mlp_backward(const Mlp& m, const Eigen::MatrixXd& x, const MlpCache& c,
                                    const Eigen::MatrixXd& grad_out, Mlp& g) {
  const Eigen::MatrixXd dz =
      grad_out.cwiseProduct(c.mask).cwiseProduct((1.0 - c.act.array().square()).matrix());
  g.W.noalias() += dz * x.transpose();
  g.b += dz.rowwise().sum();
  return m.W.transpose() * dz;
}

struct ArcScorerParams {
  static constexpr int kDefaultHidden = 768;
  static constexpr double kDefaultDropout = 0.33;

  Mlp head;
  Mlp dep;
  Eigen::MatrixXd U;  // k x k
  Eigen::VectorXd b;  // k, head bias
  double dropout = kDefaultDropout;

  int hidden() const { return static_cast<int>(U.rows()); }

  template <typename Self, typename F>
  static void visit_impl(Self& s, F&& f) {
    f("arc.head.W", s.head.W);
    f("arc.head.b", s.head.b);
    f("arc.dep.W", s.dep.W);
    f("arc.dep.b", s.dep.b);
    f("arc.U", s.U);
    f("arc.b", s.b);
  }
  template <typename F>
  void visit(F&& f) { visit_impl(*this, f); }
  template <typename F>
  void visit(F&& f) const { visit_impl(*this, f); }
};

struct LabelScorerParams {
  static constexpr int kDefaultHidden = 256;
  static constexpr double kDefaultDropout = 0.33;

  Mlp head;
  Mlp dep;
  Eigen::MatrixXd U;       // (L*k) x k
  Eigen::MatrixXd W_head;  // L x k
  Eigen::MatrixXd W_dep;   // L x k
  Eigen::VectorXd b;       // L
  double dropout = kDefaultDropout;

  int hidden() const { return static_cast<int>(U.cols()); }
  int labels() const { return static_cast<int>(b.size()); }

  template <typename Self, typename F>
  static void visit_impl(Self& s, F&& f) {
    f("label.head.W", s.head.W);
    f("label.head.b", s.head.b);
    f("label.dep.W", s.dep.W);
    f("label.dep.b", s.dep.b);
    f("label.U", s.U);
    f("label.W_head", s.W_head);
    f("label.W_dep", s.W_dep);
    f("label.b", s.b);
  }
  template <typename F>
  void visit(F&& f) { visit_impl(*this, f); }
  template <typename F>
  void visit(F&& f) const { visit_impl(*this, f); }
};

namespace detail {

inline Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, double scale, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = scale * g(rng);
  return m;
}

inline Mlp init_mlp(int in, int out, Rng& rng) {
  return Mlp{gaussian(out, in, 1.0 / std::sqrt(static_cast<double>(in)), rng), Eigen::VectorXd::Zero(out)};
}

}  // namespace detail

// Bilinear tensors start at zero so early scores come from the bias terms.
inline ArcScorerParams init_arc_scorer(int input_dim, int hidden, Rng& rng) {
  ArcScorerParams p;
  p.head = detail::init_mlp(input_dim, hidden, rng);
  p.dep = detail::init_mlp(input_dim, hidden, rng);
  p.U = Eigen::MatrixXd::Zero(hidden, hidden);
  p.b = Eigen::VectorXd::Zero(hidden);
  return p;
}

inline LabelScorerParams init_label_scorer(int input_dim, int hidden, int labels, Rng& rng) {
  if (labels <= 0) throw std::invalid_argument("label inventory is empty");
  LabelScorerParams p;
  p.head = detail::init_mlp(input_dim, hidden, rng);
  p.dep = detail::init_mlp(input_dim, hidden, rng);
  p.U = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels) * hidden, hidden);
  p.W_head = Eigen::MatrixXd::Zero(labels, hidden);
  p.W_dep = Eigen::MatrixXd::Zero(labels, hidden);
  p.b = Eigen::VectorXd::Zero(labels);
  return p;
}

struct ArcCache {
  MlpCache head, dep;
};

inline ScoreMatrix score_arcs(const Eigen::MatrixXd& emb, const ArcScorerParams& p, Noise noise = {},
                              ArcCache* cache = nullptr) {
  if (emb.cols() < 2) throw std::invalid_argument("score_arcs needs a root column and at least one word");
  if (p.U.rows() != p.U.cols() || p.U.rows() != p.head.W.rows() || p.U.rows() != p.dep.W.rows() ||
      p.b.size() != p.U.rows())
    throw std::invalid_argument("arc scorer parameter shapes are inconsistent");
  ArcCache local;
  ArcCache& c = cache ? *cache : local;
  const auto& hh = mlp_forward(p.head, emb, p.dropout, noise, c.head);
  const auto& hd = mlp_forward(p.dep, emb, p.dropout, noise, c.dep);
  ScoreMatrix m;
  m.arc = hh.transpose() * (p.U * hd);
  m.arc.colwise() += hh.transpose() * p.b;
  m.apply_mask();
  return m;
}

// grad is dL/dS with masked entries zero; returns dL/demb.
inline Eigen::MatrixXd score_arcs_backward(const Eigen::MatrixXd& emb, const ArcScorerParams& p, const ArcCache& c,
                                           const Eigen::MatrixXd& grad, ArcScorerParams& g) {
  const auto& hh = c.head.out;
  const auto& hd = c.dep.out;
  const Eigen::VectorXd row_sum = grad.rowwise().sum();
  g.U.noalias() += hh * grad * hd.transpose();
  g.b.noalias() += hh * row_sum;
  Eigen::MatrixXd d_hh = p.U * hd * grad.transpose();
  d_hh.noalias() += p.b * row_sum.transpose();
  const Eigen::MatrixXd d_hd = p.U.transpose() * hh * grad;
  Eigen::MatrixXd d_emb = mlp_backward(p.head, emb, c.head, d_hh, g.head);
  d_emb += mlp_backward(p.dep, emb, c.dep, d_hd, g.dep);
  return d_emb;
}

struct LabelCache {
  MlpCache head, dep;
  Eigen::MatrixXd T;  // (L*k) x n, column d-1 = U * Ld[:,d]
};

// Returns an L x n score matrix; column d-1 scores the labels of word d under heads[d-1].
inline Eigen::MatrixXd score_labels(const Eigen::MatrixXd& emb, const Heads& heads, const LabelScorerParams& p,
                                    Noise noise = {}, LabelCache* cache = nullptr) {
  const Eigen::Index n = emb.cols() - 1;
  if (n < 1 || static_cast<Eigen::Index>(heads.size()) != n)
    throw std::invalid_argument("score_labels: " + std::to_string(heads.size()) + " heads for " +
                                std::to_string(n) + " words");
  const Eigen::Index k = p.U.cols();
  const Eigen::Index L = p.b.size();
  if (p.U.rows() != L * k || p.head.W.rows() != k || p.dep.W.rows() != k || p.W_head.rows() != L ||
      p.W_head.cols() != k || p.W_dep.rows() != L || p.W_dep.cols() != k)
    throw std::invalid_argument("label scorer parameter shapes are inconsistent");
  for (int h : heads)
    if (h < 0 || h > n) throw std::invalid_argument("score_labels: head out of range");
  LabelCache local;
  LabelCache& c = cache ? *cache : local;
  const auto& lh = mlp_forward(p.head, emb, p.dropout, noise, c.head);
  const auto& ld = mlp_forward(p.dep, emb, p.dropout, noise, c.dep);
  c.T = p.U * ld.rightCols(n);
  Eigen::MatrixXd out(L, n);
  for (Eigen::Index d = 0; d < n; ++d) {
    const auto a = lh.col(heads[d]);
    const Eigen::Map<const Eigen::MatrixXd> Td(c.T.col(d).data(), k, L);
    out.col(d) = Td.transpose() * a + p.W_head * a + p.W_dep * ld.col(d + 1) + p.b;
  }
  return out;
}

// grad is L x n (dL/dscores); returns dL/demb.
inline Eigen::MatrixXd score_labels_backward(const Eigen::MatrixXd& emb, const Heads& heads,
                                             const LabelScorerParams& p, const LabelCache& c,
                                             const Eigen::MatrixXd& grad, LabelScorerParams& g) {
  const Eigen::Index n = emb.cols() - 1;
  const Eigen::Index k = p.U.cols();
  const Eigen::Index L = p.b.size();
  const auto& lh = c.head.out;
  const auto& ld = c.dep.out;
  Eigen::MatrixXd d_lh = Eigen::MatrixXd::Zero(k, n + 1);
  Eigen::MatrixXd d_ld = Eigen::MatrixXd::Zero(k, n + 1);
  Eigen::MatrixXd V(L * k, n);  // block l of column d = g_l * a
  for (Eigen::Index d = 0; d < n; ++d) {
    const auto a = lh.col(heads[d]);
    const auto gd = grad.col(d);
    const Eigen::Map<const Eigen::MatrixXd> Td(c.T.col(d).data(), k, L);
    d_lh.col(heads[d]) += Td * gd + p.W_head.transpose() * gd;
    d_ld.col(d + 1) += p.W_dep.transpose() * gd;
    Eigen::Map<Eigen::MatrixXd>(V.col(d).data(), k, L) = a * gd.transpose();
  }
  g.U.noalias() += V * ld.rightCols(n).transpose();
  d_ld.rightCols(n).noalias() += p.U.transpose() * V;
  for (Eigen::Index d = 0; d < n; ++d) g.W_head.noalias() += grad.col(d) * lh.col(heads[d]).transpose();
  g.W_dep.noalias() += grad * ld.rightCols(n).transpose();
  g.b += grad.rowwise().sum();
  Eigen::MatrixXd d_emb = mlp_backward(p.head, emb, c.head, d_lh, g.head);
  d_emb += mlp_backward(p.dep, emb, c.dep, d_ld, g.dep);
  return d_emb;
}

// Lowest index wins ties.
inline int argmax(const Eigen::Ref<const Eigen::VectorXd>& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = static_cast<int>(i);
  return best;
}

inline std::vector<int> argmax_columns(const Eigen::MatrixXd& scores) {
  std::vector<int> out(scores.cols());
  for (Eigen::Index j = 0; j < scores.cols(); ++j) out[j] = argmax(scores.col(j));
  return out;
}

// Softmax over one column restricted to finite entries.
inline Eigen::VectorXd masked_softmax(const Eigen::Ref<const Eigen::VectorXd>& v) {
  double mx = kMasked;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v(i) > mx) mx = v(i);
  Eigen::VectorXd p(v.size());
  double z = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    p(i) = v(i) == kMasked ? 0.0 : std::exp(v(i) - mx);
    z += p(i);
  }
  return p / z;
}

// Column d of the result is the head distribution of word d (column 0 unused, zero).
inline Eigen::MatrixXd head_probabilities(const ScoreMatrix& m) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(m.arc.rows(), m.arc.cols());
  for (Eigen::Index d = 1; d < m.arc.cols(); ++d) p.col(d) = masked_softmax(m.arc.col(d));
  return p;
}

}  // namespace histk::parse
