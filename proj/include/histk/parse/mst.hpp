#pragma once

// Maximum spanning arborescence decoding over dense arc scores.
//
// Scores are an (n+1)x(n+1) matrix; entry (h, d) scores head h for dependent d,
// row/column 0 is the artificial root. Column 0 and the diagonal are masked
// with -inf. Chu-Liu/Edmonds finds the best arborescence; the single-root
// constraint is enforced by decoding once per candidate root child with all
// other root arcs masked and keeping the best tree.

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

namespace histk::parse {

inline constexpr double kMasked = -std::numeric_limits<double>::infinity();

struct ScoreMatrix {
  Eigen::MatrixXd arc;  // (n+1) x (n+1)

  int words() const { return static_cast<int>(arc.rows()) - 1; }

  void apply_mask() {
    arc.col(0).setConstant(kMasked);
    arc.diagonal().setConstant(kMasked);
  }
};

// heads[i] is the head of word i+1 (0 = root).
using Heads = std::vector<int>;

inline double tree_score(const Eigen::MatrixXd& s, const Heads& heads) {
  double total = 0.0;
  for (std::size_t i = 0; i < heads.size(); ++i) total += s(heads[i], static_cast<Eigen::Index>(i + 1));
  return total;
}

namespace detail {

// Chu-Liu/Edmonds on a dense score matrix over nodes 0..N-1 rooted at 0.
// Returns parent[v] for every node (parent[0] = -1). Ties go to the lowest index.
inline std::vector<int> chu_liu_edmonds(const Eigen::MatrixXd& s) {
  const int N = static_cast<int>(s.rows());
  std::vector<int> parent(N, -1);
  for (int v = 1; v < N; ++v) {
    int best = -1;
    for (int u = 0; u < N; ++u) {
      if (u == v) continue;
      if (best < 0 || s(u, v) > s(best, v)) best = u;
    }
    parent[v] = best;
  }

  // Look for a cycle among the greedy choices.
  std::vector<int> color(N, 0);
  std::vector<int> cycle;
  color[0] = 2;
  for (int start = 1; start < N && cycle.empty(); ++start) {
    std::vector<int> path;
    int v = start;
    while (color[v] == 0) {
      color[v] = 1;
      path.push_back(v);
      v = parent[v];
    }
    if (color[v] == 1) {
      auto it = std::find(path.begin(), path.end(), v);
      cycle.assign(it, path.end());
    }
    for (int p : path) color[p] = 2;
  }
  if (cycle.empty()) return parent;

  // Contract the cycle into a single node.
  std::vector<char> in_cycle(N, 0);
  for (int v : cycle) in_cycle[v] = 1;
  std::vector<int> old_of_new;  // non-cycle nodes keep their relative order
  std::vector<int> new_of_old(N, -1);
  for (int v = 0; v < N; ++v)
    if (!in_cycle[v]) {
      new_of_old[v] = static_cast<int>(old_of_new.size());
      old_of_new.push_back(v);
    }
  const int c = static_cast<int>(old_of_new.size());
  const int M = c + 1;
  Eigen::MatrixXd t = Eigen::MatrixXd::Constant(M, M, kMasked);
  std::vector<int> enter_at(M, -1);  // for u -> c: which cycle node is entered
  std::vector<int> leave_from(M, -1);  // for c -> w: which cycle node is the head

  for (int a = 0; a < c; ++a)
    for (int b = 0; b < c; ++b)
      if (a != b) t(a, b) = s(old_of_new[a], old_of_new[b]);

  for (int a = 0; a < c; ++a) {
    const int u = old_of_new[a];
    double best = kMasked;
    int best_v = -1;
    for (int v : cycle) {
      if (s(u, v) == kMasked) continue;
      const double val = s(u, v) - s(parent[v], v);
      if (best_v < 0 || val > best || (val == best && v < best_v)) best = val, best_v = v;
    }
    if (best_v >= 0) {
      t(a, c) = best;
      enter_at[a] = best_v;
    }
    const int w = u;
    if (w == 0) continue;
    double best_out = kMasked;
    int best_h = -1;
    for (int v : cycle) {
      if (s(v, w) == kMasked) continue;
      if (best_h < 0 || s(v, w) > best_out || (s(v, w) == best_out && v < best_h)) best_out = s(v, w), best_h = v;
    }
    if (best_h >= 0) {
      t(c, a) = best_out;
      leave_from[a] = best_h;
    }
  }

  const auto sub = chu_liu_edmonds(t);
  std::vector<int> result(N, -1);
  for (int v : cycle) result[v] = parent[v];
  for (int b = 1; b < M; ++b) {
    const int h = sub[b];
    if (b == c) {
      const int entered = enter_at[h];
      result[entered] = old_of_new[h];
    } else {
      const int w = old_of_new[b];
      result[w] = h == c ? leave_from[b] : old_of_new[h];
    }
  }
  return result;
}

}  // namespace detail

// Best arborescence with exactly one child of the root.
inline Heads decode_mst(const ScoreMatrix& m) {
  const int n = m.words();
  if (n < 1) throw std::invalid_argument("decode_mst on an empty sentence");
  Heads best;
  double best_score = kMasked;
  for (int r = 1; r <= n; ++r) {
    if (m.arc(0, r) == kMasked) continue;
    Eigen::MatrixXd s = m.arc;
    for (int d = 1; d <= n; ++d)
      if (d != r) s(0, d) = kMasked;
    const auto parent = detail::chu_liu_edmonds(s);
    Heads heads(parent.begin() + 1, parent.end());
    bool valid = true;
    for (int i = 0; i < n; ++i) valid = valid && heads[i] >= 0 && s(heads[i], i + 1) != kMasked;
    if (!valid) continue;
    const double score = tree_score(m.arc, heads);
    if (best.empty() || score > best_score) best = std::move(heads), best_score = score;
  }
  if (best.empty()) throw std::invalid_argument("no single-root tree has finite score");
  return best;
}

// Independent argmax per dependent; may produce cycles or several roots.
inline Heads decode_greedy(const ScoreMatrix& m) {
  const int n = m.words();
  Heads heads(n, 0);
  for (int d = 1; d <= n; ++d) {
    int best = 0;
    for (int h = 1; h <= n; ++h)
      if (m.arc(h, d) > m.arc(best, d)) best = h;
    heads[d - 1] = best;
  }
  return heads;
}

}  // namespace histk::parse
