#pragma once

// Token encoders. Both modes produce an (d x (n+1)) matrix whose column 0 is a
// learned root vector and column i the vector of word i.
//
// trainable-lookup: e_i = word[w_i] + drop_h(left[w_{i-1}] + right[w_{i+1}])
//                         + drop_a(position[i]),   then output dropout.
// external-vectors: e_i is read from a vector file (frozen); only the root
//                   vector is trained.
//
// Token masking replaces a word id by <unk> everywhere it is looked up.

#include <Eigen/Dense>

#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace histk::parse {

using Rng = std::mt19937_64;

class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;

  Vocabulary() : words_{"<unk>", "<bos>", "<eos>"} {
    for (int i = 0; i < 3; ++i) index_[words_[i]] = i;
  }

  int add(const std::string& w) {
    auto [it, inserted] = index_.emplace(w, static_cast<int>(words_.size()));
    if (inserted) words_.push_back(w);
    return it->second;
  }

  int id(const std::string& w) const {
    auto it = index_.find(w);
    return it == index_.end() ? kUnk : it->second;
  }

  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

enum class EncoderMode { kTrainableLookup, kExternalVectors };

struct EncoderConfig {
  EncoderMode mode = EncoderMode::kTrainableLookup;
  int embedding_dim = 64;
  int max_positions = 128;
  double dropout_hidden = 0.2;
  double dropout_attention = 0.2;
  double dropout_output = 0.5;
  double token_mask_prob = 0.15;

  void validate() const {
    if (embedding_dim <= 0) throw std::invalid_argument("embedding_dim must be positive");
    if (max_positions <= 0) throw std::invalid_argument("max_positions must be positive");
    for (double p : {dropout_hidden, dropout_attention, dropout_output, token_mask_prob})
      if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout/mask probabilities must lie in [0,1)");
  }
};

struct EncoderParams {
  Eigen::MatrixXd word;      // d x V
  Eigen::MatrixXd left;      // d x V
  Eigen::MatrixXd right;     // d x V
  Eigen::MatrixXd position;  // d x P
  Eigen::MatrixXd root;      // d x 1

  template <typename F>
  void visit(F&& f) {
    f("encoder.word", word);
    f("encoder.left", left);
    f("encoder.right", right);
    f("encoder.position", position);
    f("encoder.root", root);
  }
  template <typename F>
  void visit(F&& f) const {
    f("encoder.word", word);
    f("encoder.left", left);
    f("encoder.right", right);
    f("encoder.position", position);
    f("encoder.root", root);
  }
};

// One sentence as the encoder sees it.
struct EncoderInput {
  std::vector<int> ids;                // vocabulary ids, one per word
  const Eigen::MatrixXd* external = nullptr;  // D x n in external mode

  int size() const { return static_cast<int>(ids.size()); }
};

// Dropout masks and the like are drawn only when rng is set.
struct Noise {
  Rng* rng = nullptr;
  bool training() const { return rng != nullptr; }
};

inline Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Noise noise) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Ones(rows, cols);
  if (!noise.training() || p <= 0.0) return m;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(*noise.rng) < p ? 0.0 : keep;
  return m;
}

struct EncoderCache {
  std::vector<int> ids;  // after token masking
  Eigen::MatrixXd context_mask;
  Eigen::MatrixXd position_mask;
  Eigen::MatrixXd output_mask;
};

inline EncoderParams init_encoder(const EncoderConfig& cfg, int vocab_size, int external_dim, Rng& rng) {
  cfg.validate();
  EncoderParams p;
  std::normal_distribution<double> g(0.0, 1.0);
  auto gauss = [&](Eigen::Index r, Eigen::Index c, double scale) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = scale * g(rng);
    return m;
  };
  if (cfg.mode == EncoderMode::kTrainableLookup) {
    const int d = cfg.embedding_dim;
    p.word = gauss(d, vocab_size, 1.0);
    p.left = gauss(d, vocab_size, 0.5);
    p.right = gauss(d, vocab_size, 0.5);
    p.position = gauss(d, cfg.max_positions, 0.5);
    p.root = gauss(d, 1, 1.0);
  } else {
    if (external_dim <= 0) throw std::invalid_argument("external vectors need a positive dimension");
    p.word.resize(0, 0);
    p.left.resize(0, 0);
    p.right.resize(0, 0);
    p.position.resize(0, 0);
    p.root = gauss(external_dim, 1, 1.0);
  }
  return p;
}

inline int encoder_dim(const EncoderParams& p) { return static_cast<int>(p.root.rows()); }

inline Eigen::MatrixXd encode(const EncoderInput& in, const EncoderConfig& cfg, const EncoderParams& p, Noise noise,
                              EncoderCache* cache = nullptr) {
  const int n = in.size();
  if (n == 0) throw std::invalid_argument("encode on an empty sentence");
  const Eigen::Index d = p.root.rows();
  Eigen::MatrixXd e(d, n + 1);
  e.col(0) = p.root;

  EncoderCache local;
  EncoderCache& c = cache ? *cache : local;
  c.ids = in.ids;

  if (cfg.mode == EncoderMode::kExternalVectors) {
    if (in.external == nullptr || in.external->cols() != n)
      throw std::invalid_argument("external vectors cover " +
                                  std::to_string(in.external ? in.external->cols() : 0) + " of " +
                                  std::to_string(n) + " words");
    if (in.external->rows() != d)
      throw std::invalid_argument("external vector dimension " + std::to_string(in.external->rows()) +
                                  " does not match model dimension " + std::to_string(d));
    e.rightCols(n) = *in.external;
  } else {
    const auto V = p.word.cols();
    if (noise.training() && cfg.token_mask_prob > 0.0) {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (auto& id : c.ids)
        if (u(*noise.rng) < cfg.token_mask_prob) id = Vocabulary::kUnk;
    }
    for (int id : c.ids)
      if (id < 0 || id >= V) throw std::invalid_argument("word id outside the vocabulary");
    c.context_mask = dropout_mask(d, n, cfg.dropout_hidden, noise);
    c.position_mask = dropout_mask(d, n, cfg.dropout_attention, noise);
    const Eigen::Index P = p.position.cols();
    for (int i = 1; i <= n; ++i) {
      const int prev = i == 1 ? Vocabulary::kBos : c.ids[i - 2];
      const int next = i == n ? Vocabulary::kEos : c.ids[i];
      const Eigen::Index pos = std::min<Eigen::Index>(i - 1, P - 1);
      e.col(i) = p.word.col(c.ids[i - 1]) +
                 c.context_mask.col(i - 1).cwiseProduct(p.left.col(prev) + p.right.col(next)) +
                 c.position_mask.col(i - 1).cwiseProduct(p.position.col(pos));
    }
  }
  c.output_mask = dropout_mask(d, n + 1, cfg.dropout_output, noise);
  return e.cwiseProduct(c.output_mask);
}

// Accumulates parameter gradients given dL/d(encoder output).
inline void encode_backward(const Eigen::MatrixXd& grad_out, const EncoderConfig& cfg, const EncoderCache& c,
                            EncoderParams& grad) {
  const Eigen::MatrixXd g = grad_out.cwiseProduct(c.output_mask);
  grad.root += g.col(0);
  if (cfg.mode == EncoderMode::kExternalVectors) return;
  const int n = static_cast<int>(c.ids.size());
  const Eigen::Index P = grad.position.cols();
  for (int i = 1; i <= n; ++i) {
    const int prev = i == 1 ? Vocabulary::kBos : c.ids[i - 2];
    const int next = i == n ? Vocabulary::kEos : c.ids[i];
    const Eigen::Index pos = std::min<Eigen::Index>(i - 1, P - 1);
    grad.word.col(c.ids[i - 1]) += g.col(i);
    const Eigen::VectorXd gc = g.col(i).cwiseProduct(c.context_mask.col(i - 1));
    grad.left.col(prev) += gc;
    grad.right.col(next) += gc;
    grad.position.col(pos) += g.col(i).cwiseProduct(c.position_mask.col(i - 1));
  }
}

}  // namespace histk::parse
