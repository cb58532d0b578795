#pragma once

// Finite-difference check of the parser and tagger losses. Dropout and token
// masks are frozen by reseeding the generator before every evaluation.

#include <random>
#include <vector>

#include "histk/parse/model.hpp"
#include "histk/parse/train.hpp"
#include "oracles.hpp"

namespace gradcheck {

// Draws up to `per_block` coordinates with a nonzero analytic gradient from
// every tensor, plus one arbitrary coordinate.
template <typename Model, typename Loss>
double relative_error(Model& m, Loss&& loss, std::uint64_t noise_seed, std::mt19937_64& pick,
                      int per_block = 6) {
  Model grad = histk::parse::zeros_like(m);
  {
    histk::parse::Rng r(noise_seed);
    loss(m, histk::parse::Noise{&r}, &grad);
  }
  auto f = [&] {
    histk::parse::Rng r(noise_seed);
    return loss(m, histk::parse::Noise{&r}, nullptr);
  };
  auto params = histk::parse::flat_views(m);
  auto grads = histk::parse::flat_views(grad);
  double worst = 0.0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size == 0) continue;
    std::vector<Eigen::Index> nonzero, coords;
    for (Eigen::Index i = 0; i < grads[b].size; ++i)
      if (grads[b].data[i] != 0.0) nonzero.push_back(i);
    std::shuffle(nonzero.begin(), nonzero.end(), pick);
    for (int k = 0; k < per_block && k < static_cast<int>(nonzero.size()); ++k) coords.push_back(nonzero[k]);
    coords.push_back(static_cast<Eigen::Index>(pick() % static_cast<std::uint64_t>(params[b].size)));
    worst = std::max(worst, oracle::relative_gradient_error(f, params[b].data, grads[b].data, coords));
  }
  return worst;
}

// Small parser with every tensor randomized, including the zero-initialized ones.
inline histk::parse::ParserModel random_parser(const histk::Treebank& tb, std::uint64_t seed) {
  histk::parse::ParserConfig cfg;
  cfg.encoder.embedding_dim = 6;
  cfg.encoder.max_positions = 8;
  cfg.arc_hidden = 5;
  cfg.label_hidden = 4;
  histk::parse::Rng rng(seed);
  auto m = histk::parse::init_parser(tb, cfg, nullptr, rng);
  std::normal_distribution<double> g(0.0, 0.5);
  m.visit([&](auto&&, auto& mat) {
    for (Eigen::Index i = 0; i < mat.size(); ++i) mat.data()[i] = g(rng);
  });
  return m;
}

// Summed loss over a batch of examples, the quantity the trainer differentiates.
inline double parser_batch_error(histk::parse::ParserModel& m,
                                 const std::vector<histk::parse::ParseExample>& batch, std::uint64_t seed,
                                 std::mt19937_64& pick) {
  return relative_error(
      m,
      [&](const histk::parse::ParserModel& p, histk::parse::Noise noise, histk::parse::ParserModel* g) {
        double total = 0.0;
        for (const auto& ex : batch) total += histk::parse::parser_loss(p, ex, noise, g);
        return total;
      },
      seed, pick);
}

}  // namespace gradcheck
