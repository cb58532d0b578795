#pragma once

// Random small treebanks and NER corpora for checking metrics against the oracles.

#include <random>
#include <string>
#include <vector>

#include "histk/conllu.hpp"
#include "histk/ner.hpp"
#include "oracles.hpp"

namespace fixtures {

using namespace histk;

inline const std::vector<std::string> kRels = {"nsubj", "obj", "punct", "root"};
inline const std::vector<std::string> kUpos = {"NOUN", "VERB", "PUNCT"};
inline const std::vector<std::string> kTags = {"O", "B-PERSON", "I-PERSON", "B-LOCATION", "I-LOCATION"};

inline Treebank random_parses(std::mt19937_64& rng, const Treebank* like) {
  Treebank tb;
  const std::size_t ns = like ? like->sentences.size() : 1 + rng() % 5;
  for (std::size_t s = 0; s < ns; ++s) {
    Sentence sent;
    const std::size_t n = like ? like->sentences[s].size() : 1 + rng() % 8;
    for (std::size_t i = 0; i < n; ++i) {
      Token t;
      t.id = static_cast<int>(i + 1);
      t.form = like ? like->sentences[s].tokens[i].form : "f" + std::to_string(rng() % 4);
      t.upos = kUpos[rng() % kUpos.size()];
      t.head = static_cast<int>(rng() % (n + 1));
      t.deprel = kRels[rng() % kRels.size()];
      sent.tokens.push_back(t);
    }
    tb.sentences.push_back(sent);
  }
  return tb;
}

inline std::vector<std::vector<oracle::Word>> words(const Treebank& tb) {
  std::vector<std::vector<oracle::Word>> out;
  for (const auto& s : tb.sentences) {
    out.emplace_back();
    for (const auto& t : s.tokens) out.back().emplace_back(t.head, t.deprel, t.upos);
  }
  return out;
}

inline NerCorpus random_ner(std::mt19937_64& rng, const NerCorpus* like) {
  NerCorpus c;
  const std::size_t ns = like ? like->sentences.size() : 1 + rng() % 5;
  for (std::size_t s = 0; s < ns; ++s) {
    NerSentence sent;
    const std::size_t n = like ? like->sentences[s].size() : 1 + rng() % 10;
    for (std::size_t i = 0; i < n; ++i)
      sent.push_back({like ? like->sentences[s][i].form : "t", kTags[rng() % kTags.size()], {}});
    c.sentences.push_back(sent);
  }
  return c;
}

inline std::vector<std::vector<std::string>> tag_lists(const NerCorpus& c) {
  std::vector<std::vector<std::string>> out;
  for (const auto& s : c.sentences) out.push_back(tags_of(s));
  return out;
}

}  // namespace fixtures
