#pragma once

// Small synthetic treebank: [det] [adj] noun [det] [adj] noun verb "."
// The first noun is the subject, the second the object.

#include <random>
#include <string>
#include <vector>

#include "histk/conllu.hpp"

namespace toy {

inline histk::Treebank treebank(std::size_t sentences, std::uint64_t seed) {
  const std::vector<std::string> nouns = {"ev", "kitap", "adam", "kadın", "şehir", "mektup", "paşa", "bahçe"};
  const std::vector<std::string> adjs = {"büyük", "eski", "güzel", "yeni"};
  const std::vector<std::string> dets = {"bir", "bu"};
  const std::vector<std::string> verbs = {"gördü", "yazdı", "okudu", "buldu"};
  std::mt19937_64 rng(seed);
  histk::Treebank tb;
  for (std::size_t s = 0; s < sentences; ++s) {
    histk::Sentence sent;
    sent.comments.push_back("# sent_id = toy-" + std::to_string(s + 1));
    std::vector<histk::Token> toks;
    auto push = [&](const std::string& form, const std::string& upos, const std::string& rel) {
      histk::Token t;
      t.id = static_cast<int>(toks.size() + 1);
      t.form = form;
      t.lemma = form;
      t.upos = upos;
      t.deprel = rel;
      toks.push_back(t);
      return t.id;
    };
    std::vector<int> nps;
    for (const char* role : {"nsubj", "obj"}) {
      std::vector<int> mods;
      if (rng() % 2) mods.push_back(push(dets[rng() % dets.size()], "DET", "det"));
      if (rng() % 2) mods.push_back(push(adjs[rng() % adjs.size()], "ADJ", "amod"));
      const int noun = push(nouns[rng() % nouns.size()], "NOUN", role);
      for (int m : mods) toks[m - 1].head = noun;
      nps.push_back(noun);
    }
    const int verb = push(verbs[rng() % verbs.size()], "VERB", "root");
    toks[verb - 1].head = 0;
    for (int n : nps) toks[n - 1].head = verb;
    const int dot = push(".", "PUNCT", "punct");
    toks[dot - 1].head = verb;
    sent.tokens = toks;
    tb.sentences.push_back(sent);
  }
  return tb;
}

}  // namespace toy
