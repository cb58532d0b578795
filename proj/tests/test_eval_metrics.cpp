#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "histk/eval_metrics.hpp"
#include "oracles.hpp"

using namespace histk;
using namespace fixtures;

TEST(Attachment, AgreesWithOracleOnRandomFixtures) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 600; ++trial) {
    auto gold = random_parses(rng, nullptr);
    auto pred = random_parses(rng, &gold);
    for (bool punct : {true, false}) {
      auto got = attachment_scores(gold, pred, {punct});
      auto want = oracle::attachment(words(gold), words(pred), punct);
      EXPECT_EQ(got.total, want.total);
      EXPECT_EQ(got.correct_heads, want.heads);
      EXPECT_EQ(got.correct_labeled, want.labeled);
    }
  }
}

TEST(Attachment, IdentityScoresHundred) {
  std::mt19937_64 rng(2);
  auto gold = random_parses(rng, nullptr);
  auto s = attachment_scores(gold, gold);
  EXPECT_EQ(s.uas, 100.0);
  EXPECT_EQ(s.las, 100.0);
}

TEST(Attachment, PunctuationExcludedByGoldTag) {
  Treebank g, p;
  Sentence s;
  s.tokens = {Token{1, "a", "_", "VERB", "_", {}, 0, "root"}, Token{2, ".", "_", "PUNCT", "_", {}, 1, "punct"}};
  g.sentences = {s};
  s.tokens[1].head = 0;
  p.sentences = {s};
  EXPECT_EQ(attachment_scores(g, p).uas, 50.0);
  auto no = attachment_scores(g, p, {false});
  EXPECT_EQ(no.uas, 100.0);
  EXPECT_EQ(no.excluded, 1u);
}

TEST(Attachment, SegmentationMismatchNamesPosition) {
  std::mt19937_64 rng(4);
  auto gold = random_parses(rng, nullptr);
  auto pred = gold;
  pred.sentences.back().tokens.back().form = "different";
  try {
    attachment_scores(gold, pred);
    FAIL();
  } catch (const SegmentationMismatch& e) {
    EXPECT_EQ(e.sentence(), gold.sentences.size() - 1);
    EXPECT_EQ(e.token(), gold.sentences.back().size() - 1);
  }
}

TEST(SpanScores, AgreeWithOracleOnRandomFixtures) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 600; ++trial) {
    auto gold = random_ner(rng, nullptr);
    auto pred = random_ner(rng, &gold);
    auto got = ner_prf(gold, pred).micro;
    auto want = oracle::span_counts(tag_lists(gold), tag_lists(pred));
    EXPECT_EQ(got.tp, want.tp);
    EXPECT_EQ(got.fp, want.fp);
    EXPECT_EQ(got.fn, want.fn);
    if (want.tp + want.fp + want.fn > 0)
      EXPECT_DOUBLE_EQ(got.f1, 200.0 * want.tp / (2.0 * want.tp + want.fp + want.fn));
  }
}

TEST(SpanScores, IdentityAndEmpty) {
  std::mt19937_64 rng(6);
  auto gold = random_ner(rng, nullptr);
  gold.sentences[0][0].tag = "B-PERSON";
  EXPECT_EQ(ner_prf(gold, gold).micro.f1, 100.0);
  NerCorpus none;
  none.sentences = {{{"a", "O", {}}}};
  auto r = ner_prf(none, none).micro;
  EXPECT_EQ(r.f1, 0.0);
  EXPECT_EQ(r.precision, 0.0);
}

TEST(SpanScores, BoundaryErrorCountsTwice) {
  NerCorpus g, p;
  g.sentences = {{{"Damat", "O", {}}, {"İbrahim", "B-PERSON", {}}, {"Paşa", "I-PERSON", {}}}};
  p.sentences = {{{"Damat", "B-PERSON", {}}, {"İbrahim", "I-PERSON", {}}, {"Paşa", "I-PERSON", {}}}};
  auto r = ner_prf(g, p).micro;
  EXPECT_EQ(r.tp, 0u);
  EXPECT_EQ(r.fp, 1u);
  EXPECT_EQ(r.fn, 1u);
}

TEST(Tagging, MacroF1AveragesPerTag) {
  auto s = tagging_scores({{"NOUN", "NOUN", "VERB"}}, {{"NOUN", "VERB", "VERB"}});
  EXPECT_NEAR(s.accuracy, 200.0 / 3, 1e-12);
  // NOUN: tp1 fn1 -> 66.67; VERB: tp1 fp1 -> 66.67
  EXPECT_NEAR(s.macro_f1, 200.0 / 3, 1e-12);
  EXPECT_EQ((s.confusion[{"NOUN", "VERB"}]), 1u);
}

TEST(Kappa, AgreesWithOracleOnRandomFixtures) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 600; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    const std::size_t k = 1 + rng() % 4;
    std::vector<std::string> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = kRels[rng() % k];
      b[i] = rng() % 3 ? a[i] : kRels[rng() % k];
    }
    auto got = cohen_kappa(a, b);
    auto want = oracle::kappa(a, b);
    EXPECT_EQ(got.agreements, want.agree);
    EXPECT_EQ(got.chance_products, want.chance);
    EXPECT_NEAR(got.kappa, static_cast<double>(want.kappa), 1e-12);
  }
}

TEST(Kappa, IdentityIsOneAndIndependenceNearZero) {
  std::vector<std::string> a = {"x", "y", "x", "z"};
  EXPECT_EQ(cohen_kappa(a, a).kappa, 1.0);
  std::vector<std::string> same(5, "x");
  EXPECT_EQ(cohen_kappa(same, same).kappa, 1.0);

  std::mt19937_64 rng(17);
  std::vector<std::string> x(10000), y(10000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = kRels[rng() % kRels.size()];
    y[i] = kRels[rng() % kRels.size()];
  }
  EXPECT_LT(std::fabs(cohen_kappa(x, y).kappa), 0.1);
}

TEST(Kappa, RejectsBadInput) {
  EXPECT_THROW(cohen_kappa({"a"}, {"a", "b"}), std::invalid_argument);
  EXPECT_THROW(cohen_kappa({}, {}), std::invalid_argument);
}
