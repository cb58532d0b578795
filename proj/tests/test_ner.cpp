#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "histk/ner.hpp"
#include "oracles.hpp"

using namespace histk;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kData = HISTK_TEST_DATA_DIR;

}  // namespace

TEST(Ner, ReadsDocstartAndSentences) {
  auto c = parse_conll2003_string(read_file(kData + "/ner_gold.txt"));
  ASSERT_EQ(c.sentences.size(), 2u);
  ASSERT_EQ(c.docstarts.size(), 1u);
  EXPECT_EQ(c.docstarts[0].first, 0u);
  EXPECT_EQ(c.sentences[0][1].form, "İbrahim");
  EXPECT_EQ(c.sentences[0][1].tag, "B-PERSON");
  auto st = corpus_stats(c);
  EXPECT_EQ(st.count("PERSON"), 1u);
  EXPECT_EQ(st.count("LOCATION"), 2u);
  EXPECT_EQ(st.tokens, 11u);
}

TEST(Ner, RoundTripIsByteExact) {
  for (const char* f : {"/ner_gold.txt", "/ner_pred.txt"}) {
    const auto text = read_file(kData + f);
    auto c = parse_conll2003_string(text);
    EXPECT_EQ(serialize_conll2003(c), text);
  }
}

TEST(Ner, MultiColumnLayoutKeepsOtherColumns) {
  const std::string text = "Ahmed NNP B-NP B-PERSON\nPaşa NNP I-NP I-PERSON\n\n";
  auto c = parse_conll2003_string(text);
  ASSERT_EQ(c.sentences.size(), 1u);
  EXPECT_EQ(c.sentences[0][1].tag, "I-PERSON");
  EXPECT_EQ(c.sentences[0][1].other.size(), 2u);
  EXPECT_EQ(serialize_conll2003(c), text);
}

TEST(Ner, MalformedInputsThrow) {
  EXPECT_THROW(parse_conll2003_string("Ahmed B-PERSON\nPaşa\n\n"), FormatError);
  EXPECT_THROW(parse_conll2003_string("Ahmed X-PERSON\n\n"), FormatError);
  EXPECT_THROW(parse_conll2003_string("Ahmed B-ORG\n\n"), FormatError);
}

TEST(Ner, StrictModeReportsStrayInside) {
  auto c = parse_conll2003_string(read_file(kData + "/ner_pred.txt"));
  auto [same, v] = validate_bio(c, BioMode::kStrict);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].sentence, 1u);
  EXPECT_EQ(v[0].index, 0u);
  EXPECT_EQ(same, c);
  auto [fixed, v2] = validate_bio(c, BioMode::kRepair);
  EXPECT_EQ(fixed.sentences[1][0].tag, "B-LOCATION");
  EXPECT_TRUE(validate_bio(fixed, BioMode::kStrict).second.empty());
}

TEST(Ner, TypeChangeInsideSpanIsAViolation) {
  NerCorpus c;
  c.sentences = {{{"a", "B-PERSON", {}}, {"b", "I-LOCATION", {}}}};
  EXPECT_EQ(validate_bio(c, BioMode::kStrict).second.size(), 1u);
  EXPECT_THROW(spans_from_bio(tags_of(c.sentences[0])), std::invalid_argument);
}

TEST(Ner, SpansAndBioAreInverse) {
  std::mt19937_64 rng(5);
  const std::vector<std::string> types = {"PERSON", "LOCATION"};
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 12;
    std::vector<EntitySpan> spans;
    std::size_t i = 0;
    while (i < n) {
      if (rng() % 3 == 0) {
        const std::size_t len = 1 + rng() % 3;
        const std::size_t end = std::min(n - 1, i + len - 1);
        spans.push_back({types[rng() % 2], i, end});
        i = end + 1;
      } else {
        ++i;
      }
    }
    auto tags = bio_from_spans(n, spans);
    EXPECT_EQ(spans_from_bio(tags), spans);
    std::set<std::tuple<std::string, std::size_t, std::size_t>> expect;
    for (const auto& s : spans) expect.insert({s.entity_type, s.start, s.end});
    EXPECT_EQ(oracle::spans(tags), expect);
  }
}
