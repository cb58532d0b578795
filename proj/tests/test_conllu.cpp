#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "histk/conllu.hpp"
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

std::string line(std::initializer_list<std::string> cols) {
  std::string out;
  for (const auto& c : cols) out += (out.empty() ? "" : "\t") + c;
  return out + "\n";
}

Sentence chain(const std::vector<int>& heads) {
  Sentence s;
  for (std::size_t i = 0; i < heads.size(); ++i) {
    Token t;
    t.id = static_cast<int>(i + 1);
    t.form = "w" + std::to_string(i + 1);
    t.head = heads[i];
    t.deprel = heads[i] == 0 ? "root" : "dep";
    s.tokens.push_back(t);
  }
  return s;
}

}  // namespace

TEST(Conllu, ReadsDualScriptSentence) {
  auto tb = parse_conllu_string(read_file(kData + "/dual_script.conllu"));
  ASSERT_EQ(tb.sentences.size(), 2u);
  const auto& s = tb.sentences[0];
  ASSERT_EQ(s.size(), 7u);
  EXPECT_EQ(s.tokens[4].form, "mütevaggil");
  EXPECT_EQ(s.tokens[4].head, 7);
  EXPECT_EQ(s.tokens[4].deprel, "acl");
  EXPECT_EQ(s.tokens[5].deprel, "compound:lvc");
  EXPECT_EQ(s.tokens[0].feats.size(), 2u);
  EXPECT_EQ(s.tokens[0].feats[0], (Feature{"Case", "Nom"}));

  auto pairs = extract_script_pairs(s);
  ASSERT_EQ(pairs.size(), 7u);
  EXPECT_EQ(pairs[0].latin, "Felsefe");
  EXPECT_EQ(pairs[0].original, "فلسفه");
  EXPECT_EQ(pairs[6].original, "ادیبلر");
  EXPECT_EQ(detect_script_key(tb), std::optional<std::string>("OrigScript"));
}

TEST(Conllu, MultiwordRangeKeptOutOfWordCount) {
  auto tb = parse_conllu_string(read_file(kData + "/dual_script.conllu"));
  const auto& s = tb.sentences[1];
  EXPECT_EQ(s.size(), 4u);
  ASSERT_EQ(s.mwt.size(), 1u);
  EXPECT_EQ(s.mwt[0].start, 1);
  EXPECT_EQ(s.mwt[0].end, 2);
  EXPECT_EQ(s.mwt[0].form, "Evdekiler");
}

TEST(Conllu, RoundTripIsByteExact) {
  const auto text = read_file(kData + "/dual_script.conllu");
  auto tb = parse_conllu_string(text);
  EXPECT_EQ(serialize_conllu(tb), text);
  EXPECT_EQ(parse_conllu_string(serialize_conllu(tb)), tb);
}

TEST(Conllu, MissingHeadsOnlyWhenAllowed) {
  const std::string text = line({"1", "Geldi", "_", "_", "_", "_", "_", "_", "_", "_"}) + "\n";
  EXPECT_THROW(parse_conllu_string(text), FormatError);
  ParseOptions opts;
  opts.allow_missing_heads = true;
  auto tb = parse_conllu_string(text, {}, opts);
  EXPECT_EQ(tb.sentences[0].tokens[0].head, -1);
  EXPECT_TRUE(validate_tree(tb.sentences[0]).has(ViolationKind::kMissingHead));
  EXPECT_EQ(serialize_conllu(tb), text);
}

TEST(Conllu, FormatErrorsCarryLineAndSentence) {
  const std::string good = line({"1", "a", "a", "X", "_", "_", "0", "root", "_", "_"});
  struct Case {
    std::string text;
    std::size_t line;
  };
  const std::vector<Case> cases = {
      {good + "\n" + "1\ta\ta\tX\n\n", 3},
      {good + "\n" + line({"2", "a", "a", "X", "_", "_", "0", "root", "_", "_"}) + "\n", 3},
      {good + "\n" + line({"1", "a", "a", "X", "_", "_", "x", "root", "_", "_"}) + "\n", 3},
      {good + "\n" + line({"1", "a", "a", "X", "_", "Number=Sing|Case=Nom", "0", "root", "_", "_"}) + "\n", 3},
      {good + "\n" + line({"1.1", "a", "a", "X", "_", "_", "0", "root", "_", "_"}) + "\n", 3},
      {good + "\n" + line({"1", "a", "a", "X", "_", "_", "5", "root", "_", "_"}) + "\n", 3},
  };
  for (const auto& c : cases) {
    try {
      parse_conllu_string(c.text);
      ADD_FAILURE() << "accepted:\n" << c.text;
    } catch (const FormatError& e) {
      EXPECT_EQ(e.line(), c.line) << e.what();
      EXPECT_EQ(e.sentence(), 2u) << e.what();
    }
  }
}

TEST(Conllu, ValidatorReportsCycleAndRoots) {
  auto tb = parse_conllu_string(read_file(kData + "/invalid_trees.conllu"));
  auto a = validate_tree(tb.sentences[0]);
  ASSERT_TRUE(a.has(ViolationKind::kCycle));
  EXPECT_EQ(a.violations[0].ids, (std::vector<int>{1, 2}));
  auto b = validate_tree(tb.sentences[1]);
  EXPECT_TRUE(b.has(ViolationKind::kMultipleRoots));
  EXPECT_FALSE(b.has(ViolationKind::kCycle));
}

TEST(Conllu, ValidatorMatchesBruteForceOnRandomHeads) {
  std::mt19937_64 rng(11);
  int trees = 0;
  for (int trial = 0; trial < 4000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 20);
    std::vector<int> heads(n);
    // Mostly tree-shaped draws so both outcomes are common.
    const bool shaped = rng() % 2 == 0;
    for (int i = 0; i < n; ++i)
      heads[i] = shaped ? (i == 0 ? 0 : static_cast<int>(rng() % static_cast<unsigned>(i + 1)))
                        : static_cast<int>(rng() % static_cast<unsigned>(n + 1));
    if (shaped) std::shuffle(heads.begin(), heads.end(), rng);
    const bool expect = oracle::is_single_root_tree(heads);
    trees += expect;
    EXPECT_EQ(validate_tree(chain(heads)).ok(), expect);
  }
  EXPECT_GT(trees, 100);
}

TEST(Conllu, RootLabelMustSitOnRootChild) {
  auto s = chain({0, 1});
  s.tokens[1].deprel = "root";
  EXPECT_TRUE(validate_tree(s).has(ViolationKind::kMisplacedRoot));
  s.tokens[1].deprel = "dep";
  s.tokens[0].deprel = "nsubj";
  EXPECT_TRUE(validate_tree(s).has(ViolationKind::kRootDeprel));
}

TEST(Conllu, OverlappingRanges) {
  auto s = chain({0, 1, 1});
  s.mwt = {{1, 2, "ab", "_"}, {2, 3, "bc", "_"}};
  EXPECT_TRUE(validate_tree(s).has(ViolationKind::kOverlappingRanges));
}

TEST(Conllu, CrlfAndBomAreTolerated) {
  const std::string text = "\xEF\xBB\xBF# sent_id = 1\r\n1\ta\ta\tX\t_\t_\t0\troot\t_\t_\r\n\r\n";
  auto tb = parse_conllu_string(text);
  ASSERT_EQ(tb.sentences.size(), 1u);
  EXPECT_EQ(tb.sentences[0].comments[0], "# sent_id = 1");
}
