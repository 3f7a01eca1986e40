#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dcmn/data.hpp"
#include "support.hpp"

using namespace dcmn;
namespace fs = std::filesystem;

TEST(Tokenize, LowercasesAndSplitsPunctuation) {
  EXPECT_EQ(tokenize("A b."), (Tokens{"a", "b", "."}));
  EXPECT_EQ(tokenize("  Don't  STOP!\tnow "), (Tokens{"don", "'", "t", "stop", "!", "now"}));
  EXPECT_TRUE(tokenize("   ").empty());
}

TEST(Jsonl, ParsesSpecExample) {
  auto ex = parse_example(
      R"({"id":"x","passage_sentences":["A b."],"question":"q?","options":["a","b"],"label":1})", {});
  EXPECT_EQ(ex.num_sentences(), 1u);
  EXPECT_EQ(ex.num_options(), 2u);
  EXPECT_EQ(ex.label, 1u);
  EXPECT_EQ(ex.passage_sentences[0], (Tokens{"a", "b", "."}));
}

TEST(Jsonl, RejectsLabelOutOfRange) {
  EXPECT_THROW(parse_example(R"({"id":"x","passage_sentences":["a"],"question":"q",)"
                             R"("options":["a","b","c","d"],"label":5})", {}),
               DataError);
}

TEST(Jsonl, MalformedLineReportsLineNumber) {
  std::istringstream in(
      R"({"id":"x","passage_sentences":["a"],"question":"q","options":["a","b"],"label":0})"
      "\n{not json}\n");
  try {
    read_jsonl(in, {}, "file.jsonl");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("file.jsonl:2"), std::string::npos) << e.what();
  }
}

TEST(Jsonl, RejectsOptionCountChange) {
  std::istringstream in(
      R"({"id":"x","passage_sentences":["a"],"question":"q","options":["a","b"],"label":0})"
      "\n"
      R"({"id":"y","passage_sentences":["a"],"question":"q","options":["a","b","c"],"label":0})"
      "\n");
  EXPECT_THROW(read_jsonl(in, {}), DataError);
}

TEST(Jsonl, RejectsEmptySequences) {
  EXPECT_THROW(parse_example(R"({"id":"x","passage_sentences":["..."],"question":"",)"
                             R"("options":["a","b"],"label":0})", {}),
               DataError);
  EXPECT_THROW(parse_example(R"({"id":"x","passage_sentences":[" "],"question":"q",)"
                             R"("options":["a","b"],"label":0})", {}),
               DataError);
}

TEST(Truncate, TrimsTrailingPassageTokensFirst) {
  Example ex;
  ex.id = "t";
  ex.passage_sentences = {{"a", "b", "c"}, {"d", "e", "f"}, {"g"}};
  ex.question = {"q1", "q2"};
  ex.options = {{"o"}, {"o1", "o2"}};
  LoadOptions o;
  o.max_seq_len = 8;  // 2 + 2 leaves 4 passage tokens
  auto t = truncate(ex, o);
  EXPECT_EQ(t.passage_sentences, (std::vector<Tokens>{{"a", "b", "c"}, {"d"}}));
  EXPECT_EQ(t.question, ex.question);
  EXPECT_EQ(t.options, ex.options);
  EXPECT_LE(t.passage_length() + 2 + 2, 8u);
}

TEST(Truncate, CutsLongQueriesAt64) {
  Example ex;
  ex.id = "t";
  ex.passage_sentences = {{"a"}};
  ex.question = Tokens(100, "q");
  ex.options = {Tokens(70, "o"), {"b"}};
  auto t = truncate(ex, {});
  EXPECT_EQ(t.question.size(), 64u);
  EXPECT_EQ(t.options[0].size(), 64u);
  EXPECT_EQ(t.options[1].size(), 1u);
}

TEST(Jsonl, RoundTrip) {
  SyntheticSpec s;
  s.n_examples = 20;
  const auto data = gen_synthetic(s);
  const auto path = fs::temp_directory_path() / ("dcmn_rt_" + std::to_string(::getpid()) + ".jsonl");
  save_jsonl(path, data);
  EXPECT_EQ(load_jsonl(path), data);
  fs::remove(path);
}

TEST(Race, ConvertsFourOptionQuestions) {
  const char* doc = R"({"id":"high1.txt","article":"Tom went home. He was tired! Then he slept.",
    "questions":["Why did Tom sleep?","Where did Tom go?"],
    "options":[["tired","hungry","sad","happy"],["home","school","park","shop"]],
    "answers":["A","A"]})";
  auto ex = convert_race(doc);
  ASSERT_EQ(ex.size(), 2u);
  EXPECT_EQ(ex[0].id, "high1.txt-0");
  EXPECT_EQ(ex[0].num_options(), 4u);
  EXPECT_EQ(ex[0].num_sentences(), 3u);
  EXPECT_EQ(ex[1].label, 0u);
  EXPECT_THROW(convert_race(R"({"id":"a","article":"x.","questions":["q"],"options":[["a","b"]],"answers":["E"]})"),
               DataError);
}

TEST(Vocab, FrequencyOrderAndReserved) {
  Example ex;
  ex.id = "v";
  ex.passage_sentences = {{"b", "a", "b"}};
  ex.question = {"c"};
  ex.options = {{"a"}, {"b"}};
  Vocab v = Vocab::build({ex});
  EXPECT_EQ(v.token(Vocab::kPad), "[PAD]");
  EXPECT_EQ(v.id("b"), 2u);
  EXPECT_EQ(v.id("a"), 3u);
  EXPECT_EQ(v.id("c"), 4u);
  EXPECT_EQ(v.id("zzz"), Vocab::kUnk);
  EXPECT_EQ(Vocab::build({ex}, 3).size(), 3u);

  const auto path = fs::temp_directory_path() / ("dcmn_vocab_" + std::to_string(::getpid()));
  v.save(path);
  EXPECT_EQ(Vocab::load(path), v);
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first, "b");
  fs::remove(path);
}

TEST(Synthetic, Deterministic) {
  SyntheticSpec s;
  s.n_examples = 16;
  EXPECT_EQ(gen_synthetic(s), gen_synthetic(s));
  SyntheticSpec t = s;
  t.seed = 2;
  EXPECT_NE(gen_synthetic(s), gen_synthetic(t));
}

TEST(Synthetic, EvidenceCountAndInvariants) {
  SyntheticSpec s;
  s.n_examples = 64;
  s.evidence_count = 2;
  s.n_sentences = 8;
  for (const auto& ex : gen_synthetic(s)) {
    EXPECT_EQ(ex.evidence.size(), 2u);
    EXPECT_NO_THROW(validate(ex));
    EXPECT_EQ(ex.num_sentences(), 8u);
  }
}

TEST(Synthetic, LexicalOracleFindsAllEvidence) {
  SyntheticSpec s;
  s.n_examples = 128;
  s.overlap_rate = 1.0;
  EXPECT_EQ(testing_support::lexical_recall(gen_synthetic(s), s.evidence_count), 1.0);
}

TEST(Synthetic, DistractorsNeverTouchEvidence) {
  SyntheticSpec s;
  s.n_examples = 64;
  s.overlap_rate = 0.5;
  for (const auto& ex : gen_synthetic(s)) {
    for (auto e : ex.evidence) {
      std::set<std::string> sent(ex.passage_sentences[e].begin(), ex.passage_sentences[e].end());
      bool gold_hit = false;
      for (const auto& t : ex.options[ex.label]) gold_hit |= sent.count(t) > 0;
      EXPECT_TRUE(gold_hit);
      for (std::size_t j = 0; j < ex.num_options(); ++j)
        if (j != ex.label)
          for (const auto& t : ex.options[j]) EXPECT_EQ(sent.count(t), 0u) << ex.id;
    }
  }
}

TEST(Synthetic, RejectsSmallVocab) {
  SyntheticSpec s;
  s.vocab_size = 20;
  EXPECT_THROW(gen_synthetic(s), DataError);
  s = {};
  s.evidence_count = 9;
  EXPECT_THROW(s.validate(), DataError);
  s = {};
  s.overlap_rate = 0.0;
  EXPECT_THROW(s.validate(), DataError);
}

TEST(Synthetic, SpecJsonRoundTrip) {
  SyntheticSpec s;
  s.seed = 9;
  s.n_options = 3;
  auto t = SyntheticSpec::from_json(s.to_json());
  EXPECT_EQ(t.seed, 9u);
  EXPECT_EQ(t.n_options, 3u);
}

TEST(Synthetic, LabelsRoughlyUniform) {
  SyntheticSpec s;
  s.n_examples = 2000;
  std::vector<int> counts(4, 0);
  for (const auto& ex : gen_synthetic(s)) ++counts[ex.label];
  // 3-sigma band for Binomial(2000, 0.25)
  for (int c : counts) EXPECT_NEAR(c, 500, 3 * std::sqrt(2000 * 0.25 * 0.75));
}
