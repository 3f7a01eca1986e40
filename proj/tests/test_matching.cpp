#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dcmn/gradcheck.hpp"
#include "dcmn/matching.hpp"
#include "dcmn/model.hpp"
#include "oracle_checks.hpp"

using namespace dcmn;
using oracle_checks::bind;
using oracle_checks::random_pair;
using oracle_checks::RawPair;
using testing_support::random_tensor;
using testing_support::to_mat;
using testing_support::to_vec;

TEST(MatchPair, SingleTokensGiveUnitAttention) {
  std::mt19937_64 rng(1);
  RawPair r = random_pair(rng, 3);
  r.w9 = Tensor({3, 3}, 0.0);
  Tensor x = random_tensor({1, 3}, rng), y = random_tensor({1, 3}, rng);
  Graph g;
  PairMatch m = match_pair(g.constant(x), g.constant(y), bind(g, r));
  // With one token on each side, E^x = H^y and E^y = H^x.
  Graph h;
  Tensor fwd = relu(matmul(h.constant(y), h.constant(r.w11))).value();
  Tensor bwd = relu(matmul(h.constant(x), h.constant(r.w12))).value();
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_DOUBLE_EQ(m.forward.value()[c], fwd[c]);
    EXPECT_DOUBLE_EQ(m.backward.value()[c], bwd[c]);
  }
}

TEST(MatchPair, ZeroProjectionsGiveZero) {
  std::mt19937_64 rng(2);
  RawPair r = random_pair(rng, 4);
  r.w11 = Tensor({4, 4}, 0.0);
  r.w12 = Tensor({4, 4}, 0.0);
  Graph g;
  PairMatch m = match_pair(g.constant(random_tensor({3, 4}, rng)), g.constant(random_tensor({2, 4}, rng)),
                           bind(g, r));
  for (double v : m.fused.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(MatchPair, FusedLiesBetweenHalves) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    RawPair r = random_pair(rng, 4);
    Graph g;
    PairMatch m = match_pair(g.constant(random_tensor({3, 4}, rng)), g.constant(random_tensor({2, 4}, rng)),
                             bind(g, r));
    for (std::size_t c = 0; c < 4; ++c) {
      const double a = m.forward.value()[c], b = m.backward.value()[c], f = m.fused.value()[c];
      EXPECT_GE(f, std::min(a, b) - 1e-12);
      EXPECT_LE(f, std::max(a, b) + 1e-12);
      EXPECT_GT(m.gate.value()[c], 0.0);
      EXPECT_LT(m.gate.value()[c], 1.0);
    }
  }
}

TEST(MatchPair, LiteralFusionCollapsesToBackwardHalf) {
  std::mt19937_64 rng(4);
  RawPair r = random_pair(rng, 3);
  Graph g;
  PairMatch m = match_pair(g.constant(random_tensor({3, 3}, rng)), g.constant(random_tensor({2, 3}, rng)),
                           bind(g, r), true);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(m.fused.value()[c], m.backward.value()[c], 1e-15);
}

TEST(MatchPair, SwappingArgumentsAndWeightsExchangesHalves) {
  std::mt19937_64 rng(5);
  RawPair r = random_pair(rng, 4);
  RawPair s{r.w10, r.w9, r.w12, r.w11, r.w14, r.w13, r.b};
  Tensor x = random_tensor({3, 4}, rng), y = random_tensor({2, 4}, rng);
  Graph g;
  PairMatch a = match_pair(g.constant(x), g.constant(y), bind(g, r));
  PairMatch b = match_pair(g.constant(y), g.constant(x), bind(g, s));
  EXPECT_EQ(a.forward.value(), b.backward.value());
  EXPECT_EQ(a.backward.value(), b.forward.value());
}

TEST(MatchUnidirectional, EqualsMatchPairHalves) {
  std::mt19937_64 rng(6);
  RawPair r = random_pair(rng, 4);
  Graph g;
  Var x = g.constant(random_tensor({3, 4}, rng)), y = g.constant(random_tensor({2, 4}, rng));
  PairParams p = bind(g, r);
  PairMatch m = match_pair(x, y, p);
  EXPECT_EQ(match_unidirectional(x, y, p, Direction::forward).value(), m.forward.value());
  EXPECT_EQ(match_unidirectional(x, y, p, Direction::backward).value(), m.backward.value());
}

TEST(Combo, NamedRowsAndWidths) {
  EXPECT_EQ(parse_combo("dcmn").describe(), "[M^{P_Q}; M^{P_O}; M^{Q_O}]");
  EXPECT_EQ(parse_combo("hcm").describe(), "[S^{P_Q}; S^{P_O}]");
  EXPECT_EQ(parse_combo("hcm").width(5), 10u);
  EXPECT_EQ(parse_combo("mmn").describe(), "[S^{Q_O}; S^{O_Q}; S^{P_Q}; S^{P_O}]");
  EXPECT_EQ(parse_combo("mmn").width(5), 20u);
  EXPECT_EQ(parse_combo("haf").width(5), 15u);
  EXPECT_EQ(parse_combo("uni:qp").describe(), "[S^{Q_P}]");
  EXPECT_EQ(parse_combo("bi:qo").describe(), "[M^{Q_O}]");
  EXPECT_THROW(parse_combo("xyz"), Error);
  EXPECT_THROW(parse_combo("uni:pz"), Error);
  EXPECT_THROW(parse_combo("uni:pq,pq"), Error);
  EXPECT_THROW(parse_combo("bi:"), Error);
}

TEST(Combo, RegistryCoversAblationRows) {
  const auto& all = registered_combos();
  EXPECT_EQ(all.size(), 17u);
  std::set<std::string> names;
  for (const auto& c : all) names.insert(c.name);
  for (const char* n : {"hcm", "haf", "mmn", "dcmn", "bi:pq,po", "bi:po,qo", "bi:pq,qo"})
    EXPECT_TRUE(names.count(n)) << n;
}

namespace {

struct ClassifyFixture {
  std::mt19937_64 rng{9};
  Graph g;
  std::vector<RawPair> raw;
  ClassifierParams cp;
  Var passage, question;
  std::vector<Var> options;

  ClassifyFixture(std::size_t l, std::size_t m, const Combo& combo) {
    for (int i = 0; i < 3; ++i) raw.push_back(random_pair(rng, l));
    cp.pairs.emplace(SeqPair::pq, bind(g, raw[0]));
    cp.pairs.emplace(SeqPair::po, bind(g, raw[1]));
    cp.pairs.emplace(SeqPair::qo, bind(g, raw[2]));
    cp.v = g.constant(random_tensor({combo.width(l)}, rng));
    passage = g.constant(random_tensor({4, l}, rng));
    question = g.constant(random_tensor({2, l}, rng));
    for (std::size_t j = 0; j < m; ++j) options.push_back(g.constant(random_tensor({2, l}, rng)));
  }
};

}  // namespace

TEST(Classify, ZeroOutputWeightsGiveUniform) {
  const Combo c = parse_combo("dcmn");
  ClassifyFixture f(3, 4, c);
  f.cp.v = f.g.constant(Tensor({c.width(3)}, 0.0));
  MatchOutput out = classify(f.passage, f.question, identity_options(f.options), f.cp, c, 2);
  EXPECT_NEAR(out.loss.value()[0], std::log(4.0), 1e-15);
  EXPECT_NEAR(out.loss.value()[0], 1.3863, 1e-4);
  for (double p : out.probabilities) EXPECT_NEAR(p, 0.25, 1e-15);
  EXPECT_EQ(out.predicted, 0u);
}

TEST(Classify, EqualLogitsGiveLn2) {
  Graph g;
  for (double z : {-30.0, 0.0, 7.5}) {
    Var l = g.constant(Tensor::vector({z, z}));
    EXPECT_NEAR(cross_entropy(l, 1).value()[0], std::log(2.0), 1e-14);
  }
}

TEST(Classify, WidthMismatchIsAnError) {
  const Combo c = parse_combo("hcm");
  ClassifyFixture f(3, 2, parse_combo("dcmn"));
  EXPECT_THROW(classify(f.passage, f.question, identity_options(f.options), f.cp, c, 0), ShapeError);
}

TEST(Classify, FeatureWidthFollowsCombo) {
  for (const char* name : {"hcm", "mmn", "dcmn"}) {
    const Combo c = parse_combo(name);
    ClassifyFixture f(3, 2, c);
    MatchOutput out = classify(f.passage, f.question, identity_options(f.options), f.cp, c, 0);
    ASSERT_EQ(out.features.size(), 2u);
    EXPECT_EQ(out.features[0].value().size(), c.width(3));
    EXPECT_GE(out.loss.value()[0], 0.0);
  }
}

TEST(Argmax, TiesGoToLowestIndex) {
  const double z[] = {1.0, 3.0, 3.0, 2.0};
  EXPECT_EQ(argmax_first(z), 1u);
  const double flat[] = {0.0, 0.0, 0.0};
  EXPECT_EQ(argmax_first(flat), 0u);
}

// Encoder, cosine selection, option interaction and the dcmn classifier,
// recomputed from raw parameter values with the scalar oracle.
TEST(EndToEnd, LossMatchesStraightLineReimplementation) {
  Example ex;
  ex.id = "e2e";
  ex.passage_sentences = {{"the", "cat", "sat"}, {"dogs", "bark"}, {"the", "sun", "is", "hot"}};
  ex.question = {"who", "sat", "?"};
  ex.options = {{"the", "cat"}, {"a", "dog"}};
  ex.label = 1;
  ModelConfig mc;
  mc.hidden = 5;
  mc.num_options = 2;
  mc.top_k = 2;
  DcmnModel model(mc, Vocab::build({ex}), 31);
  Graph g;
  const double got = model.forward(g, ex).match.loss.value()[0];

  const ParamStore& p = model.params();
  auto M = [&](const std::string& n) { return to_mat(p.get(n)); };
  const Vocab& v = model.vocab();
  auto enc = [&](const Tokens& t) {
    std::vector<std::size_t> ids;
    for (const auto& tok : t) ids.push_back(v.id(tok));
    return oracle::encode(M("emb"), ids, M("enc.Wq"), M("enc.Wk"), M("enc.Wv"));
  };
  std::vector<oracle::Mat> sents;
  for (const auto& s : ex.passage_sentences) sents.push_back(enc(s));
  const oracle::Mat q = enc(ex.question);
  std::vector<oracle::Mat> opts = {enc(ex.options[0]), enc(ex.options[1])};

  std::vector<double> scores;
  for (const auto& s : sents)
    scores.push_back(std::max(oracle::cosine_score(s, q, opts[0]), oracle::cosine_score(s, q, opts[1])));
  oracle::Mat passage;
  for (auto i : testing_support::brute_top_k(scores, 2))
    passage.insert(passage.end(), sents[i].begin(), sents[i].end());

  auto fused = oracle::fuse_options(opts, M("W5"), M("W6"), M("W7"), M("W8"), to_vec(p.get("b_oi")));
  std::vector<oracle::Mat> final_opts = {fused[0].option, fused[1].option};
  auto pw = [&](const std::string& s) {
    return oracle::PairWeights{M("W9." + s),  M("W10." + s), M("W11." + s), M("W12." + s),
                               M("W13." + s), M("W14." + s), to_vec(p.get("b_bm." + s))};
  };
  auto want = oracle::classify(passage, q, final_opts, {pw("pq"), pw("po"), pw("qo")},
                               {{0, 0}, {1, 0}, {2, 0}}, to_vec(p.get("V")), ex.label);
  EXPECT_NEAR(got, want.loss, 1e-10);
}

TEST(FullModel, GradientsMatchFiniteDifferences) {
  GradcheckProblem prob = make_gradcheck_problem();
  GradcheckReport r = gradcheck_model(prob.model, prob.example);
  EXPECT_TRUE(r.passed()) << r.table();
  EXPECT_EQ(r.params.size(), prob.model.params().size());
}
