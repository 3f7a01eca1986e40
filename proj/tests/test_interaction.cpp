#include <gtest/gtest.h>

#include <random>

#include "dcmn/interaction.hpp"
#include "support.hpp"

using namespace dcmn;
using testing_support::random_tensor;

namespace {

struct Raw {
  Tensor w5, w6, w7, w8, b;
};

Raw random_raw(std::mt19937_64& rng, std::size_t l, std::size_t m) {
  return {random_tensor({l, l}, rng), random_tensor({(m - 1) * l, l}, rng), random_tensor({l, l}, rng),
          random_tensor({l, l}, rng), random_tensor({l}, rng)};
}

InteractionParams bind(Graph& g, const Raw& r) {
  return {g.constant(r.w5), g.constant(r.w6), g.constant(r.w7), g.constant(r.w8), g.constant(r.b)};
}

}  // namespace

TEST(PairwiseInteract, SingleTokenOtherOption) {
  std::mt19937_64 rng(1);
  Graph g;
  Tensor ai = random_tensor({3, 4}, rng), aj = random_tensor({1, 4}, rng);
  Tensor out = pairwise_interact(g.constant(ai), g.constant(aj), g.constant(random_tensor({4, 4}, rng))).value();
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(out(r, c), std::max(0.0, aj(0, c)));
}

TEST(PairwiseInteract, ZeroWeightsAverageRows) {
  std::mt19937_64 rng(2);
  Graph g;
  Tensor ai = random_tensor({2, 3}, rng), aj = random_tensor({3, 3}, rng);
  Tensor out = pairwise_interact(g.constant(ai), g.constant(aj), g.constant(Tensor({3, 3}, 0.0))).value();
  for (std::size_t c = 0; c < 3; ++c) {
    const double mean = (aj(0, c) + aj(1, c) + aj(2, c)) / 3.0;
    for (std::size_t r = 0; r < 2; ++r) EXPECT_NEAR(out(r, c), std::max(0.0, mean), 1e-15);
  }
}

TEST(PairwiseInteract, ShapeMismatch) {
  Graph g;
  EXPECT_THROW(pairwise_interact(g.constant(Tensor({2, 3})), g.constant(Tensor({2, 4})),
                                 g.constant(Tensor({3, 3}))),
               ShapeError);
}

TEST(FuseOptions, GateSaturation) {
  std::mt19937_64 rng(3);
  const std::size_t l = 3, m = 3;
  Raw r = random_raw(rng, l, m);
  std::vector<Tensor> opts = {random_tensor({2, l}, rng), random_tensor({1, l}, rng), random_tensor({3, l}, rng)};
  for (double bias : {60.0, -60.0}) {
    r.b = Tensor({l}, bias);
    Graph g;
    std::vector<Var> vs;
    for (auto& o : opts) vs.push_back(g.constant(o));
    auto out = fuse_options(vs, bind(g, r));
    for (std::size_t i = 0; i < m; ++i) {
      const Tensor& want = bias > 0 ? opts[i] : out.summaries[i].value();
      for (std::size_t k = 0; k < want.size(); ++k)
        EXPECT_NEAR(out.options[i].value()[k], want[k], 1e-9);
    }
  }
}

TEST(FuseOptions, PreservesShapesAndBoundsGate) {
  std::mt19937_64 rng(4);
  const std::size_t l = 4, m = 4;
  Raw r = random_raw(rng, l, m);
  Graph g;
  std::vector<Var> vs;
  for (std::size_t j = 0; j < m; ++j) vs.push_back(g.constant(random_tensor({j + 1, l}, rng)));
  auto out = fuse_options(vs, bind(g, r));
  ASSERT_EQ(out.options.size(), m);
  for (std::size_t i = 0; i < m; ++i) {
    EXPECT_EQ(out.options[i].shape(), vs[i].shape());
    for (double v : out.gates[i].value().data()) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(FuseOptions, OptionCountMustMatchW6) {
  std::mt19937_64 rng(5);
  Raw r = random_raw(rng, 3, 4);
  Graph g;
  std::vector<Var> vs = {g.constant(random_tensor({2, 3}, rng)), g.constant(random_tensor({2, 3}, rng))};
  EXPECT_THROW(fuse_options(vs, bind(g, r)), ShapeError);
}

TEST(FuseOptions, TiedBlocksMakeOtherOptionsASet) {
  std::mt19937_64 rng(6);
  const std::size_t l = 3, m = 4;
  Raw r = random_raw(rng, l, m);
  Tensor block = random_tensor({l, l}, rng);
  for (std::size_t b = 0; b < m - 1; ++b)
    for (std::size_t i = 0; i < l; ++i)
      for (std::size_t j = 0; j < l; ++j) r.w6(b * l + i, j) = block(i, j);
  std::vector<Tensor> opts;
  for (std::size_t j = 0; j < m; ++j) opts.push_back(random_tensor({2, l}, rng));
  auto run = [&](const std::vector<Tensor>& o) {
    Graph g;
    std::vector<Var> vs;
    for (auto& t : o) vs.push_back(g.constant(t));
    return fuse_options(vs, bind(g, r)).options[0].value();
  };
  const Tensor base = run(opts);
  std::vector<Tensor> perm = {opts[0], opts[3], opts[1], opts[2]};
  const Tensor swapped = run(perm);
  for (std::size_t k = 0; k < base.size(); ++k) EXPECT_NEAR(base[k], swapped[k], 1e-12);
}

TEST(FuseOptions, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  const std::size_t l = 3;
  auto r = testing_support::check_inputs(
      {random_tensor({2, l}, rng), random_tensor({1, l}, rng), random_tensor({3, l}, rng),
       random_tensor({l, l}, rng),
       random_tensor({2 * l, l}, rng), random_tensor({l, l}, rng), random_tensor({l, l}, rng),
       random_tensor({l}, rng)},
      [](Graph&, std::vector<Var>& x) {
        std::vector<Var> opts = {x[0], x[1], x[2]};
        auto out = fuse_options(opts, {x[3], x[4], x[5], x[6], x[7]});
        return add(add(sum(out.options[0]), sum(mul(out.options[1], out.options[1]))),
                   sum(scale(out.options[2], -0.5)));
      });
  EXPECT_TRUE(r.passed()) << r.table();
}
