#pragma once

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "dcmn/data.hpp"
#include "dcmn/gradcheck.hpp"
#include "dcmn/tensor.hpp"
#include "oracle/oracle.hpp"

namespace testing_support {

inline dcmn::Tensor random_tensor(dcmn::Shape shape, std::mt19937_64& rng, double lo = -2.0,
                                  double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  dcmn::Tensor t(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

inline oracle::Mat to_mat(const dcmn::Tensor& t) {
  oracle::Mat m(t.rows(), oracle::Vec(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.data()[r * t.cols() + c];
  return m;
}

inline oracle::Vec to_vec(const dcmn::Tensor& t) { return {t.data().begin(), t.data().end()}; }

/// Gradient check of a function of several input tensors.
template <class Fn>
dcmn::GradcheckReport check_inputs(std::vector<dcmn::Tensor> inputs, Fn fn,
                                   double tolerance = 1e-4) {
  dcmn::ParamStore store;
  for (std::size_t i = 0; i < inputs.size(); ++i) store.add("x" + std::to_string(i), inputs[i]);
  dcmn::GradcheckOptions opts;
  opts.tolerance = tolerance;
  return dcmn::gradcheck(
      store,
      [&](dcmn::Graph& g) {
        std::vector<dcmn::Var> xs;
        for (std::size_t i = 0; i < store.size(); ++i) xs.push_back(g.parameter(store.at(i)));
        return fn(g, xs);
      },
      opts);
}

/// Bag-of-words relevance of each sentence: share of question tokens it
/// contains plus the best share of any option's tokens.
inline std::vector<double> lexical_scores(const dcmn::Example& ex) {
  auto coverage = [](const dcmn::Tokens& sent, const dcmn::Tokens& seq) {
    std::set<std::string> s(sent.begin(), sent.end());
    double hit = 0;
    for (const auto& t : seq) hit += s.count(t) ? 1.0 : 0.0;
    return hit / static_cast<double>(seq.size());
  };
  std::vector<double> out;
  for (const auto& sent : ex.passage_sentences) {
    double best = 0;
    for (const auto& o : ex.options) best = std::max(best, coverage(sent, o));
    out.push_back(coverage(sent, ex.question) + best);
  }
  return out;
}

/// Brute-force top-k: repeatedly take the highest remaining score, lowest
/// index on ties.
inline std::vector<std::size_t> brute_top_k(const std::vector<double>& scores, std::size_t k) {
  std::vector<bool> used(scores.size(), false);
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < std::min(k, scores.size()); ++r) {
    std::size_t best = scores.size();
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (!used[i] && (best == scores.size() || scores[i] > scores[best])) best = i;
    used[best] = true;
    out.push_back(best);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline double lexical_recall(const std::vector<dcmn::Example>& data, std::size_t k) {
  double hit = 0, total = 0;
  for (const auto& ex : data) {
    const auto top = brute_top_k(lexical_scores(ex), k);
    for (auto e : ex.evidence) {
      total += 1;
      if (std::find(top.begin(), top.end(), e) != top.end()) hit += 1;
    }
  }
  return total > 0 ? hit / total : 0.0;
}

}  // namespace testing_support
