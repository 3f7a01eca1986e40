#include "dcmn/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dcmn {

SelectionMethod parse_selection_method(std::string_view name) {
  if (name == "cosine") return SelectionMethod::cosine;
  if (name == "bilinear") return SelectionMethod::bilinear;
  throw Error("unknown selection method '" + std::string(name) + "' (expected cosine|bilinear)");
}

std::string to_string(SelectionMethod method) {
  return method == SelectionMethod::cosine ? "cosine" : "bilinear";
}

namespace {

std::vector<double> row_norms(const Tensor& t) {
  std::vector<double> n(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < t.cols(); ++c) s += t(r, c) * t(r, c);
    n[r] = std::sqrt(s + kCosineEps);
  }
  return n;
}

// Mean over rows of `seq` of the best cosine against any sentence row.
double mean_best_cosine(const Tensor& seq, const Tensor& sentence,
                        const std::vector<double>& sentence_norms) {
  const auto seq_norms = row_norms(seq);
  const std::size_t l = seq.cols();
  double total = 0.0;
  for (std::size_t j = 0; j < seq.rows(); ++j) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < sentence.rows(); ++k) {
      double d = 0.0;
      for (std::size_t c = 0; c < l; ++c) d += seq(j, c) * sentence(k, c);
      best = std::max(best, d / (seq_norms[j] * sentence_norms[k]));
    }
    total += best;
  }
  return total / static_cast<double>(seq.rows());
}

void require_hidden(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols())
    throw ShapeError("hidden size mismatch: " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
}

}  // namespace

double cosine_score(const Tensor& sentence, const Tensor& question, const Tensor& option) {
  require_hidden(sentence, question);
  require_hidden(sentence, option);
  const auto norms = row_norms(sentence);
  return mean_best_cosine(option, sentence, norms) + mean_best_cosine(question, sentence, norms);
}

void register_bilinear_params(ParamStore& params, std::size_t hidden, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  params.add("W1", {hidden, 1}, Init::uniform, rng, bound);
  params.add("W2", {hidden, hidden}, Init::uniform, rng, bound);
  params.add("W3", {hidden}, Init::uniform, rng, bound);
  params.add("W4", {hidden}, Init::uniform, rng, bound);
}

BilinearParams bind_bilinear(Graph& g, ParamStore& params) {
  return {g.parameter(params.get("W1")), g.parameter(params.get("W2")),
          g.parameter(params.get("W3")), g.parameter(params.get("W4"))};
}

Var bilinear_similarity(Var sentence, Var sequence, const BilinearParams& p) {
  if (sentence.value().cols() != sequence.value().cols())
    throw ShapeError("bilinear score: hidden size mismatch " + to_string(sentence.shape()) +
                     " vs " + to_string(sequence.shape()));
  Graph& g = *sentence.graph;
  Var alpha = softmax(matmul(sequence, p.w1), 0);            // |seq| x 1
  Var summary = matmul(transpose(alpha), sequence);           // 1 x l
  Var projected = matmul(summary, transpose(p.w2));           // 1 x l, (W2 q)^T
  Var ones = g.constant(Tensor({sentence.value().rows(), 1}, 1.0));
  Var weighted = mul(sentence, matmul(ones, projected));      // |p_i| x l
  return row_max_pool(weighted);
}

Var bilinear_score(Var sentence, Var question, Var option, const BilinearParams& p) {
  return add(dot(p.w3, bilinear_similarity(sentence, question, p)),
             dot(p.w4, bilinear_similarity(sentence, option, p)));
}

std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k) {
  if (k == 0) throw Error("top-k selection needs k >= 1");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  if (k < order.size()) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(k);
    std::sort(order.begin(), order.end());
  }
  return order;
}

SelectionResult select_topk(const EncodedVars& enc, std::size_t k, SelectionMethod method,
                            const BilinearParams* params) {
  if (method == SelectionMethod::bilinear && params == nullptr)
    throw Error("bilinear selection needs scorer parameters");
  SelectionResult r;
  const std::size_t n = enc.sentences.size();
  const std::size_t m = enc.options.size();
  r.option_scores.assign(n, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const Var sent = enc.sentences[i];
    if (method == SelectionMethod::cosine) {
      for (std::size_t j = 0; j < m; ++j)
        r.option_scores[i][j] =
            cosine_score(sent.value(), enc.question.value(), enc.options[j].value());
    } else {
      Var q_part = dot(params->w3, bilinear_similarity(sent, enc.question, *params));
      for (std::size_t j = 0; j < m; ++j) {
        Var a_part = dot(params->w4, bilinear_similarity(sent, enc.options[j], *params));
        r.option_scores[i][j] = add(q_part, a_part).value()[0];
      }
    }
    r.scores.push_back(*std::max_element(r.option_scores[i].begin(), r.option_scores[i].end()));
  }
  r.selected = top_k_indices(r.scores, k);
  std::vector<Var> parts;
  for (auto i : r.selected) parts.push_back(enc.sentences[i]);
  r.passage = concat(parts, 0);
  return r;
}

}  // namespace dcmn
