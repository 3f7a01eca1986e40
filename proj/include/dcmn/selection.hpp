#pragma once

#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcmn/encoder.hpp"
#include "dcmn/graph.hpp"
#include "dcmn/params.hpp"

namespace dcmn {

enum class SelectionMethod { cosine, bilinear };

SelectionMethod parse_selection_method(std::string_view name);
std::string to_string(SelectionMethod method);

/// Added under the square root of every norm in cosine_score.
inline constexpr double kCosineEps = 1e-8;

/// Word-by-word cosine relevance of one passage sentence to a
/// question/option pair: for each option (question) word, the best cosine
/// against the sentence words, averaged over option (question) words; the
/// two averages are summed. Result lies in [-2, 2].
double cosine_score(const Tensor& sentence, const Tensor& question, const Tensor& option);

/// Bilinear scorer weights: W1 [l x 1], W2 [l x l], W3 [l], W4 [l].
struct BilinearParams {
  Var w1, w2, w3, w4;
};

void register_bilinear_params(ParamStore& params, std::size_t hidden, std::mt19937_64& rng);
BilinearParams bind_bilinear(Graph& g, ParamStore& params);

/// Attention-pooled summary of `sequence` (weights softmax(sequence W1) over
/// its tokens), projected by W2, multiplied elementwise into every sentence
/// word, then max-pooled over sentence words. Returns an l-vector.
Var bilinear_similarity(Var sentence, Var sequence, const BilinearParams& p);
/// W3 . sim(sentence, question) + W4 . sim(sentence, option)
Var bilinear_score(Var sentence, Var question, Var option, const BilinearParams& p);

struct SelectionResult {
  /// Rank score per sentence: the maximum of its per-option scores.
  std::vector<double> scores;
  /// option_scores[i][j]: sentence i scored against option j.
  std::vector<std::vector<double>> option_scores;
  /// Kept sentence indices in original passage order.
  std::vector<std::size_t> selected;
  /// Row-wise concatenation of the kept sentence encodings.
  Var passage;
};

/// Indices of the k highest scores (ties to the lower index), returned in
/// ascending index order. k >= scores.size() keeps everything.
std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k);

/// Scores every sentence against the question and each option, aggregates
/// by max over options, keeps the top k. `params` is required for the
/// bilinear method.
SelectionResult select_topk(const EncodedVars& enc, std::size_t k, SelectionMethod method,
                            const BilinearParams* params = nullptr);

}  // namespace dcmn
