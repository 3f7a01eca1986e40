#pragma once

#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcmn/graph.hpp"
#include "dcmn/interaction.hpp"
#include "dcmn/params.hpp"

namespace dcmn {

/// The three sequence pairs of the {passage, question, option} triplet. The
/// first letter is the x side, the second the y side.
enum class SeqPair { pq, po, qo };

std::string to_string(SeqPair pair);

/// Per-pair matching weights W9..W14 [l x l] and gate bias b [l].
struct PairParams {
  Var w9, w10, w11, w12, w13, w14, b;
};

/// Registers W9.<pair> .. W14.<pair> and b_bm.<pair>.
void register_pair_params(ParamStore& params, SeqPair pair, std::size_t hidden,
                          std::mt19937_64& rng);
PairParams bind_pair(Graph& g, ParamStore& params, SeqPair pair);

struct PairMatch {
  /// Gated combination of the two halves.
  Var fused;
  /// Pooled x-attends-y half (S^{x_y}).
  Var forward;
  /// Pooled y-attends-x half (S^{y_x}).
  Var backward;
  Var gate;
};

enum class Direction { forward, backward };

/// Bidirectional matching of x and y:
///   G^xy = softmax(H^x W9 H^y^T)   E^x = G^xy H^y   S^x = ReLU(E^x W11)
///   G^yx = softmax(H^y W10 H^x^T)  E^y = G^yx H^x   S^y = ReLU(E^y W12)
///   fwd = rowmax(S^x), bwd = rowmax(S^y)
///   g = sigmoid(fwd W13 + bwd W14 + b),  M = g*fwd + (1-g)*bwd
/// With `literal_fusion` the fused vector is g*bwd + (1-g)*bwd, i.e. bwd.
PairMatch match_pair(Var x, Var y, const PairParams& p, bool literal_fusion = false);

/// Only one pooled half of match_pair, without the gate.
Var match_unidirectional(Var x, Var y, const PairParams& p, Direction direction);

/// One vector in a classifier input.
struct MatchTerm {
  enum class Kind { bidirectional, forward, backward };
  SeqPair pair;
  Kind kind;

  /// e.g. "M^{P_Q}" or "S^{O_Q}".
  std::string label() const;
  friend bool operator==(const MatchTerm&, const MatchTerm&) = default;
};

/// A registered assembly of matching vectors concatenated into C.
struct Combo {
  std::string name;
  std::vector<MatchTerm> terms;

  std::size_t width(std::size_t hidden) const { return terms.size() * hidden; }
  /// e.g. "[M^{P_Q}; M^{P_O}; M^{Q_O}]".
  std::string describe() const;
};

/// Accepts "dcmn", "hcm", "haf", "mmn", "uni:<dirs>" and "bi:<pairs>", where
/// entries are comma-separated from {pq, qp, po, op, qo, oq}.
Combo parse_combo(std::string_view name);
/// Every bidirectional and unidirectional assembly of the ablation study.
const std::vector<Combo>& registered_combos();

struct ClassifierParams {
  std::map<SeqPair, PairParams> pairs;
  /// Output weights, length = combo width.
  Var v;
};

struct MatchOutput {
  /// Classifier input C_j per option.
  std::vector<Var> features;
  Var logits;
  Var loss;
  std::size_t predicted = 0;
  std::vector<double> probabilities;
};

/// Index of the largest value; ties resolve to the lowest index.
std::size_t argmax_first(std::span<const double> values);

/// Builds C_j from {passage, question, option_j} per the combo, scores each
/// option with V . C_j and applies softmax cross-entropy against `label`.
MatchOutput classify(Var passage, Var question, const InteractedOptions& options,
                     const ClassifierParams& params, const Combo& combo, std::size_t label,
                     bool literal_fusion = false);

}  // namespace dcmn
