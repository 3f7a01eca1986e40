#pragma once

#include <random>
#include <span>
#include <vector>

#include "dcmn/graph.hpp"
#include "dcmn/params.hpp"

namespace dcmn {

/// W5 [l x l], W6 [(m-1)l x l], W7 [l x l], W8 [l x l], b [l].
struct InteractionParams {
  Var w5, w6, w7, w8, b;
};

void register_interaction_params(ParamStore& params, std::size_t hidden, std::size_t num_options,
                                 std::mt19937_64& rng);
InteractionParams bind_interaction(Graph& g, ParamStore& params);

/// Comparison of option i against option j:
///   G = softmax_j(H^ai W5 H^aj^T),  result = ReLU(G H^aj)   [|A_i| x l]
Var pairwise_interact(Var option_i, Var option_j, Var w5);

struct InteractedOptions {
  /// One fused representation per option, same shape as its input.
  std::vector<Var> options;
  /// Reset gate used for each option's fusion.
  std::vector<Var> gates;
  /// Projected interaction summary (the H-bar term) per option.
  std::vector<Var> summaries;
};

/// For every option i: concatenate its interactions with all j != i in
/// ascending j, project by W6, and mix with the original encoding through
///   g = sigmoid(summary W7 + H^ai W8 + b),  H^oi = g*H^ai + (1-g)*summary.
InteractedOptions fuse_options(std::span<const Var> options, const InteractionParams& p);

/// Passes options through unchanged (interaction disabled).
InteractedOptions identity_options(std::span<const Var> options);

}  // namespace dcmn
