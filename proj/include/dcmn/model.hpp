#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>

#include "dcmn/data.hpp"
#include "dcmn/encoder.hpp"
#include "dcmn/graph.hpp"
#include "dcmn/interaction.hpp"
#include "dcmn/matching.hpp"
#include "dcmn/params.hpp"
#include "dcmn/selection.hpp"

namespace dcmn {

enum class EncoderKind { toy, precomputed };

struct ModelConfig {
  /// Desk-scale default; BERT-base uses 768 and BERT-large 1024.
  std::size_t hidden = 64;
  std::size_t num_options = 4;
  /// Sentences kept by passage sentence selection; 0 disables selection.
  /// 3 suits short COIN-like passages, 5 longer RACE-like ones.
  std::size_t top_k = 0;
  SelectionMethod selection = SelectionMethod::cosine;
  std::string combo = "dcmn";
  bool option_interaction = true;
  /// Reproduce the printed pair-fusion formula, which ignores the forward
  /// half (for comparison runs only).
  bool literal_fusion = false;
  EncoderKind encoder = EncoderKind::toy;
};

/// Everything recorded by one forward pass.
struct ForwardResult {
  EncodedVars encoded;
  std::optional<SelectionResult> selection;
  Var passage;
  InteractedOptions options;
  MatchOutput match;
};

struct ForwardOptions {
  /// Inverted dropout rate on encoder outputs; needs `rng` when > 0.
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;
};

/// Full matching network: shared encoder, optional sentence selection,
/// optional option interaction, pairwise matching and the softmax
/// classifier over options.
///
/// Parameters are registered in a fixed order (encoder, W1-W4, W5-W8 and
/// b_oi, the three matching pairs, V) regardless of which features are
/// enabled, so runs that differ only in selection settings start from
/// identical weights.
class DcmnModel {
 public:
  DcmnModel(ModelConfig config, Vocab vocab, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  const Combo& combo() const { return combo_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Required before forward when the encoder kind is precomputed.
  void set_encodings(std::shared_ptr<const PrecomputedEncodings> encodings);

  EncodedVars encode(Graph& g, const Example& ex);
  ForwardResult forward(Graph& g, const Example& ex, const ForwardOptions& opts = {});

 private:
  ModelConfig config_;
  Vocab vocab_;
  Combo combo_;
  ParamStore params_;
  std::shared_ptr<const PrecomputedEncodings> encodings_;
};

}  // namespace dcmn
