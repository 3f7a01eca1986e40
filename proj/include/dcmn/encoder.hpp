#pragma once

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dcmn/data.hpp"
#include "dcmn/graph.hpp"
#include "dcmn/params.hpp"

namespace dcmn {

/// Contextual encodings of one example: one matrix per passage sentence,
/// the question, and one matrix per option, all with `hidden` columns.
struct EncodedTriplet {
  std::vector<Tensor> sentences;
  Tensor question;
  std::vector<Tensor> options;
  std::size_t hidden = 0;

  void validate() const;
  friend bool operator==(const EncodedTriplet&, const EncodedTriplet&) = default;
};

/// The same encodings recorded on a graph.
struct EncodedVars {
  std::vector<Var> sentences;
  Var question;
  std::vector<Var> options;
};

EncodedTriplet to_triplet(const EncodedVars& vars);
/// Records the triplet as frozen graph constants.
EncodedVars as_constants(Graph& g, const EncodedTriplet& triplet);

/// Inverted dropout; identity when rate == 0.
Var dropout(Var x, double rate, std::mt19937_64& rng);

/// Embedding lookup followed by one single-head self-attention layer with a
/// residual connection:
///   X = emb[ids];  H = X + softmax(X Wq (X Wk)^T / sqrt(l)) X Wv
/// Parameters are shared across passage, question and options.
class ToyEncoder {
 public:
  static void register_params(ParamStore& params, std::size_t vocab_size, std::size_t hidden,
                              std::mt19937_64& rng);

  ToyEncoder(Graph& g, ParamStore& params);

  Var encode_sequence(std::span<const std::size_t> ids) const;
  /// Encodes every passage sentence separately, then question and options.
  EncodedVars encode(const Example& ex, const Vocab& vocab) const;
  /// Attention weights of the self-attention layer for one sequence.
  Tensor attention(std::span<const std::size_t> ids) const;

 private:
  Graph* graph_;
  Var emb_, wq_, wk_, wv_;
  double inv_sqrt_hidden_;
};

/// Binary store of precomputed encodings: "DCME", u32 version, u32 hidden,
/// u32 record count, then per record the id, the sentence block, the
/// question block and the option block. Each sequence is stored as u32 length
/// followed by length * hidden f32 values.
inline constexpr std::uint32_t kEncodingVersion = 1;

void save_precomputed(const std::filesystem::path& path, std::size_t hidden,
                      const std::vector<std::pair<std::string, EncodedTriplet>>& records);

class PrecomputedEncodings {
 public:
  /// Loads every record; throws if the stored hidden size differs from
  /// `expected_hidden` (pass 0 to accept any).
  static PrecomputedEncodings load(const std::filesystem::path& path,
                                   std::size_t expected_hidden = 0);

  std::size_t hidden() const { return hidden_; }
  std::size_t size() const { return records_.size(); }
  bool contains(const std::string& id) const { return records_.count(id) != 0; }
  const EncodedTriplet& get(const std::string& id) const;

 private:
  std::size_t hidden_ = 0;
  std::map<std::string, EncodedTriplet> records_;
};

EncodedTriplet load_precomputed(const std::filesystem::path& path, const std::string& example_id,
                                std::size_t expected_hidden = 0);

}  // namespace dcmn
