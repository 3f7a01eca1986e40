#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dcmn/tensor.hpp"

namespace dcmn {

/// Bad input data (malformed JSON line, invariant violation).
class DataError : public Error {
 public:
  using Error::Error;
};

using Tokens = std::vector<std::string>;

/// One multi-choice reading-comprehension instance.
struct Example {
  std::string id;
  std::vector<Tokens> passage_sentences;
  Tokens question;
  std::vector<Tokens> options;
  std::size_t label = 0;
  /// Indices of planted evidence sentences; synthetic data only.
  std::vector<std::size_t> evidence;

  std::size_t num_sentences() const { return passage_sentences.size(); }
  std::size_t num_options() const { return options.size(); }
  std::size_t passage_length() const;

  friend bool operator==(const Example&, const Example&) = default;
};

/// Lowercases and splits on whitespace; each ASCII punctuation character
/// becomes its own token.
Tokens tokenize(std::string_view text);
std::string join_tokens(const Tokens& tokens);

struct LoadOptions {
  std::size_t max_seq_len = 512;
  /// Questions and options are cut to this many tokens.
  std::size_t max_query_len = 64;
  /// Required option count; 0 adopts the count of the first example.
  std::size_t num_options = 0;
};

/// Checks Example invariants; throws DataError naming the example.
void validate(const Example& ex);

/// Applies the length policy: question/options cut at max_query_len, then
/// trailing passage tokens removed until passage + question + longest option
/// fits max_seq_len.
Example truncate(Example ex, const LoadOptions& opts);

/// Parses one JSON object (id, passage_sentences, question, options, label,
/// optional evidence) into a tokenized, truncated, validated Example.
Example parse_example(std::string_view json_text, const LoadOptions& opts);

std::vector<Example> read_jsonl(std::istream& in, const LoadOptions& opts,
                                const std::string& source = "<stream>");
std::vector<Example> load_jsonl(const std::filesystem::path& path, const LoadOptions& opts = {});
std::string to_json_line(const Example& ex);
void save_jsonl(const std::filesystem::path& path, const std::vector<Example>& examples);

/// Converts one RACE-format document ({"id", "article", "questions",
/// "options", "answers"}) into one Example per question.
std::vector<Example> convert_race(std::string_view json_text, const LoadOptions& opts = {});

/// Token vocabulary with reserved ids 0 = PAD and 1 = UNK.
class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocab();

  /// Tokens ordered by descending frequency, then lexicographically.
  static Vocab build(const std::vector<Example>& examples, std::size_t max_size = 0);
  /// One token per line; line i holds id i + 2.
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t add(const std::string& token);
  std::size_t id(const std::string& token) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  std::vector<std::size_t> encode(const Tokens& tokens) const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// Generator settings for planted-evidence synthetic data.
struct SyntheticSpec {
  std::size_t vocab_size = 1000;
  std::size_t n_examples = 512;
  std::size_t n_sentences = 8;
  std::size_t sentence_len = 8;
  std::size_t question_len = 4;
  std::size_t option_len = 2;
  std::size_t n_options = 4;
  std::size_t evidence_count = 2;
  double overlap_rate = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
  static SyntheticSpec from_json(std::string_view json_text);
  std::string to_json() const;
};

/// Each example gets `evidence_count` evidence sentences built from question
/// and gold-option tokens, one decoy sentence per distractor option (while
/// non-evidence sentences remain) built from that distractor's tokens, and
/// filler elsewhere. Question, answer and filler tokens come from disjoint
/// pools, so distractors never share tokens with evidence.
std::vector<Example> gen_synthetic(const SyntheticSpec& spec);

}  // namespace dcmn
