#include "dcmn/encoder.hpp"

#include <cmath>
#include <fstream>

#include "dcmn/binary_io.hpp"

namespace dcmn {

void EncodedTriplet::validate() const {
  auto check = [&](const Tensor& t, const char* what) {
    if (t.rank() != 2 || t.cols() != hidden)
      throw ShapeError(std::string("encoded ") + what + " has shape " + to_string(t.shape()) +
                       ", expected [len x " + std::to_string(hidden) + "]");
  };
  if (sentences.empty()) throw ShapeError("encoded triplet has no passage sentences");
  for (const auto& s : sentences) check(s, "sentence");
  check(question, "question");
  for (const auto& o : options) check(o, "option");
}

EncodedTriplet to_triplet(const EncodedVars& vars) {
  EncodedTriplet t;
  for (const Var& s : vars.sentences) t.sentences.push_back(s.value());
  t.question = vars.question.value();
  for (const Var& o : vars.options) t.options.push_back(o.value());
  t.hidden = t.question.cols();
  return t;
}

EncodedVars as_constants(Graph& g, const EncodedTriplet& triplet) {
  EncodedVars v;
  for (const auto& s : triplet.sentences) v.sentences.push_back(g.constant(s));
  v.question = g.constant(triplet.question);
  for (const auto& o : triplet.options) v.options.push_back(g.constant(o));
  return v;
}

Var dropout(Var x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  Tensor mask(x.shape());
  const double s = 1.0 / (1.0 - rate);
  for (double& m : mask.data()) m = keep(rng) ? s : 0.0;
  return mul(x, x.graph->constant(std::move(mask)));
}

void ToyEncoder::register_params(ParamStore& params, std::size_t vocab_size, std::size_t hidden,
                                 std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  params.add("emb", {vocab_size, hidden}, Init::uniform, rng, bound);
  params.add("enc.Wq", {hidden, hidden}, Init::uniform, rng, bound);
  params.add("enc.Wk", {hidden, hidden}, Init::uniform, rng, bound);
  params.add("enc.Wv", {hidden, hidden}, Init::uniform, rng, bound);
}

ToyEncoder::ToyEncoder(Graph& g, ParamStore& params)
    : graph_(&g),
      emb_(g.parameter(params.get("emb"))),
      wq_(g.parameter(params.get("enc.Wq"))),
      wk_(g.parameter(params.get("enc.Wk"))),
      wv_(g.parameter(params.get("enc.Wv"))),
      inv_sqrt_hidden_(1.0 / std::sqrt(static_cast<double>(params.get("emb").cols()))) {}

Var ToyEncoder::encode_sequence(std::span<const std::size_t> ids) const {
  Var x = embedding(emb_, ids);
  Var logits = scale(matmul(matmul(x, wq_), transpose(matmul(x, wk_))), inv_sqrt_hidden_);
  Var attn = softmax(logits, 1);
  return add(x, matmul(attn, matmul(x, wv_)));
}

Tensor ToyEncoder::attention(std::span<const std::size_t> ids) const {
  Var x = embedding(emb_, ids);
  Var logits = scale(matmul(matmul(x, wq_), transpose(matmul(x, wk_))), inv_sqrt_hidden_);
  return softmax(logits, 1).value();
}

EncodedVars ToyEncoder::encode(const Example& ex, const Vocab& vocab) const {
  EncodedVars out;
  for (const auto& s : ex.passage_sentences) out.sentences.push_back(encode_sequence(vocab.encode(s)));
  out.question = encode_sequence(vocab.encode(ex.question));
  for (const auto& o : ex.options) out.options.push_back(encode_sequence(vocab.encode(o)));
  return out;
}

namespace {

void write_seq(std::ostream& out, const Tensor& t) {
  io::write_u32(out, static_cast<std::uint32_t>(t.rows()));
  for (double v : t.data()) io::write_f32(out, v);
}

Tensor read_seq(std::istream& in, std::size_t hidden) {
  const auto len = io::read_u32(in, "sequence length");
  if (len == 0 || len > (1u << 20)) throw FormatError("invalid sequence length in encoding file");
  Tensor t({len, hidden});
  for (double& v : t.data()) v = io::read_f32(in);
  return t;
}

}  // namespace

void save_precomputed(const std::filesystem::path& path, std::size_t hidden,
                      const std::vector<std::pair<std::string, EncodedTriplet>>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write("DCME", 4);
  io::write_u32(out, kEncodingVersion);
  io::write_u32(out, static_cast<std::uint32_t>(hidden));
  io::write_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& [id, t] : records) {
    if (t.hidden != hidden)
      throw ShapeError("record '" + id + "' has hidden size " + std::to_string(t.hidden) +
                       ", file uses " + std::to_string(hidden));
    t.validate();
    io::write_bytes(out, id);
    io::write_u32(out, static_cast<std::uint32_t>(t.sentences.size()));
    for (const auto& s : t.sentences) write_seq(out, s);
    write_seq(out, t.question);
    io::write_u32(out, static_cast<std::uint32_t>(t.options.size()));
    for (const auto& o : t.options) write_seq(out, o);
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

PrecomputedEncodings PrecomputedEncodings::load(const std::filesystem::path& path,
                                                std::size_t expected_hidden) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open encoding file " + path.string());
  io::expect_magic(in, "DCME");
  const auto version = io::read_u32(in, "version");
  if (version != kEncodingVersion)
    throw FormatError("unsupported encoding file version " + std::to_string(version));
  PrecomputedEncodings store;
  store.hidden_ = io::read_u32(in, "hidden size");
  if (expected_hidden != 0 && store.hidden_ != expected_hidden)
    throw FormatError("encoding file hidden size " + std::to_string(store.hidden_) +
                      " does not match configured hidden size " + std::to_string(expected_hidden));
  const auto count = io::read_u32(in, "record count");
  for (std::uint32_t r = 0; r < count; ++r) {
    std::string id = io::read_bytes(in, "record id");
    EncodedTriplet t;
    t.hidden = store.hidden_;
    const auto n = io::read_u32(in, "sentence count");
    for (std::uint32_t i = 0; i < n; ++i) t.sentences.push_back(read_seq(in, t.hidden));
    t.question = read_seq(in, t.hidden);
    const auto m = io::read_u32(in, "option count");
    for (std::uint32_t i = 0; i < m; ++i) t.options.push_back(read_seq(in, t.hidden));
    store.records_.emplace(std::move(id), std::move(t));
  }
  return store;
}

const EncodedTriplet& PrecomputedEncodings::get(const std::string& id) const {
  auto it = records_.find(id);
  if (it == records_.end()) throw FormatError("no precomputed encoding for example '" + id + "'");
  return it->second;
}

EncodedTriplet load_precomputed(const std::filesystem::path& path, const std::string& example_id,
                                std::size_t expected_hidden) {
  return PrecomputedEncodings::load(path, expected_hidden).get(example_id);
}

}  // namespace dcmn
