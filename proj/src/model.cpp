#include "dcmn/model.hpp"

#include <cmath>

namespace dcmn {

DcmnModel::DcmnModel(ModelConfig config, Vocab vocab, std::uint64_t seed)
    : config_(std::move(config)), vocab_(std::move(vocab)), combo_(parse_combo(config_.combo)) {
  if (config_.hidden == 0) throw Error("hidden size must be positive");
  if (config_.num_options < 2) throw Error("num_options must be at least 2");
  std::mt19937_64 rng(seed);
  const std::size_t l = config_.hidden;
  if (config_.encoder == EncoderKind::toy)
    ToyEncoder::register_params(params_, vocab_.size(), l, rng);
  register_bilinear_params(params_, l, rng);
  register_interaction_params(params_, l, config_.num_options, rng);
  for (SeqPair p : {SeqPair::pq, SeqPair::po, SeqPair::qo}) register_pair_params(params_, p, l, rng);
  params_.add("V", {combo_.width(l)}, Init::uniform, rng, 1.0 / std::sqrt(static_cast<double>(l)));
}

void DcmnModel::set_encodings(std::shared_ptr<const PrecomputedEncodings> encodings) {
  if (encodings && encodings->hidden() != config_.hidden)
    throw FormatError("encoding file hidden size " + std::to_string(encodings->hidden()) +
                      " does not match configured hidden size " + std::to_string(config_.hidden));
  encodings_ = std::move(encodings);
}

EncodedVars DcmnModel::encode(Graph& g, const Example& ex) {
  if (config_.encoder == EncoderKind::toy) return ToyEncoder(g, params_).encode(ex, vocab_);
  if (!encodings_) throw Error("precomputed encoder selected but no encodings loaded");
  const EncodedTriplet& t = encodings_->get(ex.id);
  if (t.sentences.size() != ex.num_sentences() || t.options.size() != ex.num_options())
    throw FormatError("precomputed encoding for '" + ex.id + "' does not match the example");
  return as_constants(g, t);
}

ForwardResult DcmnModel::forward(Graph& g, const Example& ex, const ForwardOptions& opts) {
  if (ex.num_options() != config_.num_options)
    throw DataError("example '" + ex.id + "' has " + std::to_string(ex.num_options()) +
                    " options, model expects " + std::to_string(config_.num_options));
  ForwardResult r;
  r.encoded = encode(g, ex);
  if (opts.dropout > 0.0) {
    if (!opts.rng) throw Error("dropout needs a random generator");
    for (Var& s : r.encoded.sentences) s = dropout(s, opts.dropout, *opts.rng);
    r.encoded.question = dropout(r.encoded.question, opts.dropout, *opts.rng);
    for (Var& o : r.encoded.options) o = dropout(o, opts.dropout, *opts.rng);
  }

  if (config_.top_k > 0) {
    BilinearParams bp;
    if (config_.selection == SelectionMethod::bilinear) bp = bind_bilinear(g, params_);
    r.selection = select_topk(r.encoded, config_.top_k, config_.selection, &bp);
    r.passage = r.selection->passage;
  } else {
    r.passage = concat(r.encoded.sentences, 0);
  }

  r.options = config_.option_interaction
                  ? fuse_options(r.encoded.options, bind_interaction(g, params_))
                  : identity_options(r.encoded.options);

  ClassifierParams cp;
  for (const MatchTerm& t : combo_.terms)
    if (!cp.pairs.count(t.pair)) cp.pairs.emplace(t.pair, bind_pair(g, params_, t.pair));
  cp.v = g.parameter(params_.get("V"));
  r.match = classify(r.passage, r.encoded.question, r.options, cp, combo_, ex.label,
                     config_.literal_fusion);
  return r;
}

}  // namespace dcmn
