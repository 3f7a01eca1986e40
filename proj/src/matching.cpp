#include "dcmn/matching.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

namespace dcmn {

std::string to_string(SeqPair pair) {
  switch (pair) {
    case SeqPair::pq: return "pq";
    case SeqPair::po: return "po";
    case SeqPair::qo: return "qo";
  }
  return "?";
}

void register_pair_params(ParamStore& params, SeqPair pair, std::size_t hidden,
                          std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  const std::string suffix = "." + to_string(pair);
  for (int k = 9; k <= 14; ++k)
    params.add("W" + std::to_string(k) + suffix, {hidden, hidden}, Init::uniform, rng, bound);
  params.add("b_bm" + suffix, {hidden}, Init::zeros, rng, 0.0);
}

PairParams bind_pair(Graph& g, ParamStore& params, SeqPair pair) {
  const std::string s = "." + to_string(pair);
  auto p = [&](const std::string& n) { return g.parameter(params.get(n + s)); };
  return {p("W9"), p("W10"), p("W11"), p("W12"), p("W13"), p("W14"), p("b_bm")};
}

namespace {

// rowmax(ReLU(softmax(a W_att b^T) b W_proj))
Var attend_and_pool(Var a, Var b, Var w_att, Var w_proj) {
  if (a.value().cols() != b.value().cols())
    throw ShapeError("matching: hidden size mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  Var weights = softmax(matmul(matmul(a, w_att), transpose(b)), 1);
  Var aware = matmul(weights, b);
  return row_max_pool(relu(matmul(aware, w_proj)));
}

}  // namespace

PairMatch match_pair(Var x, Var y, const PairParams& p, bool literal_fusion) {
  PairMatch m;
  m.forward = attend_and_pool(x, y, p.w9, p.w11);
  m.backward = attend_and_pool(y, x, p.w10, p.w12);
  m.gate = sigmoid(add(add(matmul(m.forward, p.w13), matmul(m.backward, p.w14)), p.b));
  m.fused = literal_fusion ? gated_mix(m.gate, m.backward, m.backward)
                           : gated_mix(m.gate, m.forward, m.backward);
  return m;
}

Var match_unidirectional(Var x, Var y, const PairParams& p, Direction direction) {
  return direction == Direction::forward ? attend_and_pool(x, y, p.w9, p.w11)
                                         : attend_and_pool(y, x, p.w10, p.w12);
}

std::string MatchTerm::label() const {
  static const char* names[] = {"P", "Q", "O"};
  std::pair<int, int> xy = pair == SeqPair::pq ? std::pair{0, 1}
                           : pair == SeqPair::po ? std::pair{0, 2}
                                                 : std::pair{1, 2};
  if (kind == Kind::backward) std::swap(xy.first, xy.second);
  const char* sym = kind == Kind::bidirectional ? "M" : "S";
  return std::string(sym) + "^{" + names[xy.first] + "_" + names[xy.second] + "}";
}

std::string Combo::describe() const {
  std::string out = "[";
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i) out += "; ";
    out += terms[i].label();
  }
  return out + "]";
}

namespace {

using Kind = MatchTerm::Kind;

MatchTerm parse_term(std::string_view tok, bool bidirectional) {
  static const std::map<std::string_view, std::pair<SeqPair, Kind>> dirs = {
      {"pq", {SeqPair::pq, Kind::forward}},  {"qp", {SeqPair::pq, Kind::backward}},
      {"po", {SeqPair::po, Kind::forward}},  {"op", {SeqPair::po, Kind::backward}},
      {"qo", {SeqPair::qo, Kind::forward}},  {"oq", {SeqPair::qo, Kind::backward}}};
  auto it = dirs.find(tok);
  if (it == dirs.end())
    throw Error("unknown matching direction '" + std::string(tok) +
                "' (expected pq, qp, po, op, qo or oq)");
  return {it->second.first, bidirectional ? Kind::bidirectional : it->second.second};
}

}  // namespace

Combo parse_combo(std::string_view name) {
  if (name == "dcmn") return {"dcmn", {parse_term("pq", true), parse_term("po", true), parse_term("qo", true)}};
  if (name == "hcm") return {"hcm", {parse_term("pq", false), parse_term("po", false)}};
  if (name == "haf")
    return {"haf", {parse_term("po", false), parse_term("pq", false), parse_term("qo", false)}};
  if (name == "mmn")
    return {"mmn", {parse_term("qo", false), parse_term("oq", false), parse_term("pq", false),
                    parse_term("po", false)}};
  const bool bi = name.starts_with("bi:");
  if (!bi && !name.starts_with("uni:"))
    throw Error("unknown combo '" + std::string(name) +
                "' (expected dcmn, hcm, haf, mmn, uni:<list> or bi:<list>)");
  Combo c{std::string(name), {}};
  std::string_view rest = name.substr(bi ? 3 : 4);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto tok = rest.substr(0, comma);
    MatchTerm t = parse_term(tok, bi);
    if (std::find(c.terms.begin(), c.terms.end(), t) != c.terms.end())
      throw Error("combo '" + std::string(name) + "' repeats '" + std::string(tok) + "'");
    c.terms.push_back(t);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  if (c.terms.empty()) throw Error("combo '" + std::string(name) + "' has no terms");
  return c;
}

const std::vector<Combo>& registered_combos() {
  static const std::vector<Combo> combos = [] {
    std::vector<Combo> out;
    for (const char* n :
         {"uni:po,pq,oq", "uni:po,qp,oq", "hcm", "haf", "mmn", "uni:pq,qo", "uni:po,qo",
          "uni:po,oq", "uni:po,qp,qo", "uni:pq,oq", "uni:qp,oq", "uni:pq,op", "uni:qp,qo",
          "bi:pq,po", "bi:po,qo", "bi:pq,qo", "dcmn"})
      out.push_back(parse_combo(n));
    return out;
  }();
  return combos;
}

std::size_t argmax_first(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

MatchOutput classify(Var passage, Var question, const InteractedOptions& options,
                     const ClassifierParams& params, const Combo& combo, std::size_t label,
                     bool literal_fusion) {
  const std::size_t l = question.value().cols();
  if (params.v.value().size() != combo.width(l))
    throw ShapeError("classifier weights V have " + std::to_string(params.v.value().size()) +
                     " entries, combo " + combo.name + " needs " + std::to_string(combo.width(l)));
  auto pair_params = [&](SeqPair p) -> const PairParams& {
    auto it = params.pairs.find(p);
    if (it == params.pairs.end()) throw Error("missing matching parameters for pair " + to_string(p));
    return it->second;
  };

  // The passage-question pair does not depend on the option.
  std::optional<PairMatch> pq_match;
  std::optional<Var> pq_fwd, pq_bwd;
  auto term_value = [&](const MatchTerm& t, Var option) -> Var {
    Var x = t.pair == SeqPair::qo ? question : passage;
    Var y = t.pair == SeqPair::pq ? question : option;
    const PairParams& p = pair_params(t.pair);
    if (t.pair == SeqPair::pq) {
      if (t.kind == Kind::bidirectional) {
        if (!pq_match) pq_match = match_pair(x, y, p, literal_fusion);
        return pq_match->fused;
      }
      auto& slot = t.kind == Kind::forward ? pq_fwd : pq_bwd;
      if (!slot)
        slot = match_unidirectional(x, y, p, t.kind == Kind::forward ? Direction::forward
                                                                     : Direction::backward);
      return *slot;
    }
    if (t.kind == Kind::bidirectional) return match_pair(x, y, p, literal_fusion).fused;
    return match_unidirectional(x, y, p,
                                t.kind == Kind::forward ? Direction::forward : Direction::backward);
  };

  MatchOutput out;
  std::vector<Var> logits;
  for (Var option : options.options) {
    std::vector<Var> parts;
    for (const MatchTerm& t : combo.terms) parts.push_back(term_value(t, option));
    Var c = concat(parts, 0);
    out.features.push_back(c);
    logits.push_back(dot(params.v, c));
  }
  out.logits = concat(logits, 0);
  out.loss = cross_entropy(out.logits, label);
  const auto z = out.logits.value().data();
  out.predicted = argmax_first(z);
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  for (double v : z) out.probabilities.push_back(std::exp(v - mx) / s);
  return out;
}

}  // namespace dcmn
