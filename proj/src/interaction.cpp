#include "dcmn/interaction.hpp"

#include <cmath>

namespace dcmn {

void register_interaction_params(ParamStore& params, std::size_t hidden, std::size_t num_options,
                                 std::mt19937_64& rng) {
  if (num_options < 2) throw Error("option interaction needs at least 2 options");
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  params.add("W5", {hidden, hidden}, Init::uniform, rng, bound);
  params.add("W6", {(num_options - 1) * hidden, hidden}, Init::uniform, rng, bound);
  params.add("W7", {hidden, hidden}, Init::uniform, rng, bound);
  params.add("W8", {hidden, hidden}, Init::uniform, rng, bound);
  params.add("b_oi", {hidden}, Init::zeros, rng, 0.0);
}

InteractionParams bind_interaction(Graph& g, ParamStore& params) {
  return {g.parameter(params.get("W5")), g.parameter(params.get("W6")),
          g.parameter(params.get("W7")), g.parameter(params.get("W8")),
          g.parameter(params.get("b_oi"))};
}

Var pairwise_interact(Var option_i, Var option_j, Var w5) {
  if (option_i.value().cols() != w5.value().rows() || option_j.value().cols() != w5.value().cols())
    throw ShapeError("pairwise_interact: shapes " + to_string(option_i.shape()) + ", " +
                     to_string(option_j.shape()) + " incompatible with W5 " + to_string(w5.shape()));
  Var affinity = matmul(matmul(option_i, w5), transpose(option_j));
  return relu(matmul(softmax(affinity, 1), option_j));
}

InteractedOptions fuse_options(std::span<const Var> options, const InteractionParams& p) {
  const std::size_t m = options.size();
  const std::size_t l = p.w5.value().rows();
  if (m < 2) throw ShapeError("fuse_options: needs at least 2 options");
  if (p.w6.value().rows() != (m - 1) * l)
    throw ShapeError("fuse_options: W6 has shape " + to_string(p.w6.shape()) + " but " +
                     std::to_string(m) + " options need [" + std::to_string((m - 1) * l) + "x" +
                     std::to_string(l) + "]");
  InteractedOptions out;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<Var> parts;
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) parts.push_back(pairwise_interact(options[i], options[j], p.w5));
    Var summary = matmul(concat(parts, 1), p.w6);
    Var gate = sigmoid(add_bias(add(matmul(summary, p.w7), matmul(options[i], p.w8)), p.b));
    out.options.push_back(gated_mix(gate, options[i], summary));
    out.gates.push_back(gate);
    out.summaries.push_back(summary);
  }
  return out;
}

InteractedOptions identity_options(std::span<const Var> options) {
  InteractedOptions out;
  out.options.assign(options.begin(), options.end());
  return out;
}

}  // namespace dcmn
