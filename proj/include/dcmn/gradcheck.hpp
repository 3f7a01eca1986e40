#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dcmn/graph.hpp"
#include "dcmn/model.hpp"
#include "dcmn/params.hpp"

namespace dcmn {

struct GradcheckOptions {
  double step = 1e-4;
  double tolerance = 1e-3;
  /// Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
};

struct ParamCheck {
  std::string name;
  std::size_t count = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradcheckReport {
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  double seconds = 0.0;

  bool passed() const { return max_rel_error < tolerance; }
  std::string to_json() const;
  std::string table() const;
};

/// Builds a scalar loss on a fresh graph from the current parameter values.
using LossFn = std::function<Var(Graph&)>;

/// Compares backward() against central differences for every scalar of
/// every parameter in `params`. Values are restored afterwards.
GradcheckReport gradcheck(ParamStore& params, const LossFn& loss, const GradcheckOptions& opts = {});

/// Small seeded problem exercising the whole model: two options, three
/// sentences, bilinear selection of two sentences, option interaction and
/// the bidirectional combo.
struct GradcheckProblem {
  DcmnModel model;
  Example example;
};
GradcheckProblem make_gradcheck_problem(std::uint64_t seed = 7, std::size_t hidden = 4);

GradcheckReport gradcheck_model(DcmnModel& model, const Example& example,
                                const GradcheckOptions& opts = {});

}  // namespace dcmn
