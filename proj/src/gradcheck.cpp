#include "dcmn/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "dcmn/train.hpp"

namespace dcmn {

namespace {

double eval_loss(const LossFn& loss) {
  Graph g(Precision::f64, false);
  const Var out = loss(g);
  if (out.value().size() != 1) throw ShapeError("gradcheck loss must be a scalar");
  return out.value()[0];
}

}  // namespace

GradcheckReport gradcheck(ParamStore& params, const LossFn& loss, const GradcheckOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  params.zero_grad();
  {
    Graph g(Precision::f64);
    g.backward(loss(g));
  }
  GradcheckReport report;
  report.tolerance = opts.tolerance;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = params.at(p);
    ParamCheck c;
    c.name = params.name(p);
    c.count = t.size();
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t[i];
      t[i] = saved + opts.step;
      const double up = eval_loss(loss);
      t[i] = saved - opts.step;
      const double down = eval_loss(loss);
      t[i] = saved;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double abs_err = std::abs(analytic[i] - numeric);
      const double rel =
          abs_err / std::max({std::abs(analytic[i]), std::abs(numeric), opts.floor});
      c.max_abs_error = std::max(c.max_abs_error, abs_err);
      if (rel > c.max_rel_error || i == 0) {
        c.max_rel_error = std::max(c.max_rel_error, rel);
        c.worst_index = i;
        c.analytic = analytic[i];
        c.numeric = numeric;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, c.max_rel_error);
    report.params.push_back(std::move(c));
  }
  params.zero_grad();
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

GradcheckProblem make_gradcheck_problem(std::uint64_t seed, std::size_t hidden) {
  Example ex;
  ex.id = "gradcheck";
  ex.passage_sentences = {{"the", "cat", "sat", "down"}, {"a", "dog", "ran"}, {"the", "sun", "set", "late", "today"}};
  ex.question = {"who", "sat", "down"};
  ex.options = {{"the", "cat"}, {"a", "dog"}};
  ex.label = 0;
  ModelConfig mc;
  mc.hidden = hidden;
  mc.num_options = 2;
  mc.top_k = 2;
  mc.selection = SelectionMethod::bilinear;
  mc.combo = "dcmn";
  mc.option_interaction = true;
  return {DcmnModel(mc, Vocab::build({ex}), seed), ex};
}

GradcheckReport gradcheck_model(DcmnModel& model, const Example& example,
                                const GradcheckOptions& opts) {
  return gradcheck(model.params(),
                   [&](Graph& g) { return model.forward(g, example).match.loss; }, opts);
}

std::string GradcheckReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : params)
    rows.push_back({{"name", c.name},
                    {"count", c.count},
                    {"max_rel_error", c.max_rel_error},
                    {"max_abs_error", c.max_abs_error},
                    {"worst_index", c.worst_index},
                    {"analytic", c.analytic},
                    {"numeric", c.numeric}});
  nlohmann::json j{{"params", rows},
                   {"max_rel_error", max_rel_error},
                   {"tolerance", tolerance},
                   {"passed", passed()},
                   {"seconds", seconds}};
  return j.dump(2);
}

std::string GradcheckReport::table() const {
  std::vector<std::vector<std::string>> cells;
  char buf[3][32];
  for (const auto& c : params) {
    std::snprintf(buf[0], sizeof buf[0], "%.3e", c.max_rel_error);
    std::snprintf(buf[1], sizeof buf[1], "%.3e", c.max_abs_error);
    std::snprintf(buf[2], sizeof buf[2], "%.6g", c.analytic);
    cells.push_back({c.name, std::to_string(c.count), buf[0], buf[1], buf[2]});
  }
  return format_table({"param", "n", "max_rel", "max_abs", "analytic@worst"}, cells);
}

}  // namespace dcmn
