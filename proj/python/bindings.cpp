#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dcmn/gradcheck.hpp"
#include "dcmn/train.hpp"

namespace py = pybind11;
using namespace dcmn;

namespace {

using Rows = std::vector<std::vector<double>>;

Tensor to_tensor(const Rows& rows) {
  if (rows.empty() || rows[0].empty()) throw Error("expected a non-empty matrix");
  std::vector<double> flat;
  for (const auto& r : rows) {
    if (r.size() != rows[0].size()) throw Error("ragged matrix");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return Tensor::matrix(rows.size(), rows[0].size(), std::move(flat));
}

// A trained model plus the config it was trained with.
struct PyModel {
  TrainConfig config;
  DcmnModel model;

  std::string evaluate(const std::vector<Example>& data) {
    return dcmn::evaluate(model, data, config.precision).to_json();
  }

  std::vector<double> logits(const Example& ex) {
    Graph g(config.precision, false);
    ForwardResult r = model.forward(g, ex);
    const Tensor& t = r.match.logits.value();
    return {t.data().begin(), t.data().end()};
  }

  py::dict select(const Example& ex, std::size_t k, const std::string& method) {
    if (k == 0) throw Error("k must be positive");
    Graph g(config.precision, false);
    EncodedVars enc = model.encode(g, ex);
    BilinearParams bp;
    const SelectionMethod m = parse_selection_method(method);
    if (m == SelectionMethod::bilinear) bp = bind_bilinear(g, model.params());
    SelectionResult s = select_topk(enc, k, m, &bp);
    py::dict out;
    out["scores"] = s.scores;
    out["selected"] = s.selected;
    return out;
  }
};

}  // namespace

PYBIND11_MODULE(_dcmn, m) {
  m.doc() = "Dual co-matching network with passage sentence selection";

  py::register_exception<Error>(m, "Error", PyExc_ValueError);

  py::class_<Example>(m, "Example")
      .def(py::init<>())
      .def_readwrite("id", &Example::id)
      .def_readwrite("passage_sentences", &Example::passage_sentences)
      .def_readwrite("question", &Example::question)
      .def_readwrite("options", &Example::options)
      .def_readwrite("label", &Example::label)
      .def_readwrite("evidence", &Example::evidence)
      .def("to_json", &to_json_line)
      .def_static(
          "from_json",
          [](const std::string& text, std::size_t max_seq_len) {
            LoadOptions o;
            o.max_seq_len = max_seq_len;
            return parse_example(text, o);
          },
          py::arg("text"), py::arg("max_seq_len") = 512)
      .def("__eq__", [](const Example& a, const Example& b) { return a == b; })
      .def("__repr__", [](const Example& e) {
        return "<Example " + e.id + ": " + std::to_string(e.num_sentences()) + " sentences, " +
               std::to_string(e.num_options()) + " options>";
      });

  m.def("tokenize", &tokenize, py::arg("text"));

  m.def(
      "gen_synthetic",
      [](const std::string& spec_json) { return gen_synthetic(SyntheticSpec::from_json(spec_json)); },
      py::arg("spec_json") = "{}", "Planted-evidence synthetic examples from a JSON spec.");

  m.def(
      "load_jsonl",
      [](const std::filesystem::path& path, std::size_t max_seq_len, std::size_t num_options) {
        LoadOptions o;
        o.max_seq_len = max_seq_len;
        o.num_options = num_options;
        return load_jsonl(path, o);
      },
      py::arg("path"), py::arg("max_seq_len") = 512, py::arg("num_options") = 0);
  m.def("save_jsonl", &save_jsonl, py::arg("path"), py::arg("examples"));

  m.def("combos", [] {
    std::vector<std::string> names;
    for (const auto& c : registered_combos()) names.push_back(c.name);
    return names;
  });

  m.def("default_config", [] { return TrainConfig{}.to_json(); });

  m.def(
      "cosine_score",
      [](const Rows& s, const Rows& q, const Rows& o) {
        return cosine_score(to_tensor(s), to_tensor(q), to_tensor(o));
      },
      py::arg("sentence"), py::arg("question"), py::arg("option"));

  m.def(
      "top_k_indices",
      [](const std::vector<double>& scores, std::size_t k) { return top_k_indices(scores, k); },
      py::arg("scores"), py::arg("k"));

  py::class_<PyModel>(m, "Model")
      .def_property_readonly("config", [](const PyModel& p) { return p.config.to_json(); })
      .def_property_readonly("vocab_size", [](const PyModel& p) { return p.model.vocab().size(); })
      .def("evaluate", &PyModel::evaluate, py::arg("data"), "Evaluation report as JSON.")
      .def("logits", &PyModel::logits, py::arg("example"))
      .def("select", &PyModel::select, py::arg("example"), py::arg("k"),
           py::arg("method") = "cosine")
      .def("save", [](const PyModel& p, const std::filesystem::path& dir) {
        save_model(dir, p.model, p.config);
      });

  m.def(
      "load_model",
      [](const std::filesystem::path& dir) {
        LoadedModel l = load_model(dir);
        return PyModel{std::move(l.config), std::move(l.model)};
      },
      py::arg("dir"));

  m.def(
      "train",
      [](const std::vector<Example>& train_set, std::optional<std::vector<Example>> dev,
         const std::string& config_json) {
        const TrainConfig cfg = TrainConfig::from_json(config_json);
        std::optional<TrainResult> r;
        {
          py::gil_scoped_release nogil;
          r.emplace(train(train_set, dev ? &*dev : nullptr, cfg));
        }
        return py::make_tuple(PyModel{cfg, std::move(r->model)}, r->report.to_json());
      },
      py::arg("train"), py::arg("dev") = py::none(), py::arg("config_json") = "{}",
      "Returns (model, report JSON).");

  m.def(
      "ablate",
      [](const std::vector<Example>& train_set, const std::vector<Example>& dev,
         const std::string& config_json, std::vector<std::string> combos) {
        if (combos.empty())
          for (const auto& c : registered_combos()) combos.push_back(c.name);
        py::gil_scoped_release nogil;
        return ablation_json(ablate(train_set, dev, TrainConfig::from_json(config_json), combos));
      },
      py::arg("train"), py::arg("dev"), py::arg("config_json") = "{}",
      py::arg("combos") = std::vector<std::string>{});

  m.def(
      "sweep_topk",
      [](const std::vector<Example>& train_set, const std::vector<Example>& dev,
         const std::string& config_json, const std::vector<std::size_t>& ks) {
        py::gil_scoped_release nogil;
        return sweep_json(sweep_topk(train_set, dev, TrainConfig::from_json(config_json), ks));
      },
      py::arg("train"), py::arg("dev"), py::arg("config_json") = "{}", py::arg("ks"));

  m.def(
      "gradcheck",
      [](std::uint64_t seed, std::size_t hidden, double step, double tolerance) {
        GradcheckProblem p = make_gradcheck_problem(seed, hidden);
        GradcheckOptions o;
        o.step = step;
        o.tolerance = tolerance;
        return gradcheck_model(p.model, p.example, o).to_json();
      },
      py::arg("seed") = 7, py::arg("hidden") = 4, py::arg("step") = 1e-4,
      py::arg("tolerance") = 1e-3, "Full-model finite-difference check; report as JSON.");

}
