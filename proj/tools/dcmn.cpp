#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dcmn/data.hpp"
#include "dcmn/gradcheck.hpp"
#include "dcmn/model.hpp"
#include "dcmn/train.hpp"

namespace {

using namespace dcmn;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

TrainConfig load_config(const std::string& path) {
  return path.empty() ? TrainConfig{} : TrainConfig::from_json(read_file(path));
}

LoadOptions load_options(const TrainConfig& cfg) {
  LoadOptions o;
  o.max_seq_len = cfg.max_seq_len;
  o.num_options = cfg.model.num_options;
  return o;
}

std::shared_ptr<const PrecomputedEncodings> maybe_encodings(const std::string& path,
                                                            std::size_t hidden) {
  if (path.empty()) return nullptr;
  return std::make_shared<const PrecomputedEncodings>(PrecomputedEncodings::load(path, hidden));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

struct TrainArgs {
  std::string config, data, dev, out, encodings, report;
};

struct EvalArgs {
  std::string ckpt, data, encodings, predictions, report;
};

struct SelectArgs {
  std::string ckpt, data, method = "cosine", out, encodings;
  std::size_t top_k = 0;
};

struct AblateArgs {
  std::string config, data, dev, combos, report;
};

struct SweepArgs {
  std::string config, data, dev, ks = "1,2,3,4,5,6", report;
};

struct GenArgs {
  std::string spec, out;
};

struct GradArgs {
  std::uint64_t seed = 7;
  std::size_t hidden = 4;
  double step = 1e-4;
  double tolerance = 1e-3;
  std::string report;
};

struct RaceArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::size_t max_seq_len = 512;
};

struct EncodeArgs {
  std::string ckpt, data, out;
};

int run_train(const TrainArgs& a) {
  TrainConfig cfg = load_config(a.config);
  const LoadOptions lo = load_options(cfg);
  const auto train_set = load_jsonl(a.data, lo);
  std::vector<Example> dev;
  if (!a.dev.empty()) dev = load_jsonl(a.dev, lo);
  auto enc = maybe_encodings(a.encodings, cfg.model.hidden);
  TrainResult r = train(train_set, a.dev.empty() ? nullptr : &dev, cfg, enc, &std::cerr);
  save_model(a.out, r.model, cfg);
  const std::string json = r.report.to_json();
  if (!a.report.empty()) write_file(a.report, json + "\n");
  std::printf("best epoch %zu  accuracy %.4f (%zu/%zu)\n", r.report.best_epoch + 1,
              r.report.accuracy, r.report.correct, r.report.total);
  return 0;
}

int run_eval(const EvalArgs& a) {
  LoadedModel m = load_model(a.ckpt);
  if (m.config.model.encoder == EncoderKind::precomputed)
    m.model.set_encodings(maybe_encodings(a.encodings, m.config.model.hidden));
  const auto data = load_jsonl(a.data, load_options(m.config));
  EvalReport r = evaluate(m.model, data, m.config.precision);
  if (!a.predictions.empty()) write_file(a.predictions, r.predictions_jsonl());
  if (!a.report.empty()) write_file(a.report, r.to_json() + "\n");
  std::printf("accuracy %.4f (%zu/%zu)  loss %.6f\n", r.accuracy, r.correct, r.total, r.mean_loss);
  if (r.recall_at_k) std::printf("recall@%zu %.4f\n", m.config.model.top_k, *r.recall_at_k);
  return 0;
}

int run_select(const SelectArgs& a) {
  if (a.top_k == 0) throw Error("--top-k must be positive");
  const SelectionMethod method = parse_selection_method(a.method);
  LoadedModel m = load_model(a.ckpt);
  if (m.config.model.encoder == EncoderKind::precomputed)
    m.model.set_encodings(maybe_encodings(a.encodings, m.config.model.hidden));
  const auto data = load_jsonl(a.data, load_options(m.config));
  std::ostringstream lines;
  for (const auto& ex : data) {
    Graph g(m.config.precision, false);
    EncodedVars enc = m.model.encode(g, ex);
    BilinearParams bp;
    if (method == SelectionMethod::bilinear) bp = bind_bilinear(g, m.model.params());
    SelectionResult s = select_topk(enc, a.top_k, method, &bp);
    nlohmann::json j{{"id", ex.id}, {"scores", s.scores}, {"selected", s.selected}};
    lines << j.dump() << '\n';
  }
  if (a.out.empty())
    std::cout << lines.str();
  else
    write_file(a.out, lines.str());
  return 0;
}

int run_ablate(const AblateArgs& a) {
  TrainConfig cfg = load_config(a.config);
  const LoadOptions lo = load_options(cfg);
  const auto train_set = load_jsonl(a.data, lo);
  const auto dev = a.dev.empty() ? train_set : load_jsonl(a.dev, lo);
  std::vector<std::string> combos = split_list(a.combos);
  if (combos.empty())
    for (const auto& c : registered_combos()) combos.push_back(c.name);
  const auto rows = ablate(train_set, dev, cfg, combos, &std::cerr);
  if (!a.report.empty()) write_file(a.report, ablation_json(rows) + "\n");
  std::cout << ablation_table(rows);
  return 0;
}

int run_sweep(const SweepArgs& a) {
  TrainConfig cfg = load_config(a.config);
  const LoadOptions lo = load_options(cfg);
  const auto train_set = load_jsonl(a.data, lo);
  const auto dev = a.dev.empty() ? train_set : load_jsonl(a.dev, lo);
  std::vector<std::size_t> ks;
  for (const auto& s : split_list(a.ks)) {
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != s.size() || v <= 0) throw Error("bad value in --k: '" + s + "'");
    ks.push_back(static_cast<std::size_t>(v));
  }
  const auto rows = sweep_topk(train_set, dev, cfg, ks, &std::cerr);
  if (!a.report.empty()) write_file(a.report, sweep_json(rows) + "\n");
  std::cout << sweep_table(rows);
  return 0;
}

int run_gen(const GenArgs& a) {
  const SyntheticSpec spec =
      a.spec.empty() ? SyntheticSpec{} : SyntheticSpec::from_json(read_file(a.spec));
  const auto data = gen_synthetic(spec);
  if (a.out.empty()) {
    for (const auto& ex : data) std::cout << to_json_line(ex) << '\n';
  } else {
    save_jsonl(a.out, data);
  }
  return 0;
}

int run_gradcheck(const GradArgs& a) {
  GradcheckProblem p = make_gradcheck_problem(a.seed, a.hidden);
  GradcheckOptions opts;
  opts.step = a.step;
  opts.tolerance = a.tolerance;
  const GradcheckReport r = gradcheck_model(p.model, p.example, opts);
  if (!a.report.empty()) write_file(a.report, r.to_json() + "\n");
  std::cout << r.table();
  std::printf("max relative error %.3e (tolerance %.1e) in %.2fs: %s\n", r.max_rel_error,
              r.tolerance, r.seconds, r.passed() ? "ok" : "FAILED");
  return r.passed() ? 0 : 1;
}

int run_convert_race(const RaceArgs& a) {
  LoadOptions lo;
  lo.max_seq_len = a.max_seq_len;
  std::vector<Example> out;
  for (const auto& path : a.inputs) {
    auto part = convert_race(read_file(path), lo);
    out.insert(out.end(), part.begin(), part.end());
  }
  save_jsonl(a.out, out);
  std::printf("%zu examples\n", out.size());
  return 0;
}

int run_encode(const EncodeArgs& a) {
  LoadedModel m = load_model(a.ckpt);
  if (m.config.model.encoder != EncoderKind::toy)
    throw Error("encode needs a checkpoint trained with the toy encoder");
  const auto data = load_jsonl(a.data, load_options(m.config));
  std::vector<std::pair<std::string, EncodedTriplet>> records;
  for (const auto& ex : data) {
    Graph g(m.config.precision, false);
    records.emplace_back(ex.id, to_triplet(m.model.encode(g, ex)));
  }
  save_precomputed(a.out, m.config.model.hidden, records);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual co-matching network for multi-choice reading comprehension"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint directory");
  train_cmd->add_option("--config", ta.config, "JSON training config");
  train_cmd->add_option("--data", ta.data, "Training JSONL")->required();
  train_cmd->add_option("--dev", ta.dev, "Dev JSONL used for best-epoch selection");
  train_cmd->add_option("--out", ta.out, "Checkpoint directory")->required();
  train_cmd->add_option("--encodings", ta.encodings, "Precomputed encoding file");
  train_cmd->add_option("--report", ta.report, "Write the training report as JSON");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--ckpt", ea.ckpt, "Checkpoint directory")->required();
  eval_cmd->add_option("--data", ea.data, "JSONL to evaluate")->required();
  eval_cmd->add_option("--encodings", ea.encodings, "Precomputed encoding file");
  eval_cmd->add_option("--predictions", ea.predictions, "Write per-example predictions (JSONL)");
  eval_cmd->add_option("--report", ea.report, "Write the report as JSON");

  SelectArgs sa;
  auto* select_cmd = app.add_subcommand("select", "Score and select passage sentences");
  select_cmd->add_option("--ckpt", sa.ckpt, "Checkpoint directory")->required();
  select_cmd->add_option("--data", sa.data, "JSONL input")->required();
  select_cmd->add_option("--top-k", sa.top_k, "Sentences to keep")->required();
  select_cmd->add_option("--method", sa.method, "cosine or bilinear");
  select_cmd->add_option("--encodings", sa.encodings, "Precomputed encoding file");
  select_cmd->add_option("--out", sa.out, "Output JSONL (default stdout)");

  AblateArgs aa;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train one model per matching combo");
  ablate_cmd->add_option("--config", aa.config, "JSON training config");
  ablate_cmd->add_option("--data", aa.data, "Training JSONL")->required();
  ablate_cmd->add_option("--dev", aa.dev, "Dev JSONL");
  ablate_cmd->add_option("--combos", aa.combos, "Comma-separated combos (default: all registered)");
  ablate_cmd->add_option("--report", aa.report, "Write rows as JSON");

  SweepArgs wa;
  auto* sweep_cmd = app.add_subcommand("sweep-topk", "Train once per selection size");
  sweep_cmd->add_option("--config", wa.config, "JSON training config");
  sweep_cmd->add_option("--data", wa.data, "Training JSONL")->required();
  sweep_cmd->add_option("--dev", wa.dev, "Dev JSONL");
  sweep_cmd->add_option("--k", wa.ks, "Comma-separated K values");
  sweep_cmd->add_option("--report", wa.report, "Write rows as JSON");

  GenArgs ga;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_cmd->add_option("--spec", ga.spec, "Generator spec JSON");
  gen_cmd->add_option("--out", ga.out, "Output JSONL (default stdout)");

  GradArgs da;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the full model");
  grad_cmd->add_option("--seed", da.seed, "Initialization seed");
  grad_cmd->add_option("--hidden", da.hidden, "Hidden size");
  grad_cmd->add_option("--step", da.step, "Central difference step");
  grad_cmd->add_option("--tolerance", da.tolerance, "Maximum relative error");
  grad_cmd->add_option("--report", da.report, "Write the report as JSON");

  RaceArgs ra;
  auto* race_cmd = app.add_subcommand("convert-race", "Convert RACE documents to JSONL");
  race_cmd->add_option("inputs", ra.inputs, "RACE JSON files")->required();
  race_cmd->add_option("--out", ra.out, "Output JSONL")->required();
  race_cmd->add_option("--max-seq-len", ra.max_seq_len, "Length budget");

  EncodeArgs na;
  auto* encode_cmd = app.add_subcommand("encode", "Write encoder outputs to an encoding file");
  encode_cmd->add_option("--ckpt", na.ckpt, "Checkpoint directory")->required();
  encode_cmd->add_option("--data", na.data, "JSONL input")->required();
  encode_cmd->add_option("--out", na.out, "Encoding file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return run_train(ta);
    if (*eval_cmd) return run_eval(ea);
    if (*select_cmd) return run_select(sa);
    if (*ablate_cmd) return run_ablate(aa);
    if (*sweep_cmd) return run_sweep(wa);
    if (*gen_cmd) return run_gen(ga);
    if (*grad_cmd) return run_gradcheck(da);
    if (*race_cmd) return run_convert_race(ra);
    if (*encode_cmd) return run_encode(na);
  } catch (const std::exception& e) {
    std::cerr << "dcmn: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
