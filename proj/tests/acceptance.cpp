// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <string>

#include <unistd.h>

#include "dcmn/gradcheck.hpp"
#include "dcmn/train.hpp"
#include "oracle_checks.hpp"
#include "properties.hpp"

using namespace dcmn;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > budget_s) {
    o.pass = false;
    o.detail += " [over time budget]";
  }
  if (!o.pass) ++failures;
  std::printf("[%s] %d %s: %s (%.1fs, budget %.0fs)\n", o.pass ? "PASS" : "FAIL", id, name,
              o.detail.c_str(), secs, budget_s);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::vector<Example> synthetic(std::size_t n, std::uint64_t seed) {
  SyntheticSpec s;
  s.n_examples = n;
  s.seed = seed;
  return gen_synthetic(s);
}

Outcome gradient_correctness() {
  GradcheckProblem p = make_gradcheck_problem();
  const GradcheckReport r = gradcheck_model(p.model, p.example);
  std::set<std::string> seen;
  for (const auto& c : r.params) seen.insert(c.name);
  bool covered = true;
  for (const char* n : {"emb", "W1", "W2", "W3", "W4", "W5", "W6", "W7", "W8", "b_oi", "V"})
    covered &= seen.count(n) > 0;
  for (const char* pair : {"pq", "po", "qo"}) {
    for (int k = 9; k <= 14; ++k) covered &= seen.count("W" + std::to_string(k) + "." + pair) > 0;
    covered &= seen.count(std::string("b_bm.") + pair) > 0;
  }
  return {r.passed() && covered,
          fmt("max rel err %.2e over %.0f tensors (need < 1e-3)", r.max_rel_error,
              static_cast<double>(r.params.size())) +
              (covered ? "" : " [parameter missing]")};
}

Outcome oracle_equivalence() {
  const double errs[] = {oracle_checks::cosine(100, 101), oracle_checks::bilinear(100, 102),
                         oracle_checks::pairwise(100, 103), oracle_checks::fuse(100, 104),
                         oracle_checks::match(100, 105), oracle_checks::classify_all(100, 106)};
  double worst = 0;
  for (double e : errs) worst = std::max(worst, e);
  return {worst <= 1e-10,
          fmt("max |diff| cosine %.1e bilinear %.1e pairwise %.1e fuse %.1e", errs[0], errs[1],
              errs[2], errs[3]) +
              fmt(" match %.1e classify %.1e (need <= 1e-10)", errs[4], errs[5])};
}

Outcome overfit() {
  const auto data = synthetic(32, 1);
  TrainConfig c;
  c.lr = 3e-3;
  c.epochs = 50;
  c.seed = 1;
  c.model.hidden = 32;
  c.model.num_options = 4;
  c.model.top_k = 2;
  c.model.selection = SelectionMethod::cosine;
  c.model.option_interaction = true;
  c.model.combo = "dcmn";
  TrainResult r = train(data, nullptr, c);
  return {r.report.accuracy == 1.0,
          fmt("train accuracy %.4f (best epoch %.0f of 50, need 1.0)", r.report.accuracy,
              static_cast<double>(r.report.best_epoch + 1))};
}

struct SweepRun {
  std::vector<SweepRow> rows;
  double oracle_recall = 0.0;
  double seconds = 0.0;
};

// Shared by the selection-efficacy and sweep-shape criteria.
const SweepRun& sweep_run() {
  static const SweepRun run = [] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto train_set = synthetic(512, 1);
    const auto dev = synthetic(512, 2);
    TrainConfig c;
    c.lr = 3e-3;
    c.epochs = 8;
    c.seed = 1;
    c.model.hidden = 64;
    c.model.selection = SelectionMethod::cosine;
    SweepRun r;
    r.rows = sweep_topk(train_set, dev, c, {2, 8});
    r.oracle_recall = testing_support::lexical_recall(dev, 2);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }();
  return run;
}

Outcome selection_efficacy() {
  const SweepRun& s = sweep_run();
  const SweepRow& k2 = s.rows.at(1);
  const double recall = k2.recall_at_k.value_or(0.0);
  const double random = 2.0 * 2.0 / 8.0;
  return {recall >= s.oracle_recall - 0.05 && recall > random,
          fmt("cosine recall@2 %.4f, lexical oracle %.4f (need >= oracle - 0.05), random %.2f", recall,
              s.oracle_recall, random)};
}

Outcome sweep_shape() {
  const SweepRun& s = sweep_run();
  const double base = s.rows.at(0).accuracy, k2 = s.rows.at(1).accuracy, kn = s.rows.at(2).accuracy;
  return {k2 >= base - 0.02 && kn == base,
          fmt("baseline %.4f, K=2 %.4f (need >= baseline - 0.02), K=8 %.4f (need == baseline)", base,
              k2, kn)};
}

Outcome ablation_fidelity() {
  const auto train_set = synthetic(64, 3);
  const auto dev = synthetic(64, 4);
  TrainConfig c;
  c.lr = 3e-3;
  c.epochs = 3;
  c.seed = 3;
  c.model.hidden = 16;
  std::vector<std::string> names;
  for (const auto& combo : registered_combos()) names.push_back(combo.name);

  // Identical seed: every combo starts from the same weights apart from V.
  bool same_init = true;
  DcmnModel ref = make_model(c, train_set);
  for (const auto& n : names) {
    TrainConfig cc = c;
    cc.model.combo = n;
    DcmnModel m = make_model(cc, train_set);
    for (const auto& p : ref.params().names())
      if (p != "V") same_init &= m.params().get(p) == ref.params().get(p);
  }

  const auto rows = ablate(train_set, dev, c, names);
  std::set<std::string> got;
  bool sane = true;
  double dcmn_acc = -1;
  for (const auto& r : rows) {
    got.insert(r.combo);
    sane &= r.dev_accuracy >= 0.0 && r.dev_accuracy <= 1.0 && r.width == parse_combo(r.combo).width(16);
    if (r.combo == "dcmn") dcmn_acc = r.dev_accuracy;
  }
  const bool named = got.count("hcm") && got.count("haf") && got.count("mmn") && got.count("dcmn");
  const bool repeat = ablate(train_set, dev, c, {"hcm", "dcmn"}).back().dev_accuracy == dcmn_acc;
  std::printf("%s", ablation_table(rows).c_str());
  return {rows.size() == names.size() && named && sane && same_init && repeat,
          fmt("%.0f rows for %.0f registered combos, dcmn dev accuracy %.4f", static_cast<double>(rows.size()),
              static_cast<double>(names.size()), dcmn_acc) +
              (same_init ? ", shared init" : ", INIT DIFFERS") + (repeat ? ", reproducible" : ", NOT REPRODUCIBLE")};
}

Outcome determinism() {
  const auto data = synthetic(48, 5);
  TrainConfig c;
  c.lr = 3e-3;
  c.epochs = 3;
  c.seed = 9;
  c.model.hidden = 16;
  c.model.top_k = 3;
  const auto a = train(data, nullptr, c);
  const auto b = train(data, nullptr, c);
  const bool same_predictions = a.report.predictions_jsonl() == b.report.predictions_jsonl();
  const bool same_curves = a.report.loss_curve == b.report.loss_curve;

  const auto dir = std::filesystem::temp_directory_path() / ("dcmn_accept_" + std::to_string(::getpid()));
  save_model(dir, a.model, c);
  LoadedModel m = load_model(dir);
  std::filesystem::remove_all(dir);
  DcmnModel original = a.model;
  const EvalReport before = evaluate(original, data, c.precision);
  const EvalReport after = evaluate(m.model, data, m.config.precision);
  bool logits_equal = before.predictions.size() == after.predictions.size();
  for (std::size_t i = 0; logits_equal && i < before.predictions.size(); ++i)
    logits_equal = before.predictions[i].logits == after.predictions[i].logits;
  return {same_predictions && same_curves && logits_equal,
          std::string("prediction files ") + (same_predictions ? "identical" : "DIFFER") +
              ", loss curves " + (same_curves ? "identical" : "DIFFER") + ", reloaded logits " +
              (logits_equal ? "bitwise equal" : "DIFFER")};
}

Outcome invariants() {
  const int softmax_bad = properties::softmax_normalization(500, 201);
  const int gate_bad = properties::gate_and_convexity(500, 202);
  const int topk_bad = properties::topk_nested(1000, 203);
  const int argmax_bad = properties::argmax_ties(1000, 204);
  std::string chance;
  bool chance_ok = true;
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    const auto r = properties::chance_accuracy(seed);
    chance_ok &= r.within;
    chance += fmt(" %.3f", r.accuracy);
  }
  const double sigma = std::sqrt(0.25 * 0.75 / 1024.0);
  return {softmax_bad + gate_bad + topk_bad + argmax_bad == 0 && chance_ok,
          fmt("violations: softmax %.0f, gate/convexity %.0f, top-K nesting %.0f, argmax ties %.0f", softmax_bad,
              gate_bad, topk_bad, argmax_bad) +
              "; random-parameter accuracy" + chance + fmt(" (need 0.25 +/- %.3f)", 3 * sigma)};
}

}  // namespace

int main() {
  criterion(1, "gradient correctness", 60, gradient_correctness);
  criterion(2, "equation-oracle equivalence", 30, oracle_equivalence);
  criterion(3, "overfit capacity", 300, overfit);
  criterion(4, "selection efficacy", 600, selection_efficacy);
  criterion(5, "top-K sweep shape", 600, sweep_shape);
  criterion(6, "ablation harness fidelity", 600, ablation_fidelity);
  criterion(7, "determinism and persistence", 120, determinism);
  criterion(8, "invariant suites", 120, invariants);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
