#include "dcmn/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dcmn {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw Error("config: lr must be non-negative");
  if (epochs == 0) throw Error("config: epochs must be positive");
  if (batch_size == 0) throw Error("config: batch_size must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("config: dropout must be in [0, 1)");
  if (max_seq_len == 0) throw Error("config: max_seq_len must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw Error("config: adam betas must be in [0, 1)");
  if (!(eps > 0.0)) throw Error("config: eps must be positive");
  if (!(weight_decay >= 0.0)) throw Error("config: weight_decay must be non-negative");
  if (!(warmup_proportion >= 0.0 && warmup_proportion < 1.0))
    throw Error("config: warmup_proportion must be in [0, 1)");
  if (model.hidden == 0) throw Error("config: hidden must be positive");
  if (model.num_options < 2) throw Error("config: num_options must be at least 2");
  parse_combo(model.combo);
}

TrainConfig TrainConfig::from_json(std::string_view json_text) {
  TrainConfig c;
  try {
    const json j = json::parse(json_text);
    if (!j.is_object()) throw Error("config: expected a JSON object");
    static const std::set<std::string> known = {
        "lr", "epochs", "batch_size", "dropout", "max_seq_len", "seed", "beta1", "beta2", "eps",
        "weight_decay", "warmup", "warmup_proportion", "precision", "vocab_max", "hidden",
        "num_options", "top_k", "selection", "combo", "option_interaction", "literal_fusion",
        "encoder"};
    for (const auto& [key, _] : j.items())
      if (!known.count(key)) throw Error("config: unknown key '" + key + "'");
    c.lr = j.value("lr", c.lr);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.dropout = j.value("dropout", c.dropout);
    c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
    c.seed = j.value("seed", c.seed);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.warmup = j.value("warmup", c.warmup);
    c.warmup_proportion = j.value("warmup_proportion", c.warmup_proportion);
    const std::string prec = j.value("precision", std::string("f32"));
    if (prec != "f32" && prec != "f64") throw Error("config: precision must be f32 or f64");
    c.precision = prec == "f32" ? Precision::f32 : Precision::f64;
    c.vocab_max = j.value("vocab_max", c.vocab_max);
    c.model.hidden = j.value("hidden", c.model.hidden);
    c.model.num_options = j.value("num_options", c.model.num_options);
    c.model.top_k = j.value("top_k", c.model.top_k);
    c.model.selection = parse_selection_method(j.value("selection", std::string("cosine")));
    c.model.combo = j.value("combo", c.model.combo);
    c.model.option_interaction = j.value("option_interaction", c.model.option_interaction);
    c.model.literal_fusion = j.value("literal_fusion", c.model.literal_fusion);
    const std::string enc = j.value("encoder", std::string("toy"));
    if (enc != "toy" && enc != "precomputed") throw Error("config: encoder must be toy or precomputed");
    c.model.encoder = enc == "toy" ? EncoderKind::toy : EncoderKind::precomputed;
  } catch (const json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string TrainConfig::to_json() const {
  json j{{"lr", lr},
         {"epochs", epochs},
         {"batch_size", batch_size},
         {"dropout", dropout},
         {"max_seq_len", max_seq_len},
         {"seed", seed},
         {"beta1", beta1},
         {"beta2", beta2},
         {"eps", eps},
         {"weight_decay", weight_decay},
         {"warmup", warmup},
         {"warmup_proportion", warmup_proportion},
         {"precision", precision == Precision::f32 ? "f32" : "f64"},
         {"vocab_max", vocab_max},
         {"hidden", model.hidden},
         {"num_options", model.num_options},
         {"top_k", model.top_k},
         {"selection", to_string(model.selection)},
         {"combo", model.combo},
         {"option_interaction", model.option_interaction},
         {"literal_fusion", model.literal_fusion},
         {"encoder", model.encoder == EncoderKind::toy ? "toy" : "precomputed"}};
  return j.dump(2);
}

std::string EvalReport::to_json() const {
  json j{{"accuracy", accuracy},  {"correct", correct},       {"total", total},
         {"mean_loss", mean_loss}, {"loss_curve", loss_curve}, {"dev_curve", dev_curve},
         {"best_epoch", best_epoch}};
  j["recall_at_k"] = recall_at_k ? json(*recall_at_k) : json(nullptr);
  return j.dump(2);
}

std::string EvalReport::predictions_jsonl() const {
  std::string out;
  for (const auto& p : predictions) {
    json j{{"id", p.id},
           {"label", p.label},
           {"predicted", p.predicted},
           {"logits", p.logits},
           {"selected", p.selected}};
    out += j.dump() + "\n";
  }
  return out;
}

void AdamW::step(ParamStore& params, double lr) {
  if (m_.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_.emplace_back(params.at(i).size(), 0.0);
      v_.emplace_back(params.at(i).size(), 0.0);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params.at(i);
    const bool decay = !params.name(i).starts_with("b_");
    auto g = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      double update = (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg_.eps);
      if (decay) update += cfg_.weight_decay * p[k];
      p[k] -= lr * update;
    }
  }
  params.round(cfg_.precision);
}

double learning_rate_at(const TrainConfig& cfg, std::size_t step, std::size_t total_steps) {
  if (!cfg.warmup || total_steps == 0) return cfg.lr;
  const auto warm = static_cast<std::size_t>(
      std::ceil(cfg.warmup_proportion * static_cast<double>(total_steps)));
  if (step < warm) return cfg.lr * static_cast<double>(step + 1) / static_cast<double>(warm);
  if (warm >= total_steps) return cfg.lr;
  return cfg.lr * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - warm);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

DcmnModel make_model(const TrainConfig& cfg, const std::vector<Example>& train,
                     std::shared_ptr<const PrecomputedEncodings> encodings) {
  cfg.validate();
  DcmnModel model(cfg.model, Vocab::build(train, cfg.vocab_max), cfg.seed);
  model.params().round(cfg.precision);
  if (cfg.model.encoder == EncoderKind::precomputed) model.set_encodings(std::move(encodings));
  return model;
}

namespace {

std::mt19937_64 dropout_rng(std::uint64_t seed, std::size_t epoch, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(index), 0xd70bu};
  return std::mt19937_64(seq);
}

void check_options(const DcmnModel& model, const std::vector<Example>& data) {
  for (const auto& ex : data)
    if (ex.num_options() != model.config().num_options)
      throw DataError("example '" + ex.id + "' has " + std::to_string(ex.num_options()) +
                      " options, model expects " + std::to_string(model.config().num_options));
}

std::string fmt_acc(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

EvalReport evaluate(DcmnModel& model, const std::vector<Example>& data, Precision precision) {
  check_options(model, data);
  EvalReport r;
  std::size_t evidence_total = 0, evidence_hit = 0;
  double loss_sum = 0.0;
  for (const auto& ex : data) {
    Graph g(precision, false);
    ForwardResult f = model.forward(g, ex);
    Prediction p;
    p.id = ex.id;
    p.label = ex.label;
    p.predicted = f.match.predicted;
    const auto z = f.match.logits.value().data();
    p.logits.assign(z.begin(), z.end());
    if (f.selection) {
      p.selected = f.selection->selected;
      for (auto e : ex.evidence) {
        ++evidence_total;
        if (std::binary_search(p.selected.begin(), p.selected.end(), e)) ++evidence_hit;
      }
    }
    loss_sum += f.match.loss.value()[0];
    if (p.predicted == p.label) ++r.correct;
    r.predictions.push_back(std::move(p));
  }
  r.total = data.size();
  r.accuracy = r.total ? static_cast<double>(r.correct) / static_cast<double>(r.total) : 0.0;
  r.mean_loss = r.total ? loss_sum / static_cast<double>(r.total) : 0.0;
  if (evidence_total > 0)
    r.recall_at_k = static_cast<double>(evidence_hit) / static_cast<double>(evidence_total);
  return r;
}

EvalReport fit(DcmnModel& model, const std::vector<Example>& train_set,
               const std::vector<Example>* dev, const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  check_options(model, train_set);
  const std::vector<Example>& held_out = dev ? *dev : train_set;
  const std::size_t n = train_set.size();
  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = batches * cfg.epochs;

  AdamW opt(cfg);
  ParamStore& params = model.params();
  ParamStore best = params;
  double best_acc = -1.0;
  std::vector<double> loss_curve, dev_curve;
  std::size_t best_epoch = 0;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(n, cfg.seed, epoch);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * cfg.batch_size;
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      const double weight = 1.0 / static_cast<double>(end - begin);
      params.zero_grad();
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t idx = order[i];
        Graph g(cfg.precision);
        auto rng = dropout_rng(cfg.seed, epoch, idx);
        ForwardResult f = model.forward(g, train_set[idx], {cfg.dropout, &rng});
        const double loss = f.match.loss.value()[0];
        // NaN can hide behind max/relu and still yield a finite loss.
        if (auto where = g.first_non_finite(); where || !std::isfinite(loss))
          throw NumericalError("non-finite value on example '" + train_set[idx].id +
                               "' at epoch " + std::to_string(epoch) +
                               "; first non-finite tensor: " + where.value_or("loss"));
        loss_sum += loss;
        g.backward(scale(f.match.loss, weight));
      }
      for (std::size_t p = 0; p < params.size(); ++p)
        for (double gv : params.at(p).grad())
          if (!std::isfinite(gv))
            throw NumericalError("non-finite gradient for parameter " + params.name(p) +
                                 " at epoch " + std::to_string(epoch));
      opt.step(params, learning_rate_at(cfg, step++, total_steps));
    }
    loss_curve.push_back(loss_sum / static_cast<double>(n));
    const double acc = evaluate(model, held_out, cfg.precision).accuracy;
    dev_curve.push_back(acc);
    if (acc > best_acc) {
      best_acc = acc;
      best = params;
      best_epoch = epoch;
    }
    if (log)
      *log << "epoch " << epoch + 1 << "/" << cfg.epochs << "  loss " << loss_curve.back()
           << "  " << (dev ? "dev" : "train") << "_acc " << fmt_acc(acc) << '\n';
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto src = best.at(p).data();
    std::copy(src.begin(), src.end(), params.at(p).data().begin());
  }
  params.zero_grad();
  EvalReport report = evaluate(model, held_out, cfg.precision);
  report.loss_curve = std::move(loss_curve);
  report.dev_curve = std::move(dev_curve);
  report.best_epoch = best_epoch;
  return report;
}

TrainResult train(const std::vector<Example>& train_set, const std::vector<Example>* dev,
                  const TrainConfig& cfg, std::shared_ptr<const PrecomputedEncodings> encodings,
                  std::ostream* log) {
  if (train_set.empty()) throw DataError("training set is empty");
  DcmnModel model = make_model(cfg, train_set, std::move(encodings));
  EvalReport report = fit(model, train_set, dev, cfg, log);
  return {std::move(model), std::move(report)};
}

void save_model(const std::filesystem::path& dir, const DcmnModel& model, const TrainConfig& cfg) {
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "model.bin", model.params());
  model.vocab().save(dir / "vocab.txt");
  TrainConfig stored = cfg;
  stored.model = model.config();
  std::ofstream(dir / "config.json") << stored.to_json() << '\n';
}

LoadedModel load_model(const std::filesystem::path& dir,
                       std::shared_ptr<const PrecomputedEncodings> encodings) {
  std::ifstream in(dir / "config.json");
  if (!in) throw FormatError("no config.json in " + dir.string());
  std::stringstream ss;
  ss << in.rdbuf();
  TrainConfig cfg = TrainConfig::from_json(ss.str());
  DcmnModel model(cfg.model, Vocab::load(dir / "vocab.txt"), cfg.seed);
  load_checkpoint(dir / "model.bin", model.params());
  if (cfg.model.encoder == EncoderKind::precomputed) model.set_encodings(std::move(encodings));
  return {std::move(cfg), std::move(model)};
}

std::vector<AblationRow> ablate(const std::vector<Example>& train_set,
                                const std::vector<Example>& dev, const TrainConfig& cfg,
                                const std::vector<std::string>& combos, std::ostream* log) {
  for (const auto& c : combos) parse_combo(c);
  std::vector<AblationRow> rows;
  for (const auto& name : combos) {
    TrainConfig c = cfg;
    c.model.combo = name;
    if (log) *log << "== combo " << name << '\n';
    TrainResult r = train(train_set, &dev, c, nullptr, log);
    AblationRow row;
    row.combo = name;
    row.description = r.model.combo().describe();
    row.width = r.model.combo().width(c.model.hidden);
    row.dev_accuracy = r.report.accuracy;
    row.train_accuracy = evaluate(r.model, train_set, c.precision).accuracy;
    row.final_loss = r.report.loss_curve.empty() ? 0.0 : r.report.loss_curve.back();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SweepRow> sweep_topk(const std::vector<Example>& train_set,
                                 const std::vector<Example>& dev, const TrainConfig& cfg,
                                 const std::vector<std::size_t>& ks, std::ostream* log) {
  if (ks.empty()) throw Error("sweep needs at least one K");
  for (auto k : ks)
    if (k == 0) throw Error("sweep values of K must be positive");
  std::vector<SweepRow> rows;
  auto run = [&](std::optional<std::size_t> k) {
    TrainConfig c = cfg;
    c.model.top_k = k.value_or(0);
    if (log) *log << "== top_k " << (k ? std::to_string(*k) : std::string("none")) << '\n';
    TrainResult r = train(train_set, &dev, c, nullptr, log);
    rows.push_back({k, r.report.accuracy, r.report.recall_at_k});
  };
  run(std::nullopt);
  for (auto k : ks) run(k);
  return rows;
}

std::string ablation_json(const std::vector<AblationRow>& rows) {
  json j = json::array();
  for (const auto& r : rows)
    j.push_back({{"combo", r.combo},
                 {"description", r.description},
                 {"width", r.width},
                 {"train_accuracy", r.train_accuracy},
                 {"dev_accuracy", r.dev_accuracy},
                 {"final_loss", r.final_loss}});
  return j.dump(2);
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows)
    cells.push_back({r.combo, r.description, std::to_string(r.width), fmt_acc(r.train_accuracy),
                     fmt_acc(r.dev_accuracy)});
  return format_table({"combo", "terms", "width", "train_acc", "dev_acc"}, cells);
}

std::string sweep_json(const std::vector<SweepRow>& rows) {
  json j = json::array();
  for (const auto& r : rows)
    j.push_back({{"k", r.k ? json(*r.k) : json(nullptr)},
                 {"accuracy", r.accuracy},
                 {"recall_at_k", r.recall_at_k ? json(*r.recall_at_k) : json(nullptr)}});
  return j.dump(2);
}

std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows)
    cells.push_back({r.k ? std::to_string(*r.k) : std::string("none"), fmt_acc(r.accuracy),
                     r.recall_at_k ? fmt_acc(*r.recall_at_k) : std::string("-")});
  return format_table({"top_k", "accuracy", "recall@k"}, cells);
}

std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size(), 0);
  auto measure = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c)
      width[c] = std::max(width[c], r[c].size());
  };
  measure(header);
  for (const auto& r : rows) measure(r);
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string cell = c < r.size() ? r[c] : "";
      if (c) out << "  ";
      const std::string pad(width[c] - cell.size(), ' ');
      out << (c == 0 ? cell + pad : pad + cell);
    }
    out << '\n';
  };
  emit(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& r : rows) emit(r);
  return out.str();
}

}  // namespace dcmn
