#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dcmn/data.hpp"
#include "dcmn/model.hpp"

namespace dcmn {

/// Training and model settings. Optimizer defaults are the usual BERT
/// fine-tuning values (lr 2e-5, 10 epochs, batch 8, dropout 0.1, max length 512); the
/// model half defaults to desk scale.
struct TrainConfig {
  double lr = 2e-5;
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  double dropout = 0.1;
  std::size_t max_seq_len = 512;
  std::uint64_t seed = 42;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Decoupled weight decay; parameters named b_* are exempt.
  double weight_decay = 0.01;
  /// Linear warmup over this fraction of steps, then linear decay. With
  /// `warmup` false the learning rate is constant.
  bool warmup = true;
  double warmup_proportion = 0.1;
  Precision precision = Precision::f32;
  /// Vocabulary cap (0 keeps every training token).
  std::size_t vocab_max = 0;
  ModelConfig model;

  void validate() const;
  static TrainConfig from_json(std::string_view json_text);
  std::string to_json() const;
};

struct Prediction {
  std::string id;
  std::size_t label = 0;
  std::size_t predicted = 0;
  std::vector<double> logits;
  std::vector<std::size_t> selected;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct EvalReport {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  double mean_loss = 0.0;
  std::vector<Prediction> predictions;
  /// Fraction of planted evidence sentences kept by selection; set only when
  /// selection is on and the data carries evidence labels.
  std::optional<double> recall_at_k;
  /// Mean training loss per epoch (empty for a plain evaluation).
  std::vector<double> loss_curve;
  /// Evaluation accuracy after each epoch (empty for a plain evaluation).
  std::vector<double> dev_curve;
  std::size_t best_epoch = 0;

  std::string to_json() const;
  /// One JSON object per line: id, label, predicted, logits, selected.
  std::string predictions_jsonl() const;
};

/// Adam with decoupled weight decay.
class AdamW {
 public:
  explicit AdamW(const TrainConfig& cfg) : cfg_(cfg) {}
  void step(ParamStore& params, double lr);
  std::size_t steps() const { return t_; }

 private:
  TrainConfig cfg_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

double learning_rate_at(const TrainConfig& cfg, std::size_t step, std::size_t total_steps);

/// Example order for one epoch; a pure function of (n, seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

/// Builds a fresh model from the config with a vocabulary over `train`.
DcmnModel make_model(const TrainConfig& cfg, const std::vector<Example>& train,
                     std::shared_ptr<const PrecomputedEncodings> encodings = nullptr);

struct TrainResult {
  DcmnModel model;
  EvalReport report;
};

/// Trains a fresh model. After every epoch the model is evaluated on `dev`
/// (or on `train` when dev is null); the best epoch's weights are kept, ties
/// going to the earlier epoch. The returned report evaluates those weights.
TrainResult train(const std::vector<Example>& train_set, const std::vector<Example>* dev,
                  const TrainConfig& cfg,
                  std::shared_ptr<const PrecomputedEncodings> encodings = nullptr,
                  std::ostream* log = nullptr);

/// Continues training an existing model for cfg.epochs epochs.
EvalReport fit(DcmnModel& model, const std::vector<Example>& train_set,
               const std::vector<Example>* dev, const TrainConfig& cfg, std::ostream* log = nullptr);

/// Dropout off; no gradients recorded.
EvalReport evaluate(DcmnModel& model, const std::vector<Example>& data, Precision precision);

/// Model directory layout: model.bin, vocab.txt, config.json.
void save_model(const std::filesystem::path& dir, const DcmnModel& model, const TrainConfig& cfg);
struct LoadedModel {
  TrainConfig config;
  DcmnModel model;
};
LoadedModel load_model(const std::filesystem::path& dir,
                       std::shared_ptr<const PrecomputedEncodings> encodings = nullptr);

struct AblationRow {
  std::string combo;
  std::string description;
  std::size_t width = 0;
  double train_accuracy = 0.0;
  double dev_accuracy = 0.0;
  double final_loss = 0.0;
};

/// Trains and evaluates every combo under the same seed and data order.
std::vector<AblationRow> ablate(const std::vector<Example>& train_set,
                                const std::vector<Example>& dev, const TrainConfig& cfg,
                                const std::vector<std::string>& combos, std::ostream* log = nullptr);

struct SweepRow {
  /// Empty for the no-selection baseline.
  std::optional<std::size_t> k;
  double accuracy = 0.0;
  std::optional<double> recall_at_k;
};

/// One run without selection, then one run per K.
std::vector<SweepRow> sweep_topk(const std::vector<Example>& train_set,
                                 const std::vector<Example>& dev, const TrainConfig& cfg,
                                 const std::vector<std::size_t>& ks, std::ostream* log = nullptr);

std::string ablation_json(const std::vector<AblationRow>& rows);
std::string ablation_table(const std::vector<AblationRow>& rows);
std::string sweep_json(const std::vector<SweepRow>& rows);
std::string sweep_table(const std::vector<SweepRow>& rows);

/// Left-aligned first column, right-aligned others, padded to the widest
/// cell.
std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows);

}  // namespace dcmn
