#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tkre/config.hpp"
#include "tkre/corpus.hpp"
#include "tkre/metrics.hpp"
#include "tkre/model.hpp"
#include "tkre/optim.hpp"

namespace tkre {

struct TrainConfig {
  double lr = 1e-5;
  std::size_t batch_size = 128;  // clamped to the training-set size
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  std::size_t eval_every = 1;  // epochs between validation passes
  std::vector<std::size_t> excluded_labels;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
  ConfigMap to_config() const;
  static TrainConfig from_config(const ConfigMap& cfg);
};

// Pre-tokenized instances per split sharing one vocabulary built from the
// training split's documents.
struct InstanceStore {
  Vocabulary vocab;
  std::size_t window_size = 64;
  std::vector<Instance> train;
  std::vector<Instance> validation;
  std::vector<Instance> test;

  static InstanceStore build(const Dataset& dataset, std::size_t window_size);
  static InstanceStore build_with_vocab(const Dataset& dataset, std::size_t window_size,
                                        const Vocabulary& vocab);
  const std::vector<Instance>& split(Split s) const;
  std::size_t max_window_words() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_f1 = 0.0;
  bool evaluated = false;
};

struct TrainResult {
  std::vector<EpochLog> curve;
  std::size_t best_epoch = 0;  // 1-based; 0 when no validation ran
  double best_val_f1 = 0.0;
  Metrics best_val_metrics;
  std::uint64_t steps = 0;
};

// Mini-batch AdamW training with seed-deterministic shuffling. Gradients are
// averaged over the batch. The best-validation parameters (ties to the
// earlier epoch) are restored into the model before returning.
TrainResult train_model(Model& model, const InstanceStore& store, const TrainConfig& cfg);

Metrics evaluate(const Model& model, const std::vector<Instance>& instances,
                 const std::vector<std::size_t>& excluded_labels);

struct Prediction {
  std::size_t label = 0;
  ForwardTrace trace;
  std::size_t pair_index = 0;
};

std::vector<Prediction> predict(const Model& model, const std::vector<Instance>& instances);

struct SweepRow {
  std::size_t k = 0;
  double precision = 0.0;
  double recall = 0.0;
  double micro_f1 = 0.0;
};

// Trains one fresh model per K (identical seed and data order) and evaluates
// on the test split. Duplicate or zero K values are rejected.
std::vector<SweepRow> sweep_k(const ModelConfig& base, const InstanceStore& store,
                              const std::vector<std::size_t>& k_values,
                              const TrainConfig& cfg);

void write_curve_csv(const std::string& path, const std::vector<EpochLog>& curve);
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

}  // namespace tkre
