#include "tkre/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace tkre {

void TrainConfig::validate() const {
  if (lr < 0.0) throw ConfigError("learning rate must be non-negative");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (eval_every == 0) throw ConfigError("eval_every must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
}

ConfigMap TrainConfig::to_config() const {
  ConfigMap cfg;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", lr);
  cfg["train.lr"] = buf;
  cfg["train.batch_size"] = std::to_string(batch_size);
  cfg["train.epochs"] = std::to_string(epochs);
  cfg["train.seed"] = std::to_string(seed);
  cfg["train.eval_every"] = std::to_string(eval_every);
  std::snprintf(buf, sizeof(buf), "%.17g", weight_decay);
  cfg["train.weight_decay"] = buf;
  std::string excl;
  for (const std::size_t e : excluded_labels) {
    if (!excl.empty()) excl += ",";
    excl += std::to_string(e);
  }
  cfg["train.excluded_label_ids"] = excl;
  return cfg;
}

TrainConfig TrainConfig::from_config(const ConfigMap& cfg) {
  TrainConfig tc;
  tc.lr = cfg_get_double(cfg, "train.lr", tc.lr);
  tc.batch_size = cfg_get_u64(cfg, "train.batch_size", tc.batch_size);
  tc.epochs = cfg_get_u64(cfg, "train.epochs", tc.epochs);
  tc.seed = cfg_get_u64(cfg, "train.seed", tc.seed);
  tc.eval_every = cfg_get_u64(cfg, "train.eval_every", tc.eval_every);
  tc.weight_decay = cfg_get_double(cfg, "train.weight_decay", tc.weight_decay);
  for (const std::string& s : split_csv_list(cfg_get(cfg, "train.excluded_label_ids", ""))) {
    tc.excluded_labels.push_back(std::stoull(s));
  }
  return tc;
}

// ---------------------------------------------------------------------------
// InstanceStore
// ---------------------------------------------------------------------------

InstanceStore InstanceStore::build(const Dataset& dataset, std::size_t window_size) {
  // Vocabulary comes from the training split's documents only; everything
  // else maps through the OOV id.
  std::set<std::string> train_docs;
  for (const PairExample& p : dataset.pairs) {
    if (p.split == Split::Train) train_docs.insert(p.doc_id);
  }
  std::vector<std::string> chunks;
  for (const std::string& doc_id : train_docs) {
    for (const Token& t : dataset.document(doc_id).tokens) {
      for (std::string& c : chunk_word(t.surface)) chunks.push_back(std::move(c));
    }
  }
  return build_with_vocab(dataset, window_size, Vocabulary::build(chunks));
}

InstanceStore InstanceStore::build_with_vocab(const Dataset& dataset, std::size_t window_size,
                                              const Vocabulary& vocab) {
  InstanceStore store;
  store.vocab = vocab;
  store.window_size = window_size;
  for (std::size_t i = 0; i < dataset.pairs.size(); ++i) {
    const PairExample& p = dataset.pairs[i];
    Instance inst = make_instance(build_window_words(dataset.document(p.doc_id), p, window_size),
                                  store.vocab, p.label, p.doc_id, i);
    switch (p.split) {
      case Split::Train: store.train.push_back(std::move(inst)); break;
      case Split::Validation: store.validation.push_back(std::move(inst)); break;
      case Split::Test: store.test.push_back(std::move(inst)); break;
    }
  }
  return store;
}

const std::vector<Instance>& InstanceStore::split(Split s) const {
  switch (s) {
    case Split::Train: return train;
    case Split::Validation: return validation;
    case Split::Test: return test;
  }
  throw ConfigError("bad split");
}

std::size_t InstanceStore::max_window_words() const {
  std::size_t m = 0;
  for (const auto* v : {&train, &validation, &test}) {
    for (const Instance& inst : *v) m = std::max(m, inst.word_count());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

struct Snapshot {
  std::vector<std::vector<double>> values;

  static Snapshot take(const ParameterSet& params) {
    Snapshot s;
    for (const std::string& name : params.names()) s.values.push_back(params.at(name).data());
    return s;
  }

  void restore(ParameterSet& params) const {
    std::size_t i = 0;
    for (const std::string& name : params.names()) {
      params.at(name).mutable_data() = values[i++];
    }
  }
};

}  // namespace

TrainResult train_model(Model& model, const InstanceStore& store, const TrainConfig& cfg) {
  cfg.validate();
  if (store.train.empty()) throw DataError("training split is empty");
  const std::size_t n = store.train.size();
  const std::size_t batch_size = std::min(cfg.batch_size, n);

  AdamWConfig ocfg;
  ocfg.lr = cfg.lr;
  ocfg.beta1 = cfg.beta1;
  ocfg.beta2 = cfg.beta2;
  ocfg.eps = cfg.eps;
  ocfg.weight_decay = cfg.weight_decay;
  AdamW optimizer(ocfg);

  Rng rng(Rng::derive(cfg.seed, "train-loop"));
  TrainResult result;
  Snapshot best;
  bool have_best = false;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t pos = 0;
    std::size_t step_in_epoch = 0;
    while (pos < n) {
      const std::size_t take = std::min(batch_size, n - pos);
      Tensor acc;
      for (std::size_t b = 0; b < take; ++b) {
        const Instance& inst = store.train[order[pos + b]];
        Tensor loss = model.forward(inst, Mode::Train, &rng).loss;
        acc = acc.defined() ? add(acc, loss) : loss;
      }
      const Tensor batch_loss = scale(acc, 1.0 / static_cast<double>(take));
      const double lv = batch_loss.value();
      if (!std::isfinite(lv)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(step_in_epoch + 1));
      }
      loss_sum += lv * static_cast<double>(take);
      backward(batch_loss);
      optimizer.step(model.params());
      pos += take;
      step_in_epoch += 1;
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(n);
    const bool eval_now = (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) &&
                          !store.validation.empty();
    if (eval_now) {
      const Metrics vm = evaluate(model, store.validation, cfg.excluded_labels);
      log.val_f1 = vm.micro_f1;
      log.evaluated = true;
      if (!have_best || vm.micro_f1 > result.best_val_f1) {
        have_best = true;
        result.best_val_f1 = vm.micro_f1;
        result.best_val_metrics = vm;
        result.best_epoch = epoch;
        best = Snapshot::take(model.params());
      }
    }
    result.curve.push_back(log);
  }

  if (have_best) best.restore(model.params());
  result.steps = optimizer.step_count();
  return result;
}

Metrics evaluate(const Model& model, const std::vector<Instance>& instances,
                 const std::vector<std::size_t>& excluded_labels) {
  std::vector<std::size_t> gold, pred;
  gold.reserve(instances.size());
  pred.reserve(instances.size());
  for (const Instance& inst : instances) {
    gold.push_back(inst.label);
    pred.push_back(model.run(inst).predicted_label());
  }
  return compute_metrics(gold, pred, model.config().n_labels, excluded_labels);
}

std::vector<Prediction> predict(const Model& model, const std::vector<Instance>& instances) {
  std::vector<Prediction> out;
  out.reserve(instances.size());
  for (const Instance& inst : instances) {
    Prediction p;
    p.trace = model.run(inst);
    p.label = p.trace.predicted_label();
    p.pair_index = inst.pair_index;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<SweepRow> sweep_k(const ModelConfig& base, const InstanceStore& store,
                              const std::vector<std::size_t>& k_values,
                              const TrainConfig& cfg) {
  if (k_values.empty()) throw ConfigError("sweep needs at least one K value");
  std::set<std::size_t> seen;
  for (const std::size_t k : k_values) {
    if (k < 1) throw ConfigError("sweep K values must be >= 1");
    if (!seen.insert(k).second) {
      throw ConfigError("duplicate K value " + std::to_string(k) + " in sweep");
    }
  }
  std::vector<SweepRow> rows;
  for (const std::size_t k : k_values) {
    ModelConfig mc = base;
    mc.top_k = k;
    Model model(mc);
    train_model(model, store, cfg);
    const Metrics m = evaluate(model, store.test, cfg.excluded_labels);
    rows.push_back(SweepRow{k, m.precision, m.recall, m.micro_f1});
  }
  return rows;
}

namespace {

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

void write_curve_csv(const std::string& path, const std::vector<EpochLog>& curve) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write curve csv: " + path);
  os << "epoch,train_loss,val_f1\n";
  for (const EpochLog& e : curve) {
    os << e.epoch << "," << fmt_g(e.train_loss) << ","
       << (e.evaluated ? fmt_g(e.val_f1) : std::string("nan")) << "\n";
  }
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write sweep csv: " + path);
  os << "k,precision,recall,micro_f1\n";
  for (const SweepRow& r : rows) {
    os << r.k << "," << fmt_g(r.precision) << "," << fmt_g(r.recall) << ","
       << fmt_g(r.micro_f1) << "\n";
  }
}

}  // namespace tkre
