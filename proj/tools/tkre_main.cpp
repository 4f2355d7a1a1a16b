// tkre: temporal relation extraction with pair-conditioned top-K evidence.
//
// Subcommands: synth, train, eval, sweep-k, analyze, stats. Every command
// resolves its configuration as defaults < --config file < explicit flags,
// archives the result to <out>/config.txt, and writes only inside --out.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tkre/config.hpp"
#include "tkre/corpus.hpp"
#include "tkre/errors.hpp"
#include "tkre/evidence.hpp"
#include "tkre/metrics.hpp"
#include "tkre/model.hpp"
#include "tkre/synthetic.hpp"
#include "tkre/train.hpp"

namespace fs = std::filesystem;
using namespace tkre;

namespace {

struct CommonArgs {
  std::string out;
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--out", args.out, "Output directory (created if missing)")->required();
  cmd->add_option("--config", args.config_path, "key=value config file; flags override it");
  cmd->add_option("--seed", args.seed, "Run seed");
}

ConfigMap load_base_config(const CommonArgs& args) {
  if (args.config_path.empty()) return {};
  return load_config_file(args.config_path);
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out + "': " + ec.message());
  return dir;
}

void archive_config(const fs::path& out_dir, const ConfigMap& resolved) {
  write_config_file((out_dir / "config.txt").string(), resolved);
}

LabelSet labels_from_string(const std::string& spec) {
  if (spec.rfind("custom:", 0) == 0) {
    return LabelSet::custom(split_csv_list(spec.substr(7)));
  }
  return LabelSet::preset(spec);
}

std::vector<std::size_t> excluded_ids(const LabelSet& labels, const std::string& spec) {
  if (spec == "none" || spec.empty()) return {};
  std::vector<std::size_t> ids;
  for (const std::string& name : split_csv_list(spec)) {
    const auto id = labels.find(name);
    if (!id) {
      throw ConfigError("excluded label '" + name + "' is not in the label set");
    }
    ids.push_back(*id);
  }
  return ids;
}

std::string default_exclusions(const LabelSet& labels) {
  return labels.has("v") ? "v" : "none";
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (const std::string& n : names) {
    if (!out.empty()) out += ",";
    out += n;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared model/train flag plumbing
// ---------------------------------------------------------------------------

struct ModelTrainFlags {
  ModelConfig model;
  TrainConfig train;
  std::size_t window_size = 64;
  std::string labels = "tbd";
  std::string exclude;
  std::set<std::string> set_keys;  // flags the user actually passed
};

void add_model_train_flags(CLI::App* cmd, ModelTrainFlags& f) {
  auto track = [&f](const std::string& key) {
    return [&f, key](const std::string&) { f.set_keys.insert(key); };
  };
  cmd->add_option("--d-model", f.model.d_model)->each(track("model.d_model"));
  cmd->add_option("--heads", f.model.n_heads)->each(track("model.n_heads"));
  cmd->add_option("--layers", f.model.encoder_layers)->each(track("model.encoder_layers"));
  cmd->add_option("--ffn", f.model.ffn_hidden)->each(track("model.ffn_hidden"));
  cmd->add_option("--dropout", f.model.dropout)->each(track("model.dropout"));
  cmd->add_option("--top-k", f.model.top_k)->each(track("model.top_k"));
  cmd->add_option("--max-words", f.model.max_words)->each(track("model.max_words"));
  cmd->add_option("--lr", f.train.lr)->each(track("train.lr"));
  cmd->add_option("--batch-size", f.train.batch_size)->each(track("train.batch_size"));
  cmd->add_option("--epochs", f.train.epochs)->each(track("train.epochs"));
  cmd->add_option("--eval-every", f.train.eval_every)->each(track("train.eval_every"));
  cmd->add_option("--weight-decay", f.train.weight_decay)->each(track("train.weight_decay"));
  cmd->add_option("--window-size", f.window_size)->each(track("data.window_size"));
  cmd->add_option("--labels", f.labels)->each(track("data.labels"));
  cmd->add_option("--exclude-labels", f.exclude)->each(track("data.exclude_labels"));
}

// Fold file config and flags into one resolved map (flags win).
void merge_model_train(ConfigMap& resolved, const ModelTrainFlags& f) {
  const ConfigMap mc = f.model.to_config();
  const ConfigMap tc = f.train.to_config();
  auto put = [&](const std::string& key, const std::string& value) {
    if (f.set_keys.count(key) || resolved.find(key) == resolved.end()) {
      resolved[key] = value;
    }
  };
  for (const auto& [k, v] : mc) put(k, v);
  for (const auto& [k, v] : tc) put(k, v);
  put("data.window_size", std::to_string(f.window_size));
  put("data.labels", f.labels);
  put("data.exclude_labels", f.exclude);
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int cmd_synth(const CommonArgs& common, const std::vector<std::pair<std::string, std::string>>&
                                            overrides) {
  ConfigMap cfg = load_base_config(common);
  for (const auto& [k, v] : overrides) cfg[k] = v;
  if (common.seed_set) cfg["seed"] = std::to_string(common.seed);
  const SyntheticSpec spec = SyntheticSpec::from_config(cfg);

  const fs::path out_dir = prepare_out_dir(common.out);
  const SyntheticCorpus corpus = generate_synthetic_corpus(spec);
  write_pairs_jsonl(corpus.dataset, (out_dir / "pairs.jsonl").string());
  write_annotations_tsv(corpus.dataset, (out_dir / "annotations.tsv").string());
  write_gold_evidence(corpus.gold, (out_dir / "gold_evidence.jsonl").string());
  archive_config(out_dir, spec.to_config());

  std::cout << "wrote " << corpus.dataset.pairs.size() << " pairs over "
            << corpus.dataset.documents.size() << " documents ("
            << corpus.dataset.split_count(Split::Train) << "/"
            << corpus.dataset.split_count(Split::Validation) << "/"
            << corpus.dataset.split_count(Split::Test) << " train/validation/test)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

std::map<std::string, std::string> checkpoint_meta(const InstanceStore& store,
                                                   const LabelSet& labels) {
  std::map<std::string, std::string> meta;
  meta["vocab"] = store.vocab.serialize();
  meta["labels"] = join_names(labels.names());
  meta["labels_preset"] = labels.preset_name();
  meta["window_size"] = std::to_string(store.window_size);
  return meta;
}

int cmd_train(const CommonArgs& common, const std::string& pairs_path, ModelTrainFlags& f) {
  ConfigMap resolved = load_base_config(common);
  merge_model_train(resolved, f);
  resolved["data.pairs"] = pairs_path;
  if (common.seed_set || resolved.find("seed") == resolved.end()) {
    resolved["seed"] = std::to_string(common.seed);
  }
  const std::uint64_t seed = cfg_get_u64(resolved, "seed", 0);

  const LabelSet labels = labels_from_string(cfg_get(resolved, "data.labels", "tbd"));
  if (resolved.find("data.exclude_labels") == resolved.end() ||
      resolved["data.exclude_labels"].empty()) {
    resolved["data.exclude_labels"] = default_exclusions(labels);
  }
  const Dataset dataset = load_pair_dataset(pairs_path, labels);
  const std::size_t ws = cfg_get_u64(resolved, "data.window_size", 64);
  const InstanceStore store = InstanceStore::build(dataset, ws);
  if (store.train.empty()) throw DataError("training split is empty: " + pairs_path);

  ModelConfig mc = ModelConfig::from_config(resolved);
  mc.n_labels = labels.size();
  mc.vocab_size = store.vocab.size();
  mc.seed = seed;
  if (f.set_keys.count("model.max_words") == 0 && resolved.find("model.max_words") == resolved.end()) {
    mc.max_words = std::max<std::size_t>(store.max_window_words(), 1);
  } else {
    mc.max_words = cfg_get_u64(resolved, "model.max_words", mc.max_words);
  }
  mc.validate();

  TrainConfig tc = TrainConfig::from_config(resolved);
  tc.seed = seed;
  tc.excluded_labels = excluded_ids(labels, cfg_get(resolved, "data.exclude_labels", "none"));

  for (const auto& [k, v] : mc.to_config()) resolved[k] = v;
  for (const auto& [k, v] : tc.to_config()) resolved[k] = v;
  const fs::path out_dir = prepare_out_dir(common.out);
  archive_config(out_dir, resolved);

  Model model(mc);
  std::cout << "training: " << store.train.size() << " train / " << store.validation.size()
            << " validation instances, " << model.params().total_scalars() << " parameters\n";
  const TrainResult result = train_model(model, store, tc);
  model.save((out_dir / "model.ckpt").string(), result.steps, checkpoint_meta(store, labels));
  write_curve_csv((out_dir / "curve.csv").string(), result.curve);

  const std::vector<Instance>& metric_split =
      store.validation.empty() ? store.train : store.validation;
  const Metrics metrics = evaluate(model, metric_split, tc.excluded_labels);
  write_metrics_json((out_dir / "metrics.json").string(), metrics);

  std::cout << "best epoch " << result.best_epoch << ", "
            << (store.validation.empty() ? "train" : "validation")
            << " micro-F1 " << metrics.micro_f1 << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct LoadedRun {
  Model model;
  LabelSet labels;
  Vocabulary vocab;
  std::size_t window_size;
};

LoadedRun load_run(const std::string& checkpoint_path) {
  Checkpoint ckpt;
  Model model = Model::load(checkpoint_path, &ckpt);
  const std::string* vocab_blob = ckpt.find_meta("vocab");
  if (vocab_blob == nullptr) {
    throw CompatError("checkpoint has no vocabulary: " + checkpoint_path);
  }
  Vocabulary vocab = Vocabulary::deserialize(*vocab_blob);
  if (vocab.size() != model.config().vocab_size) {
    throw CompatError("checkpoint vocabulary (" + std::to_string(vocab.size()) +
                      " entries) does not match the embedding table (" +
                      std::to_string(model.config().vocab_size) + ")");
  }
  const std::string* label_names = ckpt.find_meta("labels");
  if (label_names == nullptr) {
    throw CompatError("checkpoint has no label inventory: " + checkpoint_path);
  }
  LabelSet labels = LabelSet::custom(split_csv_list(*label_names));
  const std::size_t ws = std::stoull(cfg_get(
      {{"window_size", ckpt.find_meta("window_size") ? *ckpt.find_meta("window_size") : "64"}},
      "window_size", "64"));
  return LoadedRun{std::move(model), std::move(labels), std::move(vocab), ws};
}

int cmd_eval(const CommonArgs& common, const std::string& checkpoint_path,
             const std::string& pairs_path, const std::string& split_str,
             const std::string& exclude_flag) {
  LoadedRun run = load_run(checkpoint_path);
  const auto split = parse_split(split_str);
  if (!split) throw UsageError("unknown split '" + split_str + "'");

  const Dataset dataset = load_pair_dataset(pairs_path, run.labels);
  const InstanceStore store =
      InstanceStore::build_with_vocab(dataset, run.window_size, run.vocab);
  const std::vector<Instance>& instances = store.split(*split);
  if (instances.empty()) {
    throw DataError("split '" + split_str + "' is empty in " + pairs_path);
  }

  const std::string exclude =
      exclude_flag.empty() ? default_exclusions(run.labels) : exclude_flag;
  const std::vector<std::size_t> excluded = excluded_ids(run.labels, exclude);

  ConfigMap resolved;
  resolved["seed"] = std::to_string(run.model.config().seed);
  resolved["eval.checkpoint"] = checkpoint_path;
  resolved["eval.split"] = split_str;
  resolved["data.pairs"] = pairs_path;
  resolved["data.exclude_labels"] = exclude;
  resolved["data.window_size"] = std::to_string(run.window_size);
  for (const auto& [k, v] : run.model.config().to_config()) resolved[k] = v;
  const fs::path out_dir = prepare_out_dir(common.out);
  archive_config(out_dir, resolved);

  const std::vector<Prediction> preds = predict(run.model, instances);
  std::vector<std::size_t> gold, pred_ids;
  for (const Instance& inst : instances) gold.push_back(inst.label);
  for (const Prediction& p : preds) pred_ids.push_back(p.label);
  const Metrics metrics =
      compute_metrics(gold, pred_ids, run.model.config().n_labels, excluded);
  write_metrics_json((out_dir / "metrics.json").string(), metrics);

  const std::vector<EvidenceRecord> records = collect_evidence(instances, preds, run.labels);
  write_evidence_jsonl((out_dir / "evidence.jsonl").string(), records);

  std::cout << "evaluated " << metrics.n_evaluated << " instances (" << metrics.n_excluded
            << " excluded): P " << metrics.precision << " R " << metrics.recall << " F1 "
            << metrics.micro_f1 << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// sweep-k
// ---------------------------------------------------------------------------

int cmd_sweep_k(const CommonArgs& common, const std::string& pairs_path, ModelTrainFlags& f,
                std::size_t k_min, std::size_t k_max, bool dump_evidence) {
  if (k_min < 1 || k_max < k_min) {
    throw UsageError("sweep needs 1 <= k-min <= k-max");
  }
  ConfigMap resolved = load_base_config(common);
  merge_model_train(resolved, f);
  resolved["data.pairs"] = pairs_path;
  resolved["sweep.k_min"] = std::to_string(k_min);
  resolved["sweep.k_max"] = std::to_string(k_max);
  if (common.seed_set || resolved.find("seed") == resolved.end()) {
    resolved["seed"] = std::to_string(common.seed);
  }
  const std::uint64_t seed = cfg_get_u64(resolved, "seed", 0);

  const LabelSet labels = labels_from_string(cfg_get(resolved, "data.labels", "tbd"));
  if (resolved.find("data.exclude_labels") == resolved.end() ||
      resolved["data.exclude_labels"].empty()) {
    resolved["data.exclude_labels"] = default_exclusions(labels);
  }
  const Dataset dataset = load_pair_dataset(pairs_path, labels);
  const std::size_t ws = cfg_get_u64(resolved, "data.window_size", 64);
  const InstanceStore store = InstanceStore::build(dataset, ws);

  ModelConfig mc = ModelConfig::from_config(resolved);
  mc.n_labels = labels.size();
  mc.vocab_size = store.vocab.size();
  mc.seed = seed;
  mc.max_words = std::max<std::size_t>(store.max_window_words(), 1);
  TrainConfig tc = TrainConfig::from_config(resolved);
  tc.seed = seed;
  tc.excluded_labels = excluded_ids(labels, cfg_get(resolved, "data.exclude_labels", "none"));

  for (const auto& [k, v] : mc.to_config()) resolved[k] = v;
  for (const auto& [k, v] : tc.to_config()) resolved[k] = v;
  const fs::path out_dir = prepare_out_dir(common.out);
  archive_config(out_dir, resolved);

  std::vector<std::size_t> ks;
  for (std::size_t k = k_min; k <= k_max; ++k) ks.push_back(k);

  std::vector<SweepRow> rows;
  for (const std::size_t k : ks) {
    ModelConfig mk = mc;
    mk.top_k = k;
    Model model(mk);
    train_model(model, store, tc);
    const Metrics m = evaluate(model, store.test, tc.excluded_labels);
    rows.push_back(SweepRow{k, m.precision, m.recall, m.micro_f1});
    std::cout << "k=" << k << " micro_f1=" << m.micro_f1 << "\n";
    if (dump_evidence) {
      const std::vector<Prediction> preds = predict(model, store.test);
      const std::vector<EvidenceRecord> records =
          collect_evidence(store.test, preds, labels);
      char name[64];
      std::snprintf(name, sizeof(name), "evidence_k%zu.jsonl", k);
      write_evidence_jsonl((out_dir / name).string(), records);
    }
  }
  write_sweep_csv((out_dir / "sweep.csv").string(), rows);
  return 0;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

double total_variation(const std::map<std::string, double>& p,
                       const std::map<std::string, double>& q) {
  std::set<std::string> keys;
  for (const auto& [k, _] : p) keys.insert(k);
  for (const auto& [k, _] : q) keys.insert(k);
  double tv = 0.0;
  for (const std::string& k : keys) {
    const double pv = p.count(k) ? p.at(k) : 0.0;
    const double qv = q.count(k) ? q.at(k) : 0.0;
    tv += std::abs(pv - qv);
  }
  return 0.5 * tv;
}

int cmd_analyze(const CommonArgs& common, const std::string& evidence_path,
                const std::string& pairs_path, const std::string& annotations_path,
                const std::string& labels_str, std::size_t window_size,
                const std::string& gold_path,
                const std::vector<std::string>& stability_specs) {
  const LabelSet labels = labels_from_string(labels_str);
  Dataset dataset = load_pair_dataset(pairs_path, labels);
  if (!annotations_path.empty()) load_annotations(dataset, annotations_path);

  // Rebuild windows so evidence word indices map back to document tokens.
  // Subword ids are irrelevant here, so an empty vocabulary is fine.
  std::vector<Instance> instances;
  instances.reserve(dataset.pairs.size());
  const Vocabulary empty_vocab;
  for (std::size_t i = 0; i < dataset.pairs.size(); ++i) {
    const PairExample& p = dataset.pairs[i];
    instances.push_back(make_instance(
        build_window_words(dataset.document(p.doc_id), p, window_size), empty_vocab, p.label,
        p.doc_id, i));
  }
  std::map<std::size_t, const Instance*> by_id;
  for (const Instance& inst : instances) by_id[inst.pair_index] = &inst;

  const fs::path out_dir = prepare_out_dir(common.out);
  ConfigMap resolved;
  resolved["analyze.evidence"] = evidence_path;
  resolved["analyze.pairs"] = pairs_path;
  resolved["analyze.annotations"] = annotations_path;
  resolved["analyze.gold"] = gold_path;
  resolved["data.labels"] = labels_str;
  resolved["data.window_size"] = std::to_string(window_size);
  resolved["seed"] = std::to_string(common.seed);
  archive_config(out_dir, resolved);

  nlohmann::ordered_json summary;

  if (!evidence_path.empty()) {
    std::vector<EvidenceRecord> records = read_evidence_jsonl(evidence_path);
    join_annotations(records, by_id, dataset);
    for (const QueryRole role : kQueryRoles) {
      for (const FeatureKind kind : {FeatureKind::Pos, FeatureKind::Dep, FeatureKind::Morph}) {
        const FeatureDistribution dist = feature_distribution(records, role, kind);
        char name[64];
        std::snprintf(name, sizeof(name), "distribution_%s_%s.csv", feature_kind_name(kind),
                      role_name(role));
        write_distribution_csv((out_dir / name).string(), dist);
        nlohmann::ordered_json meta;
        meta["total"] = dist.total;
        meta["special"] = dist.special;
        summary["distributions"][role_name(role)][feature_kind_name(kind)] = meta;
      }
    }

    if (!gold_path.empty()) {
      const std::vector<GoldEvidence> gold = read_gold_evidence(gold_path);
      std::map<std::size_t, std::size_t> gold_token;
      std::set<std::string> signal_words;
      for (const GoldEvidence& g : gold) {
        gold_token[g.pair_index] = g.signal_token;
        signal_words.insert(g.signal_word);
      }
      for (const QueryRole role : kQueryRoles) {
        summary["signal_recovery"][role_name(role)] =
            signal_recovery_rate(records, role, by_id, gold_token);
      }
      // Distribution over signal words per role, plus pair-vs-entity
      // total-variation distances (reported, not thresholded).
      std::map<int, std::map<std::string, double>> sig_dist;
      for (const EvidenceRecord& rec : records) {
        for (const EvidenceEntry& e : rec.entries) {
          if (signal_words.count(e.surface)) {
            sig_dist[static_cast<int>(rec.role)][e.surface] += 1.0;
          }
        }
      }
      for (auto& [role, dist] : sig_dist) {
        double total = 0.0;
        for (const auto& [w, c] : dist) total += c;
        if (total > 0) {
          for (auto& [w, c] : dist) c /= total;
        }
        (void)role;
      }
      summary["signal_tv_distance"]["pair_vs_e1"] = total_variation(sig_dist[2], sig_dist[0]);
      summary["signal_tv_distance"]["pair_vs_e2"] = total_variation(sig_dist[2], sig_dist[1]);
    }
  }

  if (!stability_specs.empty()) {
    std::map<std::size_t, std::vector<EvidenceRecord>> dumps;
    for (const std::string& spec : stability_specs) {
      const std::size_t eq = spec.find('=');
      if (eq == std::string::npos) {
        throw UsageError("--stability expects K=path, got '" + spec + "'");
      }
      std::size_t k = 0;
      try {
        k = std::stoull(spec.substr(0, eq));
      } catch (const std::exception&) {
        throw UsageError("--stability expects a numeric K in '" + spec + "'");
      }
      dumps[k] = read_evidence_jsonl(spec.substr(eq + 1));
    }
    const std::vector<StabilityRow> rows = stability_report(dumps);
    write_stability_csv((out_dir / "stability.csv").string(), rows);
    summary["stability_pairs"] = rows.size();
  }

  std::ofstream os((out_dir / "summary.json").string(), std::ios::trunc);
  if (!os) throw IoError("cannot write summary.json");
  os << summary.dump(2) << "\n";
  std::cout << "analysis written to " << out_dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

int cmd_stats(const CommonArgs& common, const std::string& pairs_path,
              const std::string& labels_str, std::string dataset_name) {
  const LabelSet labels = labels_from_string(labels_str);
  const Dataset dataset = load_pair_dataset(pairs_path, labels);
  if (dataset_name.empty()) {
    dataset_name = fs::path(pairs_path).stem().string();
  }
  const fs::path out_dir = prepare_out_dir(common.out);
  ConfigMap resolved;
  resolved["stats.pairs"] = pairs_path;
  resolved["stats.dataset_name"] = dataset_name;
  resolved["data.labels"] = labels_str;
  archive_config(out_dir, resolved);
  const std::vector<DistanceRow> rows = distance_statistics(dataset);
  write_stats_csv((out_dir / "stats.csv").string(), dataset_name, rows);
  for (const DistanceRow& r : rows) {
    std::cout << r.split << ": n=" << r.n_pairs << " avg_token=" << r.avg_token
              << " avg_char=" << r.avg_char << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"temporal relation extraction with pair-conditioned top-K evidence"};
  app.require_subcommand(1);

  // synth
  CommonArgs synth_common;
  std::vector<std::pair<std::string, std::string>> synth_overrides;
  struct {
    std::uint64_t n_train = 0, n_val = 0, n_test = 0, vocab = 0, dmin = 0, dmax = 0;
    std::string labels, spec_path;
  } sy;
  CLI::App* synth = app.add_subcommand("synth", "Generate a planted-signal synthetic corpus");
  add_common(synth, synth_common);
  synth->add_option("--spec", sy.spec_path, "Synthetic spec config file");
  auto* o_ntr = synth->add_option("--n-train", sy.n_train);
  auto* o_nva = synth->add_option("--n-val", sy.n_val);
  auto* o_nte = synth->add_option("--n-test", sy.n_test);
  auto* o_voc = synth->add_option("--vocab-size", sy.vocab);
  auto* o_dmi = synth->add_option("--distance-min", sy.dmin);
  auto* o_dma = synth->add_option("--distance-max", sy.dmax);
  auto* o_lab = synth->add_option("--labels", sy.labels, "Comma-separated label names");

  // train
  CommonArgs train_common;
  std::string train_pairs;
  ModelTrainFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "Train a model on a pairs.jsonl dataset");
  add_common(train, train_common);
  train->add_option("--pairs", train_pairs, "pairs.jsonl input")->required();
  add_model_train_flags(train, train_flags);

  // eval
  CommonArgs eval_common;
  std::string eval_ckpt, eval_pairs, eval_split = "test", eval_exclude;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint and dump evidence");
  add_common(eval_cmd, eval_common);
  eval_cmd->add_option("--checkpoint", eval_ckpt)->required();
  eval_cmd->add_option("--pairs", eval_pairs)->required();
  eval_cmd->add_option("--split", eval_split, "train | validation | test");
  eval_cmd->add_option("--exclude-labels", eval_exclude, "Comma list or 'none'");

  // sweep-k
  CommonArgs sweep_common;
  std::string sweep_pairs;
  ModelTrainFlags sweep_flags;
  std::size_t k_min = 1, k_max = 20;
  bool sweep_dump = false;
  CLI::App* sweep = app.add_subcommand("sweep-k", "Train one model per K and tabulate F1");
  add_common(sweep, sweep_common);
  sweep->add_option("--pairs", sweep_pairs)->required();
  sweep->add_option("--k-min", k_min);
  sweep->add_option("--k-max", k_max);
  sweep->add_flag("--dump-evidence", sweep_dump, "Write evidence_k<K>.jsonl per K");
  add_model_train_flags(sweep, sweep_flags);

  // analyze
  CommonArgs an_common;
  std::string an_evidence, an_pairs, an_annotations, an_labels = "tbd", an_gold;
  std::size_t an_ws = 64;
  std::vector<std::string> an_stability;
  CLI::App* analyze = app.add_subcommand("analyze", "Feature distributions and K-stability");
  add_common(analyze, an_common);
  analyze->add_option("--evidence", an_evidence, "evidence.jsonl to analyze");
  analyze->add_option("--pairs", an_pairs)->required();
  analyze->add_option("--annotations", an_annotations);
  analyze->add_option("--labels", an_labels);
  analyze->add_option("--window-size", an_ws, "Must match the producing run");
  analyze->add_option("--gold-evidence", an_gold, "gold_evidence.jsonl from synth");
  analyze->add_option("--stability", an_stability, "K=evidence.jsonl, repeatable");

  // stats
  CommonArgs stats_common;
  std::string stats_pairs, stats_labels = "tbd", stats_name;
  CLI::App* stats = app.add_subcommand("stats", "Entity distance statistics");
  add_common(stats, stats_common);
  stats->add_option("--pairs", stats_pairs)->required();
  stats->add_option("--labels", stats_labels);
  stats->add_option("--dataset-name", stats_name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (synth->parsed()) {
      synth_common.seed_set = synth->count("--seed") > 0;
      if (!sy.spec_path.empty()) synth_common.config_path = sy.spec_path;
      if (o_ntr->count()) synth_overrides.emplace_back("n_train", std::to_string(sy.n_train));
      if (o_nva->count()) synth_overrides.emplace_back("n_val", std::to_string(sy.n_val));
      if (o_nte->count()) synth_overrides.emplace_back("n_test", std::to_string(sy.n_test));
      if (o_voc->count()) synth_overrides.emplace_back("vocab_size", std::to_string(sy.vocab));
      if (o_dmi->count()) synth_overrides.emplace_back("distance_min", std::to_string(sy.dmin));
      if (o_dma->count()) synth_overrides.emplace_back("distance_max", std::to_string(sy.dmax));
      if (o_lab->count()) synth_overrides.emplace_back("labels", sy.labels);
      return cmd_synth(synth_common, synth_overrides);
    }
    if (train->parsed()) {
      train_common.seed_set = train->count("--seed") > 0;
      return cmd_train(train_common, train_pairs, train_flags);
    }
    if (eval_cmd->parsed()) {
      eval_common.seed_set = eval_cmd->count("--seed") > 0;
      return cmd_eval(eval_common, eval_ckpt, eval_pairs, eval_split, eval_exclude);
    }
    if (sweep->parsed()) {
      sweep_common.seed_set = sweep->count("--seed") > 0;
      return cmd_sweep_k(sweep_common, sweep_pairs, sweep_flags, k_min, k_max, sweep_dump);
    }
    if (analyze->parsed()) {
      return cmd_analyze(an_common, an_evidence, an_pairs, an_annotations, an_labels, an_ws,
                         an_gold, an_stability);
    }
    if (stats->parsed()) {
      return cmd_stats(stats_common, stats_pairs, stats_labels, stats_name);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << error_kind_name(e.kind()) << ": " << e.what() << "\n";
    return e.kind() == ErrorKind::Usage ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
