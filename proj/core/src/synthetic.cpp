#include "tkre/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tkre/rng.hpp"

namespace tkre {

using ordered_json = nlohmann::ordered_json;

void SyntheticSpec::apply_default_signals() {
  static const std::map<std::string, std::vector<std::string>> kKnown = {
      {"a", {"afterwards"}}, {"b", {"beforehand"}}, {"s", {"meanwhile"}},
      {"i", {"throughout"}}, {"ii", {"within"}},    {"v", {"perhaps"}},
      {"e", {"exactly"}},
  };
  for (const std::string& label : labels) {
    if (signal_words.count(label) && !signal_words[label].empty()) continue;
    auto it = kKnown.find(label);
    if (it != kKnown.end()) {
      signal_words[label] = it->second;
    } else {
      signal_words[label] = {"sig_" + label};
    }
  }
}

void SyntheticSpec::validate() const {
  if (labels.empty()) throw ConfigError("synthetic corpus needs at least one label");
  std::size_t total_signals = 0;
  for (const std::string& label : labels) {
    auto it = signal_words.find(label);
    if (it == signal_words.end() || it->second.empty()) {
      throw ConfigError("label '" + label + "' has no signal word");
    }
    total_signals += it->second.size();
  }
  if (vocab_size < total_signals) {
    throw ConfigError("filler vocabulary (" + std::to_string(vocab_size) +
                      ") is smaller than the signal inventory (" +
                      std::to_string(total_signals) + ")");
  }
  if (distance_min < 1 || distance_max < distance_min) {
    throw ConfigError("distance range must satisfy 1 <= min <= max");
  }
  if (prefix_min < 1) {
    throw ConfigError("prefix length must be at least 1 (room for a pre-entity signal)");
  }
}

SyntheticSpec SyntheticSpec::from_config(const ConfigMap& cfg) {
  SyntheticSpec spec;
  spec.n_train = cfg_get_u64(cfg, "n_train", spec.n_train);
  spec.n_val = cfg_get_u64(cfg, "n_val", spec.n_val);
  spec.n_test = cfg_get_u64(cfg, "n_test", spec.n_test);
  spec.vocab_size = cfg_get_u64(cfg, "vocab_size", spec.vocab_size);
  spec.distance_min = cfg_get_u64(cfg, "distance_min", spec.distance_min);
  spec.distance_max = cfg_get_u64(cfg, "distance_max", spec.distance_max);
  spec.prefix_min = cfg_get_u64(cfg, "prefix_min", spec.prefix_min);
  spec.prefix_max = cfg_get_u64(cfg, "prefix_max", spec.prefix_max);
  spec.suffix_min = cfg_get_u64(cfg, "suffix_min", spec.suffix_min);
  spec.suffix_max = cfg_get_u64(cfg, "suffix_max", spec.suffix_max);
  spec.seed = cfg_get_u64(cfg, "seed", spec.seed);
  const std::string labels = cfg_get(cfg, "labels", "");
  if (!labels.empty()) spec.labels = split_csv_list(labels);
  for (const std::string& label : spec.labels) {
    const std::string key = "signals_" + label;
    const std::string sig = cfg_get(cfg, key, "");
    if (!sig.empty()) spec.signal_words[label] = split_csv_list(sig);
  }
  spec.apply_default_signals();
  spec.validate();
  return spec;
}

ConfigMap SyntheticSpec::to_config() const {
  ConfigMap cfg;
  cfg["n_train"] = std::to_string(n_train);
  cfg["n_val"] = std::to_string(n_val);
  cfg["n_test"] = std::to_string(n_test);
  cfg["vocab_size"] = std::to_string(vocab_size);
  cfg["distance_min"] = std::to_string(distance_min);
  cfg["distance_max"] = std::to_string(distance_max);
  cfg["prefix_min"] = std::to_string(prefix_min);
  cfg["prefix_max"] = std::to_string(prefix_max);
  cfg["suffix_min"] = std::to_string(suffix_min);
  cfg["suffix_max"] = std::to_string(suffix_max);
  cfg["seed"] = std::to_string(seed);
  std::string joined;
  for (const std::string& l : labels) {
    if (!joined.empty()) joined += ",";
    joined += l;
  }
  cfg["labels"] = joined;
  for (const auto& [label, sigs] : signal_words) {
    std::string s;
    for (const std::string& sig : sigs) {
      if (!s.empty()) s += ",";
      s += sig;
    }
    cfg["signals_" + label] = s;
  }
  return cfg;
}

namespace {

std::string filler_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "w%03zu", i);
  return buf;
}

std::string event_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "evt%02zu", i);
  return buf;
}

constexpr std::size_t kEventPool = 20;

// Deterministic per-word annotation so the same surface always carries the
// same features, mimicking a lexicon-driven tagger.
TokenAnnotation synth_annotation(const SyntheticSpec& spec, const std::string& word) {
  for (const auto& [label, sigs] : spec.signal_words) {
    if (std::find(sigs.begin(), sigs.end(), word) != sigs.end()) {
      return TokenAnnotation{"SCONJ", "mark", "SignalType=Temporal"};
    }
  }
  if (word.rfind("evt", 0) == 0) {
    return TokenAnnotation{"VERB", "ROOT", "Tense=Past|VerbForm=Fin"};
  }
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : word) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ULL;
  }
  static const char* kPos[4] = {"NOUN", "DET", "ADJ", "ADV"};
  static const char* kDep[4] = {"compound", "det", "amod", "advmod"};
  static const char* kMorph[4] = {"Number=Sing", "_", "Degree=Pos", "_"};
  const std::size_t k = h % 4;
  return TokenAnnotation{kPos[k], kDep[k], kMorph[k]};
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec_in) {
  SyntheticSpec spec = spec_in;
  spec.apply_default_signals();
  spec.validate();

  Rng rng(Rng::derive(spec.seed, "synthetic-corpus"));
  SyntheticCorpus out;
  out.dataset.labels = LabelSet::custom(spec.labels);

  const std::size_t total = spec.n_train + spec.n_val + spec.n_test;
  for (std::size_t idx = 0; idx < total; ++idx) {
    const Split split = idx < spec.n_train                ? Split::Train
                        : idx < spec.n_train + spec.n_val ? Split::Validation
                                                          : Split::Test;
    const std::size_t label_id = static_cast<std::size_t>(rng.below(spec.labels.size()));
    const std::string& label = spec.labels[label_id];
    const auto& sigs = spec.signal_words.at(label);
    const std::string& signal = sigs[static_cast<std::size_t>(rng.below(sigs.size()))];

    const std::size_t prefix =
        spec.prefix_min + static_cast<std::size_t>(rng.below(spec.prefix_max - spec.prefix_min + 1));
    const std::size_t suffix =
        spec.suffix_min + static_cast<std::size_t>(rng.below(spec.suffix_max - spec.suffix_min + 1));
    const std::size_t distance =
        spec.distance_min +
        static_cast<std::size_t>(rng.below(spec.distance_max - spec.distance_min + 1));

    std::vector<std::string> words;
    std::size_t signal_pos = 0;
    auto push_filler = [&] {
      words.push_back(filler_name(static_cast<std::size_t>(rng.below(spec.vocab_size))));
    };

    // Prefix; when the entities are adjacent the signal lands just before e1.
    const bool signal_in_gap = distance >= 2;
    for (std::size_t i = 0; i < prefix; ++i) push_filler();
    if (!signal_in_gap) {
      signal_pos = words.size() - 1;
      words[signal_pos] = signal;
    }

    const std::size_t e1_pos = words.size();
    words.push_back(event_name(static_cast<std::size_t>(rng.below(kEventPool))));

    // Gap of (distance - 1) words with the signal planted at a random slot.
    const std::size_t gap = distance - 1;
    std::size_t slot = 0;
    if (signal_in_gap) slot = static_cast<std::size_t>(rng.below(gap));
    for (std::size_t i = 0; i < gap; ++i) {
      if (signal_in_gap && i == slot) {
        signal_pos = words.size();
        words.push_back(signal);
      } else {
        push_filler();
      }
    }

    const std::size_t e2_pos = words.size();
    words.push_back(event_name(static_cast<std::size_t>(rng.below(kEventPool))));
    for (std::size_t i = 0; i < suffix; ++i) push_filler();

    Document doc;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "synth%05zu", idx);
    doc.doc_id = idbuf;
    std::ostringstream text;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) text << " ";
      text << words[i];
    }
    doc.text = text.str();
    doc.tokens = whitespace_tokenize(doc.text);
    doc.annotations.reserve(doc.tokens.size());
    for (const Token& t : doc.tokens) {
      doc.annotations.push_back(synth_annotation(spec, t.surface));
    }
    out.dataset.doc_index[doc.doc_id] = out.dataset.documents.size();
    out.dataset.documents.push_back(std::move(doc));

    PairExample pair;
    pair.doc_id = idbuf;
    pair.e1 = TokenSpan{e1_pos, e1_pos + 1};
    pair.e2 = TokenSpan{e2_pos, e2_pos + 1};
    pair.label = label_id;
    pair.split = split;
    out.dataset.pairs.push_back(pair);

    out.gold.push_back(GoldEvidence{idx, idbuf, signal_pos, signal, label});
  }
  return out;
}

void write_gold_evidence(const std::vector<GoldEvidence>& gold, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write gold evidence file: " + path);
  for (const GoldEvidence& g : gold) {
    ordered_json rec;
    rec["pair_index"] = g.pair_index;
    rec["doc_id"] = g.doc_id;
    rec["signal_token"] = g.signal_token;
    rec["signal_word"] = g.signal_word;
    rec["label"] = g.label;
    os << rec.dump() << "\n";
  }
}

std::vector<GoldEvidence> read_gold_evidence(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open gold evidence file: " + path);
  std::vector<GoldEvidence> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("gold evidence line " + std::to_string(lineno) + ": " + e.what());
    }
    GoldEvidence g;
    g.pair_index = rec.at("pair_index").get<std::size_t>();
    g.doc_id = rec.at("doc_id").get<std::string>();
    g.signal_token = rec.at("signal_token").get<std::size_t>();
    g.signal_word = rec.at("signal_word").get<std::string>();
    g.label = rec.at("label").get<std::string>();
    out.push_back(std::move(g));
  }
  return out;
}

std::size_t rule_oracle_label(const SyntheticSpec& spec, const Dataset& ds,
                              const GoldEvidence& gold) {
  const Document& doc = ds.document(gold.doc_id);
  if (gold.signal_token >= doc.tokens.size()) {
    throw DataError("gold signal index out of range in doc '" + gold.doc_id + "'");
  }
  const std::string& word = doc.tokens[gold.signal_token].surface;
  for (std::size_t id = 0; id < spec.labels.size(); ++id) {
    const auto& sigs = spec.signal_words.at(spec.labels[id]);
    if (std::find(sigs.begin(), sigs.end(), word) != sigs.end()) return id;
  }
  throw DataError("no signal word found at gold index in doc '" + gold.doc_id + "'");
}

}  // namespace tkre
