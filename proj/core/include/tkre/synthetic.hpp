#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tkre/config.hpp"
#include "tkre/corpus.hpp"

namespace tkre {

// Synthetic pair corpus where each document carries exactly one entity pair
// whose label is fully determined by a planted signal word at a known token
// position. Generation is seed-deterministic.
struct SyntheticSpec {
  std::size_t n_train = 1000;
  std::size_t n_val = 200;
  std::size_t n_test = 200;
  std::size_t vocab_size = 200;  // filler word inventory
  std::vector<std::string> labels = {"a", "b", "s", "i", "ii"};
  std::map<std::string, std::vector<std::string>> signal_words;  // label -> signals
  std::size_t distance_min = 2;   // edge-to-edge token distance between entities
  std::size_t distance_max = 10;
  std::size_t prefix_min = 2;
  std::size_t prefix_max = 6;
  std::size_t suffix_min = 2;
  std::size_t suffix_max = 6;
  std::uint64_t seed = 7;

  // Fills per-label defaults ("sig_<label>_0") for labels without signals.
  void apply_default_signals();
  void validate() const;

  static SyntheticSpec from_config(const ConfigMap& cfg);
  ConfigMap to_config() const;
};

struct GoldEvidence {
  std::size_t pair_index = 0;
  std::string doc_id;
  std::size_t signal_token = 0;  // document token index of the planted signal
  std::string signal_word;
  std::string label;
};

struct SyntheticCorpus {
  Dataset dataset;
  std::vector<GoldEvidence> gold;
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec);

void write_gold_evidence(const std::vector<GoldEvidence>& gold, const std::string& path);
std::vector<GoldEvidence> read_gold_evidence(const std::string& path);

// Label predicted by looking up the planted signal word; the independent
// oracle used to verify synthetic corpora.
std::size_t rule_oracle_label(const SyntheticSpec& spec, const Dataset& ds,
                              const GoldEvidence& gold);

}  // namespace tkre
