#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tkre/corpus.hpp"
#include "tkre/model.hpp"
#include "tkre/train.hpp"

namespace tkre {

struct EvidenceEntry {
  std::size_t word_index = 0;  // window word position
  std::string surface;
  double weight = 0.0;
  // Filled by join_annotations:
  bool joined = false;
  bool special = false;  // marker/padding token with no document position
  std::string pos;
  std::string dep;
  std::string morph;
};

struct EvidenceRecord {
  std::size_t instance_id = 0;  // pair ordinal in the dataset
  QueryRole role = QueryRole::E1;
  std::string predicted_label;
  std::string gold_label;
  std::vector<EvidenceEntry> entries;  // descending weight, ties by index
};

// One record per (instance, query role), ordered by instance_id then role.
std::vector<EvidenceRecord> collect_evidence(const std::vector<Instance>& instances,
                                             const std::vector<Prediction>& predictions,
                                             const LabelSet& labels);

void write_evidence_jsonl(const std::string& path, const std::vector<EvidenceRecord>& records);
std::vector<EvidenceRecord> read_evidence_jsonl(const std::string& path);

// Attaches POS/Dep/Morph features via each instance's window-to-document
// offsets. Marker/padding entries become SPECIAL instead of being dropped;
// a mapped token without annotations is a join error naming doc and index.
void join_annotations(std::vector<EvidenceRecord>& records,
                      const std::map<std::size_t, const Instance*>& instances_by_id,
                      const Dataset& dataset);

enum class FeatureKind { Pos, Dep, Morph };
const char* feature_kind_name(FeatureKind kind);
FeatureKind parse_feature_kind(const std::string& name);

struct FeatureDistribution {
  QueryRole role = QueryRole::E1;
  FeatureKind kind = FeatureKind::Pos;
  std::map<std::string, std::size_t> counts;  // feature value -> count
  std::size_t total = 0;                      // counted (non-special) features
  std::size_t special = 0;                    // marker/padding entries, reported apart
  std::map<std::string, double> percentages;
};

// Morph strings split on '|' into key=value atoms, each counted once per
// token; "_" and empty morphs contribute nothing. ConfigError if no record
// carries the requested role.
FeatureDistribution feature_distribution(const std::vector<EvidenceRecord>& records,
                                         QueryRole role, FeatureKind kind);

void write_distribution_csv(const std::string& path, const FeatureDistribution& dist);

struct StabilityRow {
  std::size_t k_low = 0;
  std::size_t k_high = 0;
  QueryRole role = QueryRole::E1;
  double mean_jaccard = 0.0;
  double containment = 0.0;  // fraction with selection(k_low) inside selection(k_high)
};

// Overlap statistics between consecutive K values; every dump must cover the
// same instance set (ComparabilityError otherwise).
std::vector<StabilityRow> stability_report(
    const std::map<std::size_t, std::vector<EvidenceRecord>>& dumps_by_k);

void write_stability_csv(const std::string& path, const std::vector<StabilityRow>& rows);

// Fraction of records of one role whose entries contain the gold signal
// token (window indices resolved through the instances).
double signal_recovery_rate(const std::vector<EvidenceRecord>& records, QueryRole role,
                            const std::map<std::size_t, const Instance*>& instances_by_id,
                            const std::map<std::size_t, std::size_t>& gold_token_by_pair);

double jaccard(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b);

}  // namespace tkre
