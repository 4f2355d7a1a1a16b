#include "tkre/evidence.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

namespace tkre {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::vector<EvidenceRecord> collect_evidence(const std::vector<Instance>& instances,
                                             const std::vector<Prediction>& predictions,
                                             const LabelSet& labels) {
  if (instances.size() != predictions.size()) {
    throw ShapeError("collect_evidence: instance and prediction counts differ");
  }
  std::vector<EvidenceRecord> records;
  records.reserve(instances.size() * 3);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const Instance& inst = instances[i];
    const Prediction& p = predictions[i];
    for (const QueryRole role : kQueryRoles) {
      const TopKSelection& sel = p.trace.topk[static_cast<std::size_t>(role)];
      EvidenceRecord rec;
      rec.instance_id = inst.pair_index;
      rec.role = role;
      rec.predicted_label = labels.name(p.label);
      rec.gold_label = labels.name(inst.label);
      for (std::size_t e = 0; e < sel.indices.size(); ++e) {
        EvidenceEntry entry;
        entry.word_index = sel.indices[e];
        entry.surface = inst.words.at(sel.indices[e]);
        entry.weight = sel.weights[e];
        rec.entries.push_back(std::move(entry));
      }
      records.push_back(std::move(rec));
    }
  }
  std::sort(records.begin(), records.end(), [](const EvidenceRecord& a, const EvidenceRecord& b) {
    if (a.instance_id != b.instance_id) return a.instance_id < b.instance_id;
    return static_cast<int>(a.role) < static_cast<int>(b.role);
  });
  return records;
}

void write_evidence_jsonl(const std::string& path, const std::vector<EvidenceRecord>& records) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write evidence file: " + path);
  for (const EvidenceRecord& rec : records) {
    ordered_json j;
    j["instance_id"] = rec.instance_id;
    j["query_role"] = role_name(rec.role);
    j["predicted_label"] = rec.predicted_label;
    j["gold_label"] = rec.gold_label;
    ordered_json entries = ordered_json::array();
    for (const EvidenceEntry& e : rec.entries) {
      ordered_json je;
      je["word_index"] = e.word_index;
      je["surface"] = e.surface;
      je["weight"] = e.weight;
      entries.push_back(std::move(je));
    }
    j["entries"] = std::move(entries);
    os << j.dump() << "\n";
  }
  if (!os) throw IoError("failed writing evidence file: " + path);
}

std::vector<EvidenceRecord> read_evidence_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open evidence file: " + path);
  std::vector<EvidenceRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("evidence line " + std::to_string(lineno) + ": " + e.what());
    }
    EvidenceRecord rec;
    rec.instance_id = j.at("instance_id").get<std::size_t>();
    rec.role = parse_role(j.at("query_role").get<std::string>());
    rec.predicted_label = j.at("predicted_label").get<std::string>();
    rec.gold_label = j.at("gold_label").get<std::string>();
    for (const json& je : j.at("entries")) {
      EvidenceEntry e;
      e.word_index = je.at("word_index").get<std::size_t>();
      e.surface = je.at("surface").get<std::string>();
      e.weight = je.at("weight").get<double>();
      rec.entries.push_back(std::move(e));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void join_annotations(std::vector<EvidenceRecord>& records,
                      const std::map<std::size_t, const Instance*>& instances_by_id,
                      const Dataset& dataset) {
  for (EvidenceRecord& rec : records) {
    auto it = instances_by_id.find(rec.instance_id);
    if (it == instances_by_id.end()) {
      throw AlignmentError("evidence record for unknown instance " +
                           std::to_string(rec.instance_id));
    }
    const Instance& inst = *it->second;
    const Document& doc = dataset.document(inst.doc_id);
    for (EvidenceEntry& e : rec.entries) {
      if (e.word_index >= inst.word_to_doc_token.size()) {
        throw AlignmentError("evidence word index " + std::to_string(e.word_index) +
                             " outside window of instance " + std::to_string(rec.instance_id));
      }
      const int tok = inst.word_to_doc_token[e.word_index];
      e.joined = true;
      if (tok < 0) {
        e.special = true;  // marker or padding; kept, never dropped
        continue;
      }
      if (!doc.has_annotations()) {
        throw AlignmentError("doc '" + doc.doc_id + "' has no annotations for token " +
                             std::to_string(tok));
      }
      const TokenAnnotation& a = doc.annotations.at(static_cast<std::size_t>(tok));
      e.pos = a.pos;
      e.dep = a.dep;
      e.morph = a.morph;
    }
  }
}

const char* feature_kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Pos: return "pos";
    case FeatureKind::Dep: return "dep";
    case FeatureKind::Morph: return "morph";
  }
  return "?";
}

FeatureKind parse_feature_kind(const std::string& name) {
  if (name == "pos") return FeatureKind::Pos;
  if (name == "dep") return FeatureKind::Dep;
  if (name == "morph") return FeatureKind::Morph;
  throw ConfigError("unknown feature kind '" + name + "' (expected pos, dep, or morph)");
}

namespace {

std::vector<std::string> morph_atoms(const std::string& morph) {
  if (morph.empty() || morph == "_") return {};
  std::vector<std::string> atoms;
  std::string cur;
  for (const char c : morph) {
    if (c == '|') {
      if (!cur.empty()) atoms.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) atoms.push_back(cur);
  return atoms;
}

}  // namespace

FeatureDistribution feature_distribution(const std::vector<EvidenceRecord>& records,
                                         QueryRole role, FeatureKind kind) {
  FeatureDistribution dist;
  dist.role = role;
  dist.kind = kind;
  bool any_role = false;
  for (const EvidenceRecord& rec : records) {
    if (rec.role != role) continue;
    any_role = true;
    for (const EvidenceEntry& e : rec.entries) {
      if (!e.joined) {
        throw StateError("feature_distribution needs annotated records; run the join first");
      }
      if (e.special) {
        dist.special += 1;
        continue;
      }
      switch (kind) {
        case FeatureKind::Pos:
          if (!e.pos.empty() && e.pos != "_") {
            dist.counts[e.pos] += 1;
            dist.total += 1;
          }
          break;
        case FeatureKind::Dep:
          if (!e.dep.empty() && e.dep != "_") {
            dist.counts[e.dep] += 1;
            dist.total += 1;
          }
          break;
        case FeatureKind::Morph:
          for (const std::string& atom : morph_atoms(e.morph)) {
            dist.counts[atom] += 1;
            dist.total += 1;
          }
          break;
      }
    }
  }
  if (!any_role) {
    throw ConfigError(std::string("no evidence records for query role '") + role_name(role) +
                      "'");
  }
  for (const auto& [feature, count] : dist.counts) {
    dist.percentages[feature] =
        dist.total > 0 ? 100.0 * static_cast<double>(count) / static_cast<double>(dist.total)
                       : 0.0;
  }
  return dist;
}

namespace {

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

void write_distribution_csv(const std::string& path, const FeatureDistribution& dist) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write distribution csv: " + path);
  os << "feature,count,percentage\n";
  for (const auto& [feature, count] : dist.counts) {
    os << feature << "," << count << "," << fmt_g(dist.percentages.at(feature)) << "\n";
  }
}

double jaccard(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  const std::set<std::size_t> sa(a.begin(), a.end());
  const std::set<std::size_t> sb(b.begin(), b.end());
  std::size_t inter = 0;
  for (const std::size_t x : sa) inter += sb.count(x);
  const std::size_t uni = sa.size() + sb.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<StabilityRow> stability_report(
    const std::map<std::size_t, std::vector<EvidenceRecord>>& dumps_by_k) {
  if (dumps_by_k.size() < 2) {
    throw ConfigError("stability report needs at least two K values");
  }
  // Index every dump by (instance, role) and require matching instance sets.
  using Key = std::pair<std::size_t, int>;
  std::map<std::size_t, std::map<Key, const EvidenceRecord*>> indexed;
  const std::set<Key>* reference = nullptr;
  std::set<Key> first_keys;
  for (const auto& [k, records] : dumps_by_k) {
    auto& m = indexed[k];
    std::set<Key> keys;
    for (const EvidenceRecord& rec : records) {
      const Key key{rec.instance_id, static_cast<int>(rec.role)};
      m[key] = &rec;
      keys.insert(key);
    }
    if (reference == nullptr) {
      first_keys = std::move(keys);
      reference = &first_keys;
    } else if (keys != *reference) {
      throw ComparabilityError("evidence dumps for different K cover different instances");
    }
  }

  std::vector<StabilityRow> rows;
  for (auto it = dumps_by_k.begin(); std::next(it) != dumps_by_k.end(); ++it) {
    const auto next = std::next(it);
    for (const QueryRole role : kQueryRoles) {
      StabilityRow row;
      row.k_low = it->first;
      row.k_high = next->first;
      row.role = role;
      double jac_sum = 0.0;
      std::size_t contained = 0, n = 0;
      for (const auto& [key, rec_low] : indexed[it->first]) {
        if (key.second != static_cast<int>(role)) continue;
        const EvidenceRecord* rec_high = indexed[next->first].at(key);
        std::vector<std::size_t> low_idx, high_idx;
        for (const EvidenceEntry& e : rec_low->entries) low_idx.push_back(e.word_index);
        for (const EvidenceEntry& e : rec_high->entries) high_idx.push_back(e.word_index);
        jac_sum += jaccard(low_idx, high_idx);
        const std::set<std::size_t> high_set(high_idx.begin(), high_idx.end());
        const bool inside = std::all_of(low_idx.begin(), low_idx.end(), [&](std::size_t i) {
          return high_set.count(i) != 0;
        });
        contained += inside ? 1 : 0;
        n += 1;
      }
      row.mean_jaccard = n > 0 ? jac_sum / static_cast<double>(n) : 0.0;
      row.containment = n > 0 ? static_cast<double>(contained) / static_cast<double>(n) : 0.0;
      rows.push_back(row);
    }
  }
  return rows;
}

void write_stability_csv(const std::string& path, const std::vector<StabilityRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write stability csv: " + path);
  os << "k_low,k_high,role,mean_jaccard,containment\n";
  for (const StabilityRow& r : rows) {
    os << r.k_low << "," << r.k_high << "," << role_name(r.role) << "," << fmt_g(r.mean_jaccard)
       << "," << fmt_g(r.containment) << "\n";
  }
}

double signal_recovery_rate(const std::vector<EvidenceRecord>& records, QueryRole role,
                            const std::map<std::size_t, const Instance*>& instances_by_id,
                            const std::map<std::size_t, std::size_t>& gold_token_by_pair) {
  std::size_t hits = 0, n = 0;
  for (const EvidenceRecord& rec : records) {
    if (rec.role != role) continue;
    auto gold_it = gold_token_by_pair.find(rec.instance_id);
    auto inst_it = instances_by_id.find(rec.instance_id);
    if (gold_it == gold_token_by_pair.end() || inst_it == instances_by_id.end()) continue;
    const Instance& inst = *inst_it->second;
    n += 1;
    for (const EvidenceEntry& e : rec.entries) {
      if (e.word_index < inst.word_to_doc_token.size() &&
          inst.word_to_doc_token[e.word_index] == static_cast<int>(gold_it->second)) {
        hits += 1;
        break;
      }
    }
  }
  return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace tkre
