#include "tkre/metrics.hpp"

#include <fstream>

#include <json.hpp>

#include "tkre/errors.hpp"

namespace tkre {

Metrics compute_metrics(const std::vector<std::size_t>& gold,
                        const std::vector<std::size_t>& pred, std::size_t n_labels,
                        const std::vector<std::size_t>& excluded_labels) {
  if (gold.size() != pred.size()) {
    throw ShapeError("metrics: gold and prediction lengths differ");
  }
  std::vector<bool> excluded(n_labels, false);
  for (const std::size_t e : excluded_labels) {
    if (e >= n_labels) {
      throw ConfigError("excluded label id " + std::to_string(e) + " outside the label set");
    }
    excluded[e] = true;
  }
  Metrics m;
  m.confusion.assign(n_labels, std::vector<std::size_t>(n_labels, 0));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= n_labels || pred[i] >= n_labels) {
      throw DataError("metrics: label id out of range at position " + std::to_string(i));
    }
    if (excluded[gold[i]]) {
      m.n_excluded += 1;
      continue;
    }
    m.confusion[gold[i]][pred[i]] += 1;
    m.n_evaluated += 1;
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t c = 0; c < n_labels; ++c) {
    if (excluded[c]) continue;
    tp += m.confusion[c][c];
    for (std::size_t o = 0; o < n_labels; ++o) {
      if (o == c) continue;
      fn += m.confusion[c][o];          // gold c predicted as something else
      if (!excluded[o]) fp += m.confusion[o][c];  // gold o predicted as c
    }
  }
  // Predictions of excluded labels never count as false positives, so fp
  // only pools over retained gold rows (which is all rows of the matrix).
  m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.micro_f1 = (m.precision + m.recall) > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
  return m;
}

void write_metrics_json(const std::string& path, const Metrics& metrics) {
  nlohmann::ordered_json j;
  j["precision"] = metrics.precision;
  j["recall"] = metrics.recall;
  j["micro_f1"] = metrics.micro_f1;
  j["n_evaluated"] = metrics.n_evaluated;
  j["n_excluded"] = metrics.n_excluded;
  j["confusion"] = metrics.confusion;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write metrics file: " + path);
  os << j.dump(2) << "\n";
}

}  // namespace tkre
