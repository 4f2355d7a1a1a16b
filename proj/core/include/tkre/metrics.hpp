#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace tkre {

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double micro_f1 = 0.0;
  // Gold x predicted counts over retained (non-excluded gold) instances.
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t n_evaluated = 0;
  std::size_t n_excluded = 0;
};

// Micro-averaged P/R/F1 with gold-side label exclusion: instances whose gold
// label is excluded are dropped from scoring entirely; a prediction of an
// excluded label on a retained instance is a miss for the gold class and a
// false positive for nothing.
Metrics compute_metrics(const std::vector<std::size_t>& gold,
                        const std::vector<std::size_t>& pred, std::size_t n_labels,
                        const std::vector<std::size_t>& excluded_labels);

void write_metrics_json(const std::string& path, const Metrics& metrics);

}  // namespace tkre
