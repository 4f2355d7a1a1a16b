#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "tkre/params.hpp"

namespace tkre {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// AdamW with decoupled weight decay: the decay term is applied directly to
// the parameter, never routed through the moment estimates.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

  // One update over every parameter. Requires populated gradients
  // (StateError naming the parameter otherwise) and zeroes them afterwards.
  void step(ParameterSet& params);

  std::uint64_t step_count() const { return step_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  AdamWConfig cfg_;
  std::uint64_t step_ = 0;
  std::unordered_map<std::string, std::vector<double>> m_;
  std::unordered_map<std::string, std::vector<double>> v_;
};

}  // namespace tkre
