#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "tkre/tensor.hpp"

namespace tkre {

enum class Init {
  Zeros,
  Ones,
  XavierUniform,  // U(-sqrt(6/(fan_in+fan_out)), +...) over the last two dims
  Normal002,      // N(0, 0.02), used for embedding tables
};

struct ParamSpec {
  std::string name;
  Shape shape;
  Init init = Init::Zeros;
};

// Named trainable tensors in registration order. Every parameter requires
// gradients; initialize(seed) derives one stream per name so values are
// reproducible bit-for-bit and independent of registration order changes
// elsewhere.
class ParameterSet {
 public:
  Tensor& declare(const std::string& name, Shape shape, Init init);
  void initialize(std::uint64_t seed);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  const ParamSpec& spec(const std::string& name) const;

  std::size_t count() const { return params_.size(); }
  std::size_t total_scalars() const;
  const std::vector<std::string>& names() const { return names_; }

  void zero_grad_all();

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> params_;
  std::vector<ParamSpec> specs_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Checkpoint container: named tensors plus run metadata, little-endian.
// Layout (version 1):
//   magic "TKRC" | u32 version | u64 seed | u64 step | u32 n_meta |
//   u32 n_tensors | n_meta * { u32 klen, bytes, u32 vlen, bytes } |
//   n_tensors * { u32 nlen, bytes, u32 rank, u64 dims[rank], f64 data[] }
// ---------------------------------------------------------------------------

struct Checkpoint {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::map<std::string, std::string> meta;  // sorted on disk
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
  const std::string* find_meta(const std::string& key) const;
};

void save_checkpoint(const std::string& path, const ParameterSet& params,
                     std::uint64_t seed, std::uint64_t step,
                     const std::map<std::string, std::string>& meta);
Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint tensors into an already-declared parameter set;
// CompatError on missing names or shape mismatches.
void restore_parameters(ParameterSet& params, const Checkpoint& ckpt);

}  // namespace tkre
