#include "tkre/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "tkre/errors.hpp"
#include "tkre/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace tkre {

Tensor& ParameterSet::declare(const std::string& name, Shape shape, Init init) {
  if (contains(name)) {
    throw ConfigError("parameter '" + name + "' declared twice");
  }
  index_[name] = params_.size();
  names_.push_back(name);
  specs_.push_back(ParamSpec{name, shape, init});
  Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
  t.set_name(name);
  params_.push_back(t);
  return params_.back();
}

void ParameterSet::initialize(std::uint64_t seed) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const ParamSpec& spec = specs_[i];
    auto& data = params_[i].mutable_data();
    Rng rng(Rng::derive(seed, spec.name));
    switch (spec.init) {
      case Init::Zeros:
        std::fill(data.begin(), data.end(), 0.0);
        break;
      case Init::Ones:
        std::fill(data.begin(), data.end(), 1.0);
        break;
      case Init::XavierUniform: {
        const std::size_t rank = spec.shape.size();
        const double fan_in = rank >= 2 ? static_cast<double>(spec.shape[rank - 2]) : 1.0;
        const double fan_out = static_cast<double>(spec.shape[rank - 1]);
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& v : data) v = rng.uniform(-limit, limit);
        break;
      }
      case Init::Normal002:
        for (double& v : data) v = rng.normal(0.0, 0.02);
        break;
    }
    params_[i].zero_grad();
  }
}

Tensor& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw StateError("unknown parameter '" + name + "'");
  return params_[it->second];
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw StateError("unknown parameter '" + name + "'");
  return params_[it->second];
}

const ParamSpec& ParameterSet::spec(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw StateError("unknown parameter '" + name + "'");
  return specs_[it->second];
}

std::size_t ParameterSet::total_scalars() const {
  std::size_t n = 0;
  for (const Tensor& t : params_) n += t.size();
  return n;
}

void ParameterSet::zero_grad_all() {
  for (Tensor& t : params_) t.zero_grad();
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'T', 'K', 'R', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void write_str(std::ofstream& os, const std::string& s) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T read_pod(std::ifstream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("truncated checkpoint file: " + path);
  return v;
}

std::string read_str(std::ifstream& is, const std::string& path) {
  const auto len = read_pod<std::uint32_t>(is, path);
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (!is) throw IoError("truncated checkpoint file: " + path);
  return s;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

const std::string* Checkpoint::find_meta(const std::string& key) const {
  auto it = meta.find(key);
  return it == meta.end() ? nullptr : &it->second;
}

void save_checkpoint(const std::string& path, const ParameterSet& params,
                     std::uint64_t seed, std::uint64_t step,
                     const std::map<std::string, std::string>& meta) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 4);
  write_pod<std::uint32_t>(os, kVersion);
  write_pod<std::uint64_t>(os, seed);
  write_pod<std::uint64_t>(os, step);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(meta.size()));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params.count()));
  for (const auto& [k, v] : meta) {
    write_str(os, k);
    write_str(os, v);
  }
  for (const std::string& name : params.names()) {
    const Tensor& t = params.at(name);
    write_str(os, name);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (const std::size_t d : t.shape()) write_pod<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw CompatError("not a checkpoint file (bad magic): " + path);
  }
  const auto version = read_pod<std::uint32_t>(is, path);
  if (version != kVersion) {
    throw CompatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.seed = read_pod<std::uint64_t>(is, path);
  ckpt.step = read_pod<std::uint64_t>(is, path);
  const auto n_meta = read_pod<std::uint32_t>(is, path);
  const auto n_tensors = read_pod<std::uint32_t>(is, path);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = read_str(is, path);
    std::string v = read_str(is, path);
    ckpt.meta.emplace(std::move(k), std::move(v));
  }
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = read_str(is, path);
    const auto rank = read_pod<std::uint32_t>(is, path);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(read_pod<std::uint64_t>(is, path));
    std::vector<double> data(shape_size(shape));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!is) throw IoError("truncated checkpoint file: " + path);
    Tensor t = Tensor::from_data(std::move(shape), std::move(data));
    t.set_name(name);
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

void restore_parameters(ParameterSet& params, const Checkpoint& ckpt) {
  for (const std::string& name : params.names()) {
    const Tensor* src = ckpt.find(name);
    if (src == nullptr) {
      throw CompatError("checkpoint is missing parameter '" + name + "'");
    }
    Tensor& dst = params.at(name);
    if (src->shape() != dst.shape()) {
      throw CompatError("checkpoint parameter '" + name + "' has shape " +
                        shape_str(src->shape()) + ", expected " + shape_str(dst.shape()));
    }
    dst.mutable_data() = src->data();
    dst.zero_grad();
  }
}

}  // namespace tkre
