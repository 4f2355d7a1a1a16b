#include "tkre/optim.hpp"

#include <cmath>

#include "tkre/errors.hpp"

namespace tkre {

void AdamW::step(ParameterSet& params) {
  for (const std::string& name : params.names()) {
    if (!params.at(name).has_grad()) {
      throw StateError("adamw: no gradient for parameter '" + name + "'");
    }
  }
  step_ += 1;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (const std::string& name : params.names()) {
    Tensor& p = params.at(name);
    const std::vector<double>& g = p.grad();
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.size() != g.size()) m.assign(g.size(), 0.0);
    if (v.size() != g.size()) v.assign(g.size(), 0.0);
    auto& w = p.mutable_data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      // Decoupled decay uses the pre-update weight.
      w[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w[i]);
    }
    p.zero_grad();
  }
}

}  // namespace tkre
