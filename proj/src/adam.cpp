#include "uvrec/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace uvrec {

void adam_step(ModelParams& params, AdamState& state, const AdamConfig& config) {
  if (!(config.lr >= 0.0)) throw std::invalid_argument("adam: learning rate must be >= 0");
  for (const Param& p : params) {
    if (!p.grad.same_shape(p.value)) {
      throw std::invalid_argument("adam: gradient shape mismatch for '" + p.full_name() + "'");
    }
    if (!p.grad.all_finite()) {
      throw std::runtime_error("adam: non-finite gradient for '" + p.full_name() + "'");
    }
  }
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const Param& p : params) {
      state.m.emplace_back(p.value.shape(), 0.0);
      state.v.emplace_back(p.value.shape(), 0.0);
    }
    state.step = 0;
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param& p = params.at(k);
    auto& m = state.m[k].raw();
    auto& v = state.v[k].raw();
    auto& w = p.value.raw();
    const auto& g = p.grad.raw();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
    }
  }
}

}  // namespace uvrec
