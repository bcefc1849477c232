#pragma once

#include <cmath>
#include <map>
#include <string>

#include "synwarp/config.hpp"
#include "synwarp/params.hpp"

namespace synwarp {

// Bias-corrected Adam over named parameters. Moments appear lazily the first
// time a parameter receives a gradient; untouched parameters never move.
template <typename T>
struct AdamStateT {
  std::map<std::string, TensorT<T>> m, v;
  long step = 0;
};
using AdamState = AdamStateT<float>;

template <typename T>
void adam_step(ParamMap<T>& params, const std::map<std::string, const TensorT<T>*>& grads,
               AdamStateT<T>& state, const Config& cfg) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (const auto& [name, grad] : grads) {
    auto pit = params.find(name);
    check_arg(pit != params.end(), "adam_step: gradient for unknown parameter " + name);
    TensorT<T>& p = pit->second;
    check_arg(grad->shape() == p.shape(), "adam_step: gradient shape mismatch for " + name);
    if (!grad->all_finite()) throw TrainingDivergence(name);
    TensorT<T>& m = state.m.try_emplace(name, p.shape()).first->second;
    TensorT<T>& v = state.v.try_emplace(name, p.shape()).first->second;
    for (long i = 0; i < p.numel(); ++i) {
      const double g = (*grad)[i];
      const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * g;
      const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      p[i] = static_cast<T>(static_cast<double>(p[i]) - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

}  // namespace synwarp
