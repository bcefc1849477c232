#pragma once

#include <functional>
#include <map>
#include <string>

#include "synwarp/tape.hpp"

namespace synwarp {

// Named parameter collection; map ordering gives deterministic iteration for
// initialization, serialization, and optimizer sweeps.
template <typename T>
using ParamMap = std::map<std::string, TensorT<T>>;

template <typename T, typename U>
ParamMap<U> convert_params(const ParamMap<T>& src) {
  ParamMap<U> out;
  for (const auto& [name, t] : src) {
    TensorT<U> c(t.shape());
    for (long i = 0; i < t.numel(); ++i) c[i] = static_cast<U>(t[i]);
    out[name] = std::move(c);
  }
  return out;
}

// Per-step view of the parameters as tape leaves. `trainable` decides which
// leaves carry gradients (the phase freeze rule); names absent from the map
// are an error so a renamed parameter cannot silently detach.
template <typename T>
class BoundParams {
 public:
  BoundParams(TapeT<T>& tape, const ParamMap<T>& params,
              std::function<bool(const std::string&)> trainable)
      : tape_(tape), params_(params), trainable_(std::move(trainable)) {}

  ValueT<T>* operator[](const std::string& name) {
    auto it = leaves_.find(name);
    if (it != leaves_.end()) return it->second;
    auto pit = params_.find(name);
    check_arg(pit != params_.end(), "unknown parameter: " + name);
    ValueT<T>* leaf = tape_.leaf(pit->second, trainable_(name));
    leaves_.emplace(name, leaf);
    return leaf;
  }

  // Gradients of every trainable leaf touched this step, keyed by name.
  std::map<std::string, const TensorT<T>*> gradients() const {
    std::map<std::string, const TensorT<T>*> out;
    for (const auto& [name, leaf] : leaves_)
      if (leaf->requires_grad && leaf->has_grad()) out[name] = &leaf->grad;
    return out;
  }

 private:
  TapeT<T>& tape_;
  const ParamMap<T>& params_;
  std::function<bool(const std::string&)> trainable_;
  std::map<std::string, ValueT<T>*> leaves_;
};

}  // namespace synwarp
