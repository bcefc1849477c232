#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace synwarp {

// Thrown when an op name is not in the registered kernel set, or a
// configured feature (e.g. the discriminator) is disabled.
class UnsupportedOperation : public std::runtime_error {
 public:
  explicit UnsupportedOperation(const std::string& what) : std::runtime_error(what) {}
};

// Thrown by the optimizer / training loop on NaN gradients or NaN loss.
// Carries the name of the offending parameter when known.
class TrainingDivergence : public std::runtime_error {
 public:
  explicit TrainingDivergence(const std::string& what, std::string param = "")
      : std::runtime_error(what), param_(std::move(param)) {}
  const std::string& param() const { return param_; }

 private:
  std::string param_;
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline void check_arg(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace synwarp
