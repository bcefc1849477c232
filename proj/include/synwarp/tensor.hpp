#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "synwarp/common.hpp"

namespace synwarp {

// Dense row-major shape, 1..5 dims, all extents positive.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<int> dims) : Shape(std::vector<int>(dims)) {}
  explicit Shape(const std::vector<int>& dims) {
    check_arg(!dims.empty() && dims.size() <= kMaxRank, "shape rank must be 1..5");
    rank_ = static_cast<int>(dims.size());
    for (int i = 0; i < rank_; ++i) {
      check_arg(dims[i] > 0, "shape extents must be positive");
      d_[i] = dims[i];
    }
  }

  int rank() const { return rank_; }
  int operator[](int i) const { return d_[i]; }
  long numel() const {
    long n = 1;
    for (int i = 0; i < rank_; ++i) n *= d_[i];
    return n;
  }
  // Row-major stride of axis i.
  long stride(int i) const {
    long s = 1;
    for (int k = i + 1; k < rank_; ++k) s *= d_[k];
    return s;
  }
  bool operator==(const Shape& o) const {
    if (rank_ != o.rank_) return false;
    for (int i = 0; i < rank_; ++i)
      if (d_[i] != o.d_[i]) return false;
    return true;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    std::string s = "(";
    for (int i = 0; i < rank_; ++i) s += (i ? "x" : "") + std::to_string(d_[i]);
    return s + ")";
  }

  static constexpr size_t kMaxRank = 5;

 private:
  std::array<int, kMaxRank> d_{1, 1, 1, 1, 1};
  int rank_ = 0;
};

// Dense row-major tensor over float (default) or double (gradient-check mode).
template <typename T>
class TensorT {
 public:
  TensorT() = default;
  explicit TensorT(Shape shape) : shape_(shape), data_(static_cast<size_t>(shape.numel()), T(0)) {}
  TensorT(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    check_arg(static_cast<long>(data_.size()) == shape_.numel(), "tensor data length must equal product of shape");
  }

  static TensorT full(Shape shape, T v) {
    TensorT t(shape);
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return shape_.rank(); }
  int dim(int i) const { return shape_[i]; }
  long numel() const { return static_cast<long>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](long i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](long i) const { return data_[static_cast<size_t>(i)]; }

  template <typename... Idx>
  T& at(Idx... idx) {
    return data_[static_cast<size_t>(flat(idx...))];
  }
  template <typename... Idx>
  const T& at(Idx... idx) const {
    return data_[static_cast<size_t>(flat(idx...))];
  }

  template <typename... Idx>
  long flat(Idx... idx) const {
    static_assert(sizeof...(Idx) >= 1 && sizeof...(Idx) <= Shape::kMaxRank);
    const std::array<long, sizeof...(Idx)> ix{static_cast<long>(idx)...};
    long f = 0;
    for (size_t i = 0; i < ix.size(); ++i) f += ix[i] * shape_.stride(static_cast<int>(i));
    return f;
  }

  // Same data, new shape; element count must match.
  TensorT reshaped(Shape s) const {
    check_arg(s.numel() == numel(), "reshape must preserve element count");
    return TensorT(s, data_);
  }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  bool same_bits(const TensorT& o) const {
    return shape_ == o.shape_ &&
           std::memcmp(data_.data(), o.data_.data(), data_.size() * sizeof(T)) == 0;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

// Deterministic counter-based RNG (splitmix64 core). Same seed gives a
// bit-identical stream across runs of the same build.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Integer in [0, n).
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  // Box-Muller; one value per call, second value cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 1e-300) u1 = next_double();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

  // Independent stream derived from this seed and a stream id.
  Rng fork(uint64_t stream) const {
    uint64_t mix = state_ ^ (0x9e3779b97f4a7c15ull + stream * 0xd1342543de82ef95ull);
    mix = (mix ^ (mix >> 29)) * 0xff51afd7ed558ccdull;
    return Rng(mix ^ (mix >> 33));
  }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Scaled-uniform init: values in +-sqrt(6/fan_in).
template <typename T>
TensorT<T> init_params(Rng& rng, Shape shape, long fan_in) {
  check_arg(fan_in >= 1, "fan_in must be >= 1");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  TensorT<T> t(shape);
  for (long i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace synwarp
