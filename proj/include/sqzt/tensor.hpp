#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sqzt {

enum class DType : uint8_t { f32 = 0, f64 = 1 };

template <typename T>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>,
                "only f32/f64 tensors are supported");
  if constexpr (std::is_same_v<T, float>) return DType::f32;
  return DType::f64;
}

/// Dense row-major N-d array. Rank 1..5, all extents >= 1.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(static_cast<size_t>(numel_from_shape()), T(0));
  }

  Tensor(std::vector<int64_t> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (static_cast<int64_t>(data_.size()) != numel_from_shape()) {
      throw std::invalid_argument("tensor: data length " + std::to_string(data_.size()) +
                                  " != product(shape) " + std::to_string(numel_from_shape()));
    }
  }

  static Tensor full(std::vector<int64_t> shape, T value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  static Tensor scalar(T value) { return Tensor({1}, {value}); }

  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t extent(int axis) const { return shape_.at(static_cast<size_t>(axis)); }
  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  T& at(std::initializer_list<int64_t> idx) { return data_[static_cast<size_t>(offset(idx))]; }
  const T& at(std::initializer_list<int64_t> idx) const {
    return data_[static_cast<size_t>(offset(idx))];
  }

  /// Row-major linear offset of a full multi-index.
  int64_t offset(std::initializer_list<int64_t> idx) const {
    if (static_cast<int>(idx.size()) != rank()) {
      throw std::invalid_argument("tensor: index rank " + std::to_string(idx.size()) +
                                  " != tensor rank " + std::to_string(rank()));
    }
    int64_t off = 0;
    int axis = 0;
    for (int64_t i : idx) {
      if (i < 0 || i >= shape_[static_cast<size_t>(axis)]) {
        throw std::out_of_range("tensor: index " + std::to_string(i) + " out of range on axis " +
                                std::to_string(axis));
      }
      off = off * shape_[static_cast<size_t>(axis)] + i;
      ++axis;
    }
    return off;
  }

  /// Same buffer, new shape (element count must match).
  Tensor reshaped(std::vector<int64_t> new_shape) const& {
    Tensor t(std::move(new_shape), data_);
    return t;
  }
  Tensor reshaped(std::vector<int64_t> new_shape) && {
    Tensor t;
    t.shape_ = std::move(new_shape);
    t.data_ = std::move(data_);
    t.validate_shape();
    if (static_cast<int64_t>(t.data_.size()) != t.numel_from_shape()) {
      throw std::invalid_argument("tensor: reshape element count mismatch");
    }
    return t;
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(out));
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  std::string shape_str() const {
    std::ostringstream os;
    os << '(';
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ')';
    return os.str();
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

 private:
  int64_t numel_from_shape() const {
    int64_t n = 1;
    for (int64_t e : shape_) n *= e;
    return n;
  }

  void validate_shape() const {
    if (shape_.empty() || shape_.size() > 5) {
      throw std::invalid_argument("tensor: rank must be in [1,5], got " +
                                  std::to_string(shape_.size()));
    }
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (shape_[i] < 1) {
        throw std::invalid_argument("tensor: extent on axis " + std::to_string(i) +
                                    " must be >= 1, got " + std::to_string(shape_[i]));
      }
    }
  }

  std::vector<int64_t> shape_;
  std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

/// mt19937_64 with a fixed normal/uniform sampling algorithm so that streams
/// are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  double uniform() {  // [0,1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Bounded integer in [0, n) by rejection on the top bits.
  uint64_t uniform_int(uint64_t n) {
    if (n == 0) throw std::invalid_argument("rng: uniform_int bound must be positive");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = eng_();
    while (v >= limit) v = eng_();
    return v % n;
  }

  /// Marsaglia polar method; one spare cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  template <typename T>
  void fill_normal(Tensor<T>& t, double stddev) {
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(normal() * stddev);
  }

  template <typename T>
  void fill_uniform(Tensor<T>& t, double lo, double hi) {
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(uniform(lo, hi));
  }

  /// Fisher-Yates with our bounded sampler (std::shuffle is not portable).
  template <typename V>
  void shuffle(V& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::string serialize() const {
    std::ostringstream os;
    os << eng_ << ' ' << (has_spare_ ? 1 : 0) << ' ';
    os.precision(17);
    os << spare_;
    return os.str();
  }

  void deserialize(const std::string& s) {
    std::istringstream is(s);
    int hs = 0;
    is >> eng_ >> hs >> spare_;
    if (!is) throw std::runtime_error("rng: failed to parse serialized state");
    has_spare_ = hs != 0;
  }

  /// Stable per-stream derivation (e.g. one stream per epoch).
  static uint64_t derive(uint64_t seed, uint64_t stream) {
    // splitmix64 over the pair
    uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sqzt
