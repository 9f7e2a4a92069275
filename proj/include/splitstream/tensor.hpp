#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "splitstream/errors.hpp"

namespace splitstream {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

inline std::string to_string(const Shape& dims);

// Dense row-major array. Spatial tensors are laid out H x W x C.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape dims, T fill = T{0})
      : dims_(std::move(dims)), data_(element_count(dims_), fill) {
    validate_dims();
  }

  BasicTensor(Shape dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
    validate_dims();
    if (data_.size() != element_count(dims_)) {
      throw ConfigError("tensor data length " + std::to_string(data_.size()) +
                        " does not match dims " + to_string(dims_));
    }
  }

  const Shape& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  // H x W x C accessor.
  T& at(std::size_t h, std::size_t w, std::size_t c) noexcept {
    return data_[(h * dims_[1] + w) * dims_[2] + c];
  }
  const T& at(std::size_t h, std::size_t w, std::size_t c) const noexcept {
    return data_[(h * dims_[1] + w) * dims_[2] + c];
  }

  BasicTensor reshaped(Shape dims) const {
    return BasicTensor(std::move(dims), data_);
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(dims_, std::move(out));
  }

  bool all_finite() const noexcept {
    for (const T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  void validate_dims() const {
    for (const std::size_t d : dims_) {
      if (d == 0) throw ConfigError("tensor dims must be positive, got " + to_string(dims_));
    }
  }

  Shape dims_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

inline std::string to_string(const Shape& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

}  // namespace splitstream
