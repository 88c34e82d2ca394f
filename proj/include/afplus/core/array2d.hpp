#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "afplus/core/error.hpp"

namespace afp {

using cplx = std::complex<double>;

/// Dense row-major 2-D array.
template <class T>
class Array2D {
 public:
  using value_type = T;

  Array2D() = default;
  Array2D(int height, int width, T fill = T{})
      : height_(height), width_(width), data_(checked_size(height, width), fill) {}
  Array2D(int height, int width, std::vector<T> data)
      : height_(height), width_(width), data_(std::move(data)) {
    require(data_.size() == checked_size(height, width), "Array2D: data size does not match shape");
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(int r, int c) noexcept { return data_[static_cast<std::size_t>(r) * width_ + c]; }
  const T& operator()(int r, int c) const noexcept {
    return data_[static_cast<std::size_t>(r) * width_ + c];
  }

  std::span<T> row(int r) noexcept {
    return {data_.data() + static_cast<std::size_t>(r) * width_, static_cast<std::size_t>(width_)};
  }
  std::span<const T> row(int r) const noexcept {
    return {data_.data() + static_cast<std::size_t>(r) * width_, static_cast<std::size_t>(width_)};
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  bool same_shape(const Array2D& o) const noexcept {
    return height_ == o.height_ && width_ == o.width_;
  }

  friend bool operator==(const Array2D&, const Array2D&) = default;

 private:
  static std::size_t checked_size(int h, int w) {
    require(h >= 0 && w >= 0, "Array2D: negative dimension");
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

using RealImage = Array2D<double>;

template <class T>
bool all_finite(const Array2D<T>& a) {
  return std::all_of(a.values().begin(), a.values().end(), [](const T& v) {
    if constexpr (std::is_same_v<T, cplx>) {
      return std::isfinite(v.real()) && std::isfinite(v.imag());
    } else {
      return std::isfinite(v);
    }
  });
}

inline double l2_norm(std::span<const cplx> v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return std::sqrt(s);
}

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// ||a - b|| / ||b||.
template <class T>
double relative_l2(const Array2D<T>& a, const Array2D<T>& b) {
  require(a.same_shape(b), "relative_l2: shape mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a.values()[i] - b.values()[i]);
    den += std::norm(b.values()[i]);
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace afp
