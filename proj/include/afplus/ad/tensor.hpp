#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "afplus/core/error.hpp"

namespace afp::ad {

struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " + std::to_string(w) +
           ")";
  }
};

/// Dense real (batch, channels, height, width) array, row-major.
/// `grad` is filled by callers that want gradients stored next to values.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape s, double fill = 0.0) : shape_(s), data_(s.size(), fill) {
    require(s.n > 0 && s.c > 0 && s.h > 0 && s.w > 0, "Tensor4: every extent must be positive");
  }
  Tensor4(Shape s, std::vector<double> data) : shape_(s), data_(std::move(data)) {
    require(s.n > 0 && s.c > 0 && s.h > 0 && s.w > 0, "Tensor4: every extent must be positive");
    require(data_.size() == s.size(), "Tensor4: data size " + std::to_string(data_.size()) +
                                          " does not match shape " + s.str());
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::size_t index(int n, int c, int h, int w) const noexcept {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  double& at(int n, int c, int h, int w) noexcept { return data_[index(n, c, h, w)]; }
  double at(int n, int c, int h, int w) const noexcept { return data_[index(n, c, h, w)]; }

  bool all_finite() const noexcept {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const Tensor4& o) const { return shape_ == o.shape_ && data_ == o.data_; }

  std::optional<std::vector<double>> grad;

 private:
  Shape shape_{};
  std::vector<double> data_;
};

}  // namespace afp::ad
