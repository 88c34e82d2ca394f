#pragma once

#include <cmath>
#include <vector>

#include "afplus/core/error.hpp"

namespace afp {

/// One k-space sample location in cycles per field of view.
struct SamplePoint {
  double ky = 0.0;
  double kx = 0.0;
};

/// Row-major list of sample coordinates matching an H x W k-space layout.
class SampleGrid {
 public:
  SampleGrid() = default;
  SampleGrid(int height, int width, std::vector<SamplePoint> coords)
      : height_(height), width_(width), coords_(std::move(coords)) {}

  /// Integer frequencies [-H/2, H/2) x [-W/2, W/2).
  static SampleGrid canonical(int height, int width) {
    require(height > 0 && width > 0, "SampleGrid: non-positive size");
    std::vector<SamplePoint> c;
    c.reserve(static_cast<std::size_t>(height) * width);
    for (int r = 0; r < height; ++r)
      for (int q = 0; q < width; ++q) c.push_back({double(r - height / 2), double(q - width / 2)});
    return {height, width, std::move(c)};
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return coords_.size(); }
  const std::vector<SamplePoint>& points() const noexcept { return coords_; }
  std::vector<SamplePoint>& points() noexcept { return coords_; }
  const SamplePoint& operator[](std::size_t i) const { return coords_[i]; }

  /// Rotate the points of row `r` by `alpha` radians with the matrix
  /// [cos a, sin a; -sin a, cos a] applied to (kx, ky).
  void rotate_row(int r, double alpha) {
    const double c = std::cos(alpha), s = std::sin(alpha);
    for (int q = 0; q < width_; ++q) {
      auto& p = coords_[static_cast<std::size_t>(r) * width_ + q];
      const double kx = c * p.kx + s * p.ky;
      const double ky = -s * p.kx + c * p.ky;
      p = {ky, kx};
    }
  }

  SampleGrid rotated(double alpha) const {
    SampleGrid g = *this;
    for (int r = 0; r < height_; ++r) g.rotate_row(r, alpha);
    return g;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<SamplePoint> coords_;
};

/// Rotated coordinate of a canonical point, shared by the plain and the
/// differentiable rotation paths.
inline SamplePoint rotate_point(double ky, double kx, double alpha) {
  const double c = std::cos(alpha), s = std::sin(alpha);
  return {-s * kx + c * ky, c * kx + s * ky};
}

}  // namespace afp
