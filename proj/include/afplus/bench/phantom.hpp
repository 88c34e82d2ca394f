#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "afplus/core/array2d.hpp"
#include "afplus/core/random.hpp"

namespace afp {

namespace detail {

struct Ellipse {
  double intensity, a, b, x0, y0, theta_deg;
};

inline bool inside(const Ellipse& e, double x, double y) {
  const double t = e.theta_deg * std::numbers::pi / 180.0;
  const double xr = (x - e.x0) * std::cos(t) + (y - e.y0) * std::sin(t);
  const double yr = -(x - e.x0) * std::sin(t) + (y - e.y0) * std::cos(t);
  return (xr * xr) / (e.a * e.a) + (yr * yr) / (e.b * e.b) <= 1.0;
}

// Pixel-center coordinates in [-1, 1] with +y pointing up.
inline double px_x(int c, int w) { return (2.0 * c + 1.0) / w - 1.0; }
inline double px_y(int r, int h) { return 1.0 - (2.0 * r + 1.0) / h; }

}  // namespace detail

/// Modified (Toft) Shepp-Logan head phantom: peak 1.0, background 0.0.
inline RealImage shepp_logan(int height, int width) {
  static constexpr std::array<detail::Ellipse, 10> kEllipses{{
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
      {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
      {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},
      {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
      {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},
      {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
      {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},
      {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
      {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},
      {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
  }};
  RealImage img(height, width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double x = detail::px_x(c, width), y = detail::px_y(r, height);
      double v = 0.0;
      for (const auto& e : kEllipses)
        if (detail::inside(e, x, y)) v += e.intensity;
      img(r, c) = std::abs(v) < 1e-12 ? 0.0 : v;
    }
  }
  return img;
}

/// Randomized anatomy-like phantom: an elliptical body with smooth intensity
/// ramps, inner ellipses and convex polygons with sharp edges. Normalized to
/// peak 1.0 with a zero background.
inline RealImage random_phantom(int height, int width, Rng& rng) {
  RealImage img(height, width);
  const detail::Ellipse body{rng.uniform(0.5, 0.8), rng.uniform(0.6, 0.9), rng.uniform(0.6, 0.9),
                             rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(0.0, 180.0)};
  const double gx = rng.uniform(-0.2, 0.2), gy = rng.uniform(-0.2, 0.2);

  std::vector<detail::Ellipse> inner;
  const int n_ell = 3 + static_cast<int>(rng.uniform() * 4.0);
  for (int i = 0; i < n_ell; ++i) {
    inner.push_back({rng.uniform(-0.4, 0.5), rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3),
                     rng.uniform(-0.45, 0.45), rng.uniform(-0.45, 0.45), rng.uniform(0.0, 180.0)});
  }

  struct Polygon {
    std::vector<std::array<double, 2>> v;
    double intensity;
  };
  std::vector<Polygon> polys;
  const int n_poly = 1 + static_cast<int>(rng.uniform() * 3.0);
  for (int i = 0; i < n_poly; ++i) {
    const int sides = 3 + static_cast<int>(rng.uniform() * 3.0);
    const double cx = rng.uniform(-0.4, 0.4), cy = rng.uniform(-0.4, 0.4), rad = rng.uniform(0.08, 0.25);
    const double start = rng.uniform(0.0, 2.0 * std::numbers::pi);
    Polygon p{{}, rng.uniform(-0.3, 0.4)};
    for (int k = 0; k < sides; ++k) {
      const double a = start + 2.0 * std::numbers::pi * k / sides;
      p.v.push_back({cx + rad * std::cos(a), cy + rad * std::sin(a)});
    }
    polys.push_back(std::move(p));
  }
  auto in_convex = [](const Polygon& p, double x, double y) {
    const std::size_t n = p.v.size();
    for (std::size_t k = 0; k < n; ++k) {
      const auto& a = p.v[k];
      const auto& b = p.v[(k + 1) % n];
      if ((b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]) < 0.0) return false;
    }
    return true;
  };

  double peak = 0.0;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double x = detail::px_x(c, width), y = detail::px_y(r, height);
      if (!detail::inside(body, x, y)) continue;
      double v = body.intensity + gx * x + gy * y;
      for (const auto& e : inner)
        if (detail::inside(e, x, y)) v += e.intensity;
      for (const auto& p : polys)
        if (in_convex(p, x, y)) v += p.intensity;
      v = std::max(v, 0.02);
      img(r, c) = v;
      peak = std::max(peak, v);
    }
  }
  if (peak > 0.0)
    for (auto& v : img.values()) v /= peak;
  return img;
}

}  // namespace afp
