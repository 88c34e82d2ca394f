#pragma once

// Brute-force reference computations used only by the test suites. Nothing
// here shares code paths with the library implementations it checks.

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "afplus/core/array2d.hpp"

namespace oracle {

using afp::Array2D;
using afp::cplx;

/// Direct O(N^4) centered orthonormal DFT.
inline Array2D<cplx> dft2(const Array2D<cplx>& x, bool inverse) {
  const int h = x.height(), w = x.width();
  const double sign = inverse ? 1.0 : -1.0;
  Array2D<cplx> out(h, w);
  for (int ky = 0; ky < h; ++ky)
    for (int kx = 0; kx < w; ++kx) {
      cplx acc = 0.0;
      for (int ny = 0; ny < h; ++ny)
        for (int nx = 0; nx < w; ++nx) {
          const double ph = sign * 2.0 * std::numbers::pi *
                            (double(ky - h / 2) * (ny - h / 2) / h + double(kx - w / 2) * (nx - w / 2) / w);
          acc += x(ny, nx) * cplx(std::cos(ph), std::sin(ph));
        }
      out(ky, kx) = acc / std::sqrt(double(h) * w);
    }
  return out;
}

/// Non-uniform DFT of the image underlying a centered spectrum: the value of
/// its periodic continuation at (ky, kx).
inline cplx ndft_point(const Array2D<cplx>& image, double ky, double kx) {
  const int h = image.height(), w = image.width();
  cplx acc = 0.0;
  for (int ny = 0; ny < h; ++ny)
    for (int nx = 0; nx < w; ++nx) {
      const double ph = -2.0 * std::numbers::pi * (ky * (ny - h / 2) / h + kx * (nx - w / 2) / w);
      acc += image(ny, nx) * cplx(std::cos(ph), std::sin(ph));
    }
  return acc / std::sqrt(double(h) * w);
}

inline Array2D<cplx> random_complex(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Array2D<cplx> a(h, w);
  for (auto& v : a.values()) v = {n(rng), n(rng)};
  return a;
}

/// Savitzky-Golay smoothing by explicit least-squares polynomial fits: for
/// interior points the centered window is fitted, for the first/last half
/// window the edge window is fitted and evaluated at the point.
inline std::vector<double> savgol_polyfit(const std::vector<double>& y, int window, int order) {
  const int n = static_cast<int>(y.size());
  const int half = window / 2;
  std::vector<double> out(y.size());
  auto fit_eval = [&](int start, double t_eval) {
    // Normal equations of the Vandermonde system in local coordinates.
    const int m = order + 1;
    std::vector<double> ata(m * m, 0.0), aty(m, 0.0);
    for (int i = 0; i < window; ++i) {
      const double t = static_cast<double>(i - half);
      std::vector<double> row(m);
      double p = 1.0;
      for (int j = 0; j < m; ++j) { row[j] = p; p *= t; }
      for (int a = 0; a < m; ++a) {
        aty[a] += row[a] * y[start + i];
        for (int b = 0; b < m; ++b) ata[a * m + b] += row[a] * row[b];
      }
    }
    // Gaussian elimination with partial pivoting.
    for (int c = 0; c < m; ++c) {
      int piv = c;
      for (int r = c + 1; r < m; ++r) if (std::abs(ata[r * m + c]) > std::abs(ata[piv * m + c])) piv = r;
      for (int k = 0; k < m; ++k) std::swap(ata[c * m + k], ata[piv * m + k]);
      std::swap(aty[c], aty[piv]);
      for (int r = c + 1; r < m; ++r) {
        const double f = ata[r * m + c] / ata[c * m + c];
        for (int k = c; k < m; ++k) ata[r * m + k] -= f * ata[c * m + k];
        aty[r] -= f * aty[c];
      }
    }
    std::vector<double> coef(m);
    for (int r = m - 1; r >= 0; --r) {
      double s = aty[r];
      for (int k = r + 1; k < m; ++k) s -= ata[r * m + k] * coef[k];
      coef[r] = s / ata[r * m + r];
    }
    double v = 0.0, p = 1.0;
    for (int j = 0; j < m; ++j) { v += coef[j] * p; p *= t_eval; }
    return v;
  };
  for (int i = 0; i < n; ++i) {
    if (i < half) out[i] = fit_eval(0, static_cast<double>(i - half));
    else if (i >= n - half) out[i] = fit_eval(n - window, static_cast<double>(i - (n - window) - half));
    else out[i] = fit_eval(i - half, 0.0);
  }
  return out;
}

}  // namespace oracle

namespace oracle {

/// Keys cubic convolution (a = -0.5) sample of a real image at fractional
/// (row, col); zero outside the image.
inline double bicubic(const Array2D<double>& img, double row, double col) {
  auto k = [](double t) {
    t = std::abs(t);
    const double a = -0.5;
    if (t <= 1.0) return (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
    if (t < 2.0) return a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a;
    return 0.0;
  };
  const int r0 = static_cast<int>(std::floor(row)), c0 = static_cast<int>(std::floor(col));
  double acc = 0.0;
  for (int i = -1; i <= 2; ++i)
    for (int j = -1; j <= 2; ++j) {
      const int r = r0 + i, c = c0 + j;
      if (r < 0 || c < 0 || r >= img.height() || c >= img.width()) continue;
      acc += img(r, c) * k(row - r) * k(col - c);
    }
  return acc;
}

/// out(p) = img(R p) about the array center with R = [cos a, sin a; -sin a, cos a]
/// acting on (x, y) = (column, row) offsets.
inline Array2D<double> rotate_image(const Array2D<double>& img, double alpha) {
  const int h = img.height(), w = img.width();
  const double c = std::cos(alpha), s = std::sin(alpha);
  Array2D<double> out(h, w);
  for (int r = 0; r < h; ++r)
    for (int q = 0; q < w; ++q) {
      const double px = q - w / 2, py = r - h / 2;
      const double sx = c * px + s * py, sy = -s * px + c * py;
      out(r, q) = bicubic(img, sy + h / 2, sx + w / 2);
    }
  return out;
}

inline double psnr_crop(const Array2D<double>& ref, const Array2D<double>& test, double keep) {
  const int h = ref.height(), w = ref.width();
  const int r0 = static_cast<int>(std::lround(h * (1.0 - keep) / 2)), c0 = static_cast<int>(std::lround(w * (1.0 - keep) / 2));
  double peak = 0.0, mse = 0.0;
  int n = 0;
  for (int r = r0; r < h - r0; ++r)
    for (int c = c0; c < w - c0; ++c) {
      peak = std::max(peak, ref(r, c));
      mse += (ref(r, c) - test(r, c)) * (ref(r, c) - test(r, c));
      ++n;
    }
  return 10.0 * std::log10(peak * peak / (mse / n));
}

}  // namespace oracle

namespace oracle {

struct SsimParts {
  double ssim;
  double cs;
};

/// SSIM written window by window: a 2-D Gaussian weight evaluated directly,
/// every window's moments accumulated from scratch.
inline SsimParts literal_ssim(const Array2D<double>& x, const Array2D<double>& y, double range) {
  const int n = 11;
  const double sigma = 1.5;
  double w[11][11], total = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) total += w[a][b] = std::exp(-((a - 5.0) * (a - 5.0) + (b - 5.0) * (b - 5.0)) / (2 * sigma * sigma));
  const double c1 = std::pow(0.01 * range, 2), c2 = std::pow(0.03 * range, 2);
  double s = 0.0, cs = 0.0;
  int count = 0;
  for (int i = 0; i + n <= x.height(); ++i)
    for (int j = 0; j + n <= x.width(); ++j) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          const double k = w[a][b] / total, u = x(i + a, j + b), v = y(i + a, j + b);
          mx += k * u;
          my += k * v;
          sxx += k * u * u;
          syy += k * v * v;
          sxy += k * u * v;
        }
      const double vx = sxx - mx * mx, vy = syy - my * my, vxy = sxy - mx * my;
      const double c = (2 * vxy + c2) / (vx + vy + c2);
      cs += c;
      s += (2 * mx * my + c1) / (mx * mx + my * my + c1) * c;
      ++count;
    }
  return {s / count, cs / count};
}

inline double literal_range(const Array2D<double>& ref) {
  double lo = ref(0, 0), hi = ref(0, 0);
  for (int r = 0; r < ref.height(); ++r)
    for (int c = 0; c < ref.width(); ++c) {
      lo = std::min(lo, ref(r, c));
      hi = std::max(hi, ref(r, c));
    }
  return hi - lo;
}

inline double literal_psnr(const Array2D<double>& ref, const Array2D<double>& test) {
  double peak = ref(0, 0), mse = 0.0;
  for (int r = 0; r < ref.height(); ++r)
    for (int c = 0; c < ref.width(); ++c) {
      peak = std::max(peak, ref(r, c));
      mse += (ref(r, c) - test(r, c)) * (ref(r, c) - test(r, c));
    }
  mse /= ref.height() * ref.width();
  return 10.0 * std::log10(peak * peak / mse);
}

inline double literal_ms_ssim(Array2D<double> x, Array2D<double> y, const std::vector<double>& weights) {
  const double range = literal_range(x);
  double out = 1.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const auto p = literal_ssim(x, y, range);
    const double v = j + 1 == weights.size() ? p.ssim : p.cs;
    out *= (v < 0 ? -1.0 : 1.0) * std::pow(std::abs(v), weights[j]);
    Array2D<double> hx(x.height() / 2, x.width() / 2), hy(hx.height(), hx.width());
    for (int r = 0; r < hx.height(); ++r)
      for (int c = 0; c < hx.width(); ++c) {
        hx(r, c) = (x(2 * r, 2 * c) + x(2 * r + 1, 2 * c) + x(2 * r, 2 * c + 1) + x(2 * r + 1, 2 * c + 1)) / 4;
        hy(r, c) = (y(2 * r, 2 * c) + y(2 * r + 1, 2 * c) + y(2 * r, 2 * c + 1) + y(2 * r + 1, 2 * c + 1)) / 4;
      }
    x = hx;
    y = hy;
  }
  return out;
}

}  // namespace oracle
