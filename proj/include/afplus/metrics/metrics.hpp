#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "afplus/core/array2d.hpp"
#include "afplus/core/error.hpp"

namespace afp {

struct MetricBundle {
  double psnr = 0.0;
  double ssim = 0.0;
  double ms_ssim = 0.0;
  double vif = 0.0;
};

namespace detail {

inline void require_same_shape(const RealImage& a, const RealImage& b, const char* op) {
  require(a.height() == b.height() && a.width() == b.width(),
          std::string(op) + ": shape mismatch " + std::to_string(a.height()) + "x" + std::to_string(a.width()) + " vs " +
              std::to_string(b.height()) + "x" + std::to_string(b.width()));
}

inline std::vector<double> gaussian_1d(int size, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) sum += k[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
  for (auto& v : k) v /= sum;
  return k;
}

/// 'valid' correlation with the separable kernel k (x) k.
inline RealImage filter_valid(const RealImage& img, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int h = img.height() - n + 1, w = img.width() - n + 1;
  require(h > 0 && w > 0, "filter_valid: image smaller than window");
  RealImage rows(img.height(), w);
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += k[j] * img(r, c + j);
      rows(r, c) = acc;
    }
  RealImage out(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += k[j] * rows(r + j, c);
      out(r, c) = acc;
    }
  return out;
}

inline RealImage product(const RealImage& a, const RealImage& b) {
  RealImage out(a.height(), a.width());
  for (std::size_t i = 0; i < a.size(); ++i) out.values()[i] = a.values()[i] * b.values()[i];
  return out;
}

struct SsimMaps {
  double mean_ssim;  // mean of l * cs
  double mean_cs;    // mean of cs
};

inline SsimMaps ssim_maps(const RealImage& x, const RealImage& y, double range) {
  static const auto win = gaussian_1d(11, 1.5);
  const double c1 = (0.01 * range) * (0.01 * range), c2 = (0.03 * range) * (0.03 * range);
  const auto mx = filter_valid(x, win), my = filter_valid(y, win);
  const auto sxx = filter_valid(product(x, x), win), syy = filter_valid(product(y, y), win),
             sxy = filter_valid(product(x, y), win);
  double s = 0.0, cs = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double ux = mx.values()[i], uy = my.values()[i];
    const double vx = sxx.values()[i] - ux * ux, vy = syy.values()[i] - uy * uy, vxy = sxy.values()[i] - ux * uy;
    const double c = (2.0 * vxy + c2) / (vx + vy + c2);
    cs += c;
    s += (2.0 * ux * uy + c1) / (ux * ux + uy * uy + c1) * c;
  }
  const double n = static_cast<double>(mx.size());
  return {s / n, cs / n};
}

inline double dynamic_range(const RealImage& ref) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : ref.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return hi > lo ? hi - lo : 1.0;
}

inline RealImage halve(const RealImage& img) {
  RealImage out(img.height() / 2, img.width() / 2);
  for (int r = 0; r < out.height(); ++r)
    for (int c = 0; c < out.width(); ++c)
      out(r, c) = 0.25 * (img(2 * r, 2 * c) + img(2 * r + 1, 2 * c) + img(2 * r, 2 * c + 1) + img(2 * r + 1, 2 * c + 1));
  return out;
}

inline double signed_pow(double x, double e) { return x < 0.0 ? -std::pow(-x, e) : std::pow(x, e); }

}  // namespace detail

inline constexpr std::array<double, 5> kMsSsimWeights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
inline constexpr int kSsimWindow = 11;

/// 10 log10(peak^2 / MSE), peak = max(ref). +inf when the images are identical.
inline double psnr(const RealImage& ref, const RealImage& test) {
  detail::require_same_shape(ref, test, "psnr");
  double peak = -std::numeric_limits<double>::infinity(), se = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    peak = std::max(peak, ref.values()[i]);
    const double d = ref.values()[i] - test.values()[i];
    se += d * d;
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  require(peak > 0.0, "psnr: reference peak must be positive");
  return 10.0 * std::log10(peak * peak / (se / static_cast<double>(ref.size())));
}

/// Mean SSIM over all fully contained 11x11 Gaussian (sigma 1.5) windows,
/// K1 = 0.01, K2 = 0.03, dynamic range max(ref) - min(ref).
inline double ssim(const RealImage& ref, const RealImage& test) {
  detail::require_same_shape(ref, test, "ssim");
  require(std::min(ref.height(), ref.width()) >= kSsimWindow, "ssim: images must be at least 11x11");
  return detail::ssim_maps(ref, test, detail::dynamic_range(ref)).mean_ssim;
}

/// Multi-scale SSIM with one weight per scale (2x2 mean + decimation between
/// scales). Needs min side >= 11 * 2^(scales - 1). Negative per-scale terms
/// keep their sign under the fractional power.
inline double ms_ssim(const RealImage& ref, const RealImage& test,
                      std::span<const double> weights = kMsSsimWeights) {
  detail::require_same_shape(ref, test, "ms_ssim");
  require(!weights.empty(), "ms_ssim: need at least one scale");
  const int need = kSsimWindow << (weights.size() - 1);
  require(std::min(ref.height(), ref.width()) >= need,
          "ms_ssim: images must be at least " + std::to_string(need) + "x" + std::to_string(need) + " for " +
              std::to_string(weights.size()) + " scales");
  const double range = detail::dynamic_range(ref);
  RealImage x = ref, y = test;
  double out = 1.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const auto m = detail::ssim_maps(x, y, range);
    const bool last = j + 1 == weights.size();
    out *= detail::signed_pow(last ? m.mean_ssim : m.mean_cs, weights[j]);
    if (!last) {
      x = detail::halve(x);
      y = detail::halve(y);
    }
  }
  return out;
}

/// ms_ssim with as many of the standard scales as the image size allows,
/// their weights renormalized to sum to one.
inline double ms_ssim_adaptive(const RealImage& ref, const RealImage& test) {
  const int side = std::min(ref.height(), ref.width());
  require(side >= kSsimWindow, "ms_ssim_adaptive: images must be at least 11x11");
  std::size_t scales = 1;
  while (scales < kMsSsimWeights.size() && side >= (kSsimWindow << scales)) ++scales;
  std::vector<double> w(kMsSsimWeights.begin(), kMsSsimWeights.begin() + static_cast<long>(scales));
  double sum = 0.0;
  for (double v : w) sum += v;
  for (auto& v : w) v /= sum;
  return ms_ssim(ref, test, w);
}

/// Pixel-domain visual information fidelity over four scales, noise
/// variance 2 on a 0..255 mapping of the reference range (applied jointly).
inline double vif(const RealImage& ref, const RealImage& test) {
  detail::require_same_shape(ref, test, "vif");
  require(std::min(ref.height(), ref.width()) >= 64, "vif: images must be at least 64x64");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : ref.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double k = hi > lo ? 255.0 / (hi - lo) : 1.0;
  RealImage x(ref.height(), ref.width()), y(ref.height(), ref.width());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    x.values()[i] = k * (ref.values()[i] - lo);
    y.values()[i] = k * (test.values()[i] - lo);
  }
  constexpr double sigma_nsq = 2.0, tiny = 1e-10;
  double num = 0.0, den = 0.0;
  for (int scale = 1; scale <= 4; ++scale) {
    const int n = (1 << (4 - scale + 1)) + 1;
    const auto win = detail::gaussian_1d(n, n / 5.0);
    if (scale > 1) {
      auto fx = detail::filter_valid(x, win), fy = detail::filter_valid(y, win);
      RealImage dx((fx.height() + 1) / 2, (fx.width() + 1) / 2), dy(dx.height(), dx.width());
      for (int r = 0; r < dx.height(); ++r)
        for (int c = 0; c < dx.width(); ++c) {
          dx(r, c) = fx(2 * r, 2 * c);
          dy(r, c) = fy(2 * r, 2 * c);
        }
      x = std::move(dx);
      y = std::move(dy);
    }
    const auto mx = detail::filter_valid(x, win), my = detail::filter_valid(y, win);
    const auto sxx = detail::filter_valid(detail::product(x, x), win);
    const auto syy = detail::filter_valid(detail::product(y, y), win);
    const auto sxy = detail::filter_valid(detail::product(x, y), win);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double ux = mx.values()[i], uy = my.values()[i];
      double s1 = std::max(0.0, sxx.values()[i] - ux * ux);
      const double s2 = std::max(0.0, syy.values()[i] - uy * uy);
      const double s12 = sxy.values()[i] - ux * uy;
      double g = s12 / (s1 + tiny);
      double sv = s2 - g * s12;
      if (s1 < tiny) {
        g = 0.0;
        sv = s2;
        s1 = 0.0;
      }
      if (s2 < tiny) {
        g = 0.0;
        sv = 0.0;
      }
      if (g < 0.0) {
        sv = s2;
        g = 0.0;
      }
      sv = std::max(sv, tiny);
      num += std::log10(1.0 + g * g * s1 / (sv + sigma_nsq));
      den += std::log10(1.0 + s1 / sigma_nsq);
    }
  }
  return den > 0.0 ? num / den : 1.0;
}

/// All four metrics; MS-SSIM uses as many scales as fit (five from 176 px up).
inline MetricBundle compute_metrics(const RealImage& ref, const RealImage& test) {
  return {psnr(ref, test), ssim(ref, test), ms_ssim_adaptive(ref, test), vif(ref, test)};
}

}  // namespace afp
