#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "afplus/core/error.hpp"

namespace afp {

/// Beatty et al. shape parameter for a kernel of `width` oversampled-grid
/// cells at oversampling factor `osf`.
inline double beatty_beta(double width, double osf) {
  const double t = (width / osf) * (width / osf) * (osf - 0.5) * (osf - 0.5) - 0.8;
  require(t > 0.0, "beatty_beta: kernel too narrow for this oversampling factor");
  return std::numbers::pi * std::sqrt(t);
}

/// Kaiser-Bessel interpolation kernel on [-W/2, W/2] with its edge pedestal
/// removed: phi(t) = I0(beta * sqrt(1 - (2t/W)^2)) - 1. The kernel is then
/// continuous at the support boundary, so derivatives of interpolated values
/// are consistent with finite differences.
///
/// I0(beta*sqrt(s)) is an entire power series in s, so phi and its derivatives
/// are evaluated from one polynomial in s = 1 - (2t/W)^2.
class KaiserBessel {
 public:
  static constexpr int kMaxDerivative = 3;

  KaiserBessel(double width, double beta) : width_(width), beta_(beta) {
    require(width > 0.0 && beta > 0.0, "KaiserBessel: width and beta must be positive");
    const double q = beta * beta / 4.0;
    double a = 1.0;
    double total = 1.0;
    coeffs_.push_back(0.0);  // pedestal removed
    for (int k = 1; k < 200; ++k) {
      a *= q / (static_cast<double>(k) * static_cast<double>(k));
      coeffs_.push_back(a);
      total += a;
      if (a < 1e-18 * total && k > 4) break;
    }
  }

  double width() const noexcept { return width_; }
  double beta() const noexcept { return beta_; }
  double half_width() const noexcept { return 0.5 * width_; }

  /// d^order/dt^order phi(t), order in [0, 3].
  double operator()(double t, int order = 0) const {
    const double x = 2.0 * t / width_;
    const double s = 1.0 - x * x;
    if (s <= 0.0) return 0.0;
    const auto q = poly(s);
    const double ds = -8.0 * t / (width_ * width_);
    const double dds = -8.0 / (width_ * width_);
    switch (order) {
      case 0: return q[0];
      case 1: return q[1] * ds;
      case 2: return q[2] * ds * ds + q[1] * dds;
      case 3: return q[3] * ds * ds * ds + 3.0 * q[2] * ds * dds;
      default: throw ContractViolation("KaiserBessel: derivative order must be in [0, 3]");
    }
  }

  /// Continuous Fourier transform of the kernel at frequency xi (cycles per
  /// grid cell).
  double fourier(double xi) const {
    const double a = std::numbers::pi * width_ * xi;
    const double z2 = beta_ * beta_ - a * a;
    double full;
    if (z2 > 1e-12) {
      const double z = std::sqrt(z2);
      full = width_ * std::sinh(z) / z;
    } else if (z2 < -1e-12) {
      const double z = std::sqrt(-z2);
      full = width_ * std::sin(z) / z;
    } else {
      full = width_;
    }
    const double pedestal = std::abs(a) < 1e-12 ? width_ : width_ * std::sin(a) / a;
    return full - pedestal;
  }

 private:
  // Q(s) and its first three derivatives by Horner's rule.
  std::array<double, 4> poly(double s) const {
    double p0 = 0.0, p1 = 0.0, p2 = 0.0, p3 = 0.0;
    for (std::size_t k = coeffs_.size(); k-- > 0;) {
      p3 = p3 * s + 3.0 * p2;
      p2 = p2 * s + 2.0 * p1;
      p1 = p1 * s + p0;
      p0 = p0 * s + coeffs_[k];
    }
    return {p0, p1, p2, p3};
  }

  double width_;
  double beta_;
  std::vector<double> coeffs_;
};

}  // namespace afp
