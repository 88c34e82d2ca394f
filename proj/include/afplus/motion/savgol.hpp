#pragma once

#include <cmath>
#include <vector>

#include "afplus/core/error.hpp"

namespace afp {

/// Savitzky-Golay smoother. Each output is the value at its own position of
/// the least-squares polynomial fitted to a `window`-point neighborhood; the
/// first and last half-windows reuse the edge windows' fits.
///
/// The fit is a projection onto a discrete orthonormal polynomial basis,
/// built once by modified Gram-Schmidt over the window positions.
class SavitzkyGolay {
 public:
  SavitzkyGolay(int window, int order) : window_(window), order_(order) {
    require(window >= 3 && window % 2 == 1, "SavitzkyGolay: window must be odd and >= 3");
    require(order >= 0 && order < window, "SavitzkyGolay: polynomial order must be < window");
    const int m = order + 1;
    basis_.assign(static_cast<std::size_t>(m) * window, 0.0);
    const int half = window / 2;
    for (int j = 0; j < m; ++j) {
      double* q = &basis_[static_cast<std::size_t>(j) * window];
      for (int i = 0; i < window; ++i) q[i] = std::pow(static_cast<double>(i - half), j);
      for (int pass = 0; pass < 2; ++pass) {
        for (int k = 0; k < j; ++k) {
          const double* p = &basis_[static_cast<std::size_t>(k) * window];
          double dot = 0.0;
          for (int i = 0; i < window; ++i) dot += p[i] * q[i];
          for (int i = 0; i < window; ++i) q[i] -= dot * p[i];
        }
      }
      double norm = 0.0;
      for (int i = 0; i < window; ++i) norm += q[i] * q[i];
      norm = std::sqrt(norm);
      for (int i = 0; i < window; ++i) q[i] /= norm;
    }
  }

  int window() const noexcept { return window_; }
  int order() const noexcept { return order_; }

  /// Weight of window sample `i` in the fitted value at window position `e`.
  double weight(int e, int i) const {
    double s = 0.0;
    for (int j = 0; j <= order_; ++j) {
      const double* q = &basis_[static_cast<std::size_t>(j) * window_];
      s += q[e] * q[i];
    }
    return s;
  }

  std::vector<double> smooth(const std::vector<double>& y) const {
    const int n = static_cast<int>(y.size());
    require(n >= window_, "SavitzkyGolay: sequence shorter than the window");
    const int half = window_ / 2;
    std::vector<double> out(y.size());
    for (int t = 0; t < n; ++t) {
      int start = t - half, e = half;
      if (t < half) {
        start = 0;
        e = t;
      } else if (t >= n - half) {
        start = n - window_;
        e = t - start;
      }
      double s = 0.0;
      for (int i = 0; i < window_; ++i) s += weight(e, i) * y[start + i];
      out[t] = s;
    }
    return out;
  }

 private:
  int window_;
  int order_;
  std::vector<double> basis_;
};

}  // namespace afp
