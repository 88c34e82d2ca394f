#pragma once

#include <numbers>
#include <vector>

#include "afplus/core/complex_image.hpp"

namespace afp {

/// Mixed-radix Cooley-Tukey transform for one length. Lengths with large prime
/// factors fall back to an O(n*p) butterfly, which is fine for image sides.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n), twiddle_(n) {
    require(n > 0, "FftPlan: length must be positive");
    for (std::size_t k = 0; k < n; ++k) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle_[k] = {std::cos(a), std::sin(a)};
    }
    std::size_t m = n;
    for (std::size_t p : {4u, 2u, 3u, 5u}) {
      while (m % p == 0) {
        factors_.push_back(p);
        m /= p;
      }
    }
    for (std::size_t p = 7; p * p <= m; p += 2) {
      while (m % p == 0) {
        factors_.push_back(p);
        m /= p;
      }
    }
    if (m > 1) factors_.push_back(m);
  }

  std::size_t size() const noexcept { return n_; }

  /// Unnormalized forward transform, kernel exp(-2 pi i jk/n). In place on a
  /// strided sequence.
  void forward(cplx* x, std::size_t stride = 1) const { run(x, stride, false); }
  /// Unnormalized inverse transform, kernel exp(+2 pi i jk/n).
  void inverse(cplx* x, std::size_t stride = 1) const { run(x, stride, true); }

 private:
  void run(cplx* x, std::size_t stride, bool inv) const {
    in_.resize(n_);
    out_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) in_[i] = x[i * stride];
    transform(in_.data(), 1, out_.data(), n_, 0, inv);
    for (std::size_t i = 0; i < n_; ++i) x[i * stride] = out_[i];
  }

  cplx tw(std::size_t k, bool inv) const {
    const cplx w = twiddle_[k % n_];
    return inv ? std::conj(w) : w;
  }

  void transform(const cplx* in, std::size_t stride, cplx* out, std::size_t n, std::size_t fi,
                 bool inv) const {
    if (n == 1) {
      out[0] = in[0];
      return;
    }
    const std::size_t p = factors_[fi];
    const std::size_t m = n / p;
    for (std::size_t r = 0; r < p; ++r) transform(in + r * stride, stride * p, out + r * m, m, fi + 1, inv);

    const std::size_t step = n_ / n;  // twiddle index scale for length n
    if (p == 2) {
      for (std::size_t k = 0; k < m; ++k) {
        const cplx a = out[k];
        const cplx b = out[k + m] * tw(k * step, inv);
        out[k] = a + b;
        out[k + m] = a - b;
      }
      return;
    }
    if (p == 4) {
      const cplx j = inv ? cplx(0.0, 1.0) : cplx(0.0, -1.0);
      for (std::size_t k = 0; k < m; ++k) {
        const cplx a0 = out[k];
        const cplx a1 = out[k + m] * tw(k * step, inv);
        const cplx a2 = out[k + 2 * m] * tw(2 * k * step, inv);
        const cplx a3 = out[k + 3 * m] * tw(3 * k * step, inv);
        const cplx s02 = a0 + a2, d02 = a0 - a2;
        const cplx s13 = a1 + a3, d13 = (a1 - a3) * j;
        out[k] = s02 + s13;
        out[k + m] = d02 + d13;
        out[k + 2 * m] = s02 - s13;
        out[k + 3 * m] = d02 - d13;
      }
      return;
    }
    std::vector<cplx> t(p);
    const std::size_t pstep = n_ / p;
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t r = 0; r < p; ++r) t[r] = out[k + r * m] * tw(r * k * step, inv);
      for (std::size_t q = 0; q < p; ++q) {
        cplx acc = t[0];
        for (std::size_t r = 1; r < p; ++r) acc += t[r] * tw(((r * q) % p) * pstep, inv);
        out[k + q * m] = acc;
      }
    }
  }

  std::size_t n_;
  std::vector<cplx> twiddle_;
  std::vector<std::size_t> factors_;
  mutable std::vector<cplx> in_, out_;
};

namespace detail {

// Centered index i holds frequency i - n/2; shift so index 0 holds frequency 0.
inline void ifftshift2(const Array2D<cplx>& src, Array2D<cplx>& dst) {
  const int h = src.height(), w = src.width();
  for (int r = 0; r < h; ++r) {
    const int rs = (r + h / 2) % h;
    for (int c = 0; c < w; ++c) dst(r, c) = src(rs, (c + w / 2) % w);
  }
}

inline void fftshift2(const Array2D<cplx>& src, Array2D<cplx>& dst) {
  const int h = src.height(), w = src.width();
  for (int r = 0; r < h; ++r) {
    const int rs = (r - h / 2 + h) % h;
    for (int c = 0; c < w; ++c) dst(r, c) = src(rs, (c - w / 2 + w) % w);
  }
}

}  // namespace detail

/// Orthonormal centered 2-D DFT of an arbitrary array; DC lands at (h/2, w/2).
inline Array2D<cplx> centered_dft2(const Array2D<cplx>& x, bool inverse) {
  const int h = x.height(), w = x.width();
  Array2D<cplx> tmp(h, w), out(h, w);
  detail::ifftshift2(x, tmp);
  FftPlan rows(static_cast<std::size_t>(w)), cols(static_cast<std::size_t>(h));
  for (int r = 0; r < h; ++r) {
    if (inverse) rows.inverse(tmp.row(r).data());
    else rows.forward(tmp.row(r).data());
  }
  for (int c = 0; c < w; ++c) {
    if (inverse) cols.inverse(&tmp(0, c), static_cast<std::size_t>(w));
    else cols.forward(&tmp(0, c), static_cast<std::size_t>(w));
  }
  detail::fftshift2(tmp, out);
  const double scale = 1.0 / std::sqrt(static_cast<double>(h) * static_cast<double>(w));
  for (auto& v : out.values()) v *= scale;
  return out;
}

/// Image -> k-space.
inline ComplexImage fft2c(const ComplexImage& img) {
  require_domain(img, Domain::Image, "fft2c");
  return ComplexImage(centered_dft2(img.array(), false), Domain::KSpace);
}

/// K-space -> image; exact inverse of fft2c.
inline ComplexImage ifft2c(const ComplexImage& ksp) {
  require_domain(ksp, Domain::KSpace, "ifft2c");
  return ComplexImage(centered_dft2(ksp.array(), true), Domain::Image);
}

}  // namespace afp
