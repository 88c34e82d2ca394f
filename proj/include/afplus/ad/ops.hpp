#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include "afplus/ad/graph.hpp"
#include "afplus/core/fft.hpp"

namespace afp::ad {

namespace detail {

inline void require_same(const Var& a, const Var& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
}

template <class F>
Tensor4 map(const Tensor4& a, F f) {
  Tensor4 out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <class F>
Tensor4 zip(const Tensor4& a, const Tensor4& b, F f) {
  Tensor4 out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

// Threshold below which safe_recip treats its argument as zero.
inline constexpr double kTiny = 1e-300;

}  // namespace detail

Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double k);
Var mul_const(const Var& a, const Tensor4& k);
Var expand(const Var& a, Shape to);
Var reduce_to(const Var& a, Shape to);

inline Var add(const Var& a, const Var& b) {
  detail::require_same(a, b, "add");
  return record(detail::zip(a.value(), b.value(), [](double x, double y) { return x + y; }), {a, b},
                [](const Var&, const Var& g) { return std::vector<Var>{g, g}; });
}

inline Var neg(const Var& a) { return scale(a, -1.0); }

inline Var sub(const Var& a, const Var& b) {
  detail::require_same(a, b, "sub");
  return record(detail::zip(a.value(), b.value(), [](double x, double y) { return x - y; }), {a, b},
                [](const Var&, const Var& g) { return std::vector<Var>{g, neg(g)}; });
}

inline Var mul(const Var& a, const Var& b) {
  detail::require_same(a, b, "mul");
  return record(detail::zip(a.value(), b.value(), [](double x, double y) { return x * y; }), {a, b},
                [](const Var& self, const Var& g) {
                  const auto& in = self.get()->inputs;
                  return std::vector<Var>{mul(g, in[1]), mul(g, in[0])};
                });
}

inline Var scale(const Var& a, double k) {
  return record(detail::map(a.value(), [k](double x) { return k * x; }), {a},
                [k](const Var&, const Var& g) { return std::vector<Var>{scale(g, k)}; });
}

inline Var add_scalar(const Var& a, double k) {
  return record(detail::map(a.value(), [k](double x) { return x + k; }), {a},
                [](const Var&, const Var& g) { return std::vector<Var>{g}; });
}

/// Elementwise product with a constant tensor (masks, coordinate grids).
inline Var mul_const(const Var& a, const Tensor4& k) {
  require(a.shape() == k.shape(), "mul_const: shape mismatch " + a.shape().str() + " vs " + k.shape().str());
  return record(detail::zip(a.value(), k, [](double x, double y) { return x * y; }), {a},
                [k](const Var&, const Var& g) { return std::vector<Var>{mul_const(g, k)}; });
}

inline Var sin(const Var& a);

inline Var cos(const Var& a) {
  return record(detail::map(a.value(), [](double x) { return std::cos(x); }), {a},
                [](const Var& self, const Var& g) {
                  return std::vector<Var>{neg(mul(g, sin(self.get()->inputs[0])))};
                });
}

inline Var sin(const Var& a) {
  return record(detail::map(a.value(), [](double x) { return std::sin(x); }), {a},
                [](const Var& self, const Var& g) { return std::vector<Var>{mul(g, cos(self.get()->inputs[0]))}; });
}

inline Var sigmoid(const Var& a) {
  return record(detail::map(a.value(), [](double x) { return 1.0 / (1.0 + std::exp(-x)); }), {a},
                [](const Var& self, const Var& g) {
                  // s' = s (1 - s), written through self so it stays differentiable
                  return std::vector<Var>{mul(g, sub(self, mul(self, self)))};
                });
}

/// 1/x, with 0 wherever |x| is below a denormal-scale threshold.
inline Var safe_recip(const Var& a) {
  return record(detail::map(a.value(), [](double x) { return std::abs(x) > detail::kTiny ? 1.0 / x : 0.0; }), {a},
                [](const Var& self, const Var& g) { return std::vector<Var>{neg(mul(g, mul(self, self)))}; });
}

/// sqrt(max(x, 0)); the derivative is taken as zero at the origin.
inline Var sqrt_safe(const Var& a) {
  return record(detail::map(a.value(), [](double x) { return x > 0.0 ? std::sqrt(x) : 0.0; }), {a},
                [](const Var& self, const Var& g) { return std::vector<Var>{scale(mul(g, safe_recip(self)), 0.5)}; });
}

/// x^(-1/2) for positive x.
inline Var rsqrt(const Var& a) {
  for (double v : a.value().data()) require(v > 0.0, "rsqrt: argument must be positive");
  return record(detail::map(a.value(), [](double x) { return 1.0 / std::sqrt(x); }), {a},
                [](const Var& self, const Var& g) {
                  return std::vector<Var>{scale(mul(g, mul(self, mul(self, self))), -0.5)};
                });
}

inline Var div(const Var& a, const Var& b) { return mul(a, safe_recip(b)); }

inline Var abs(const Var& a) {
  Tensor4 sign = detail::map(a.value(), [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
  return mul_const(a, sign) ;
}

/// Clamp to [lo, hi]; the gradient is passed only where the value is strictly inside.
inline Var clamp(const Var& a, double lo, double hi) {
  require(lo <= hi, "clamp: empty interval");
  Tensor4 mask = detail::map(a.value(), [=](double x) { return x > lo && x < hi ? 1.0 : 0.0; });
  Tensor4 offset = detail::map(a.value(), [=](double x) { return x <= lo ? lo : (x >= hi ? hi : 0.0); });
  Var inside = mul_const(a, mask);
  return record(detail::zip(inside.value(), offset, [](double x, double o) { return x + o; }), {inside},
                [](const Var&, const Var& g) { return std::vector<Var>{g}; });
}

inline Var leaky_relu(const Var& a, double slope) {
  return mul_const(a, detail::map(a.value(), [slope](double x) { return x > 0.0 ? 1.0 : slope; }));
}

// ---- broadcasting -----------------------------------------------------------

namespace detail {

inline bool broadcastable(Shape small, Shape big) {
  auto ok = [](int s, int b) { return s == b || s == 1; };
  return ok(small.n, big.n) && ok(small.c, big.c) && ok(small.h, big.h) && ok(small.w, big.w);
}

// Visit every index of `big` with the matching flat index into `small`.
template <class F>
void for_broadcast(Shape small, Shape big, F f) {
  const std::size_t sw = small.w == 1 ? 0 : 1;
  const std::size_t sh = small.h == 1 ? 0 : static_cast<std::size_t>(small.w);
  const std::size_t sc = small.c == 1 ? 0 : static_cast<std::size_t>(small.w) * small.h;
  const std::size_t sn = small.n == 1 ? 0 : static_cast<std::size_t>(small.w) * small.h * small.c;
  std::size_t k = 0;
  for (int n = 0; n < big.n; ++n)
    for (int c = 0; c < big.c; ++c)
      for (int h = 0; h < big.h; ++h)
        for (int w = 0; w < big.w; ++w) f(k++, n * sn + c * sc + h * sh + w * sw);
}

}  // namespace detail

/// Repeat size-1 extents of `a` up to `to`.
inline Var expand(const Var& a, Shape to) {
  const Shape from = a.shape();
  require(detail::broadcastable(from, to), "expand: cannot broadcast " + from.str() + " to " + to.str());
  if (from == to) return a;
  Tensor4 out(to);
  const auto& src = a.value();
  detail::for_broadcast(from, to, [&](std::size_t i, std::size_t j) { out[i] = src[j]; });
  return record(std::move(out), {a}, [from](const Var&, const Var& g) { return std::vector<Var>{reduce_to(g, from)}; });
}

/// Sum over the extents where `to` is 1; adjoint of expand.
inline Var reduce_to(const Var& a, Shape to) {
  const Shape from = a.shape();
  require(detail::broadcastable(to, from), "reduce_to: cannot reduce " + from.str() + " to " + to.str());
  if (from == to) return a;
  Tensor4 out(to);
  const auto& src = a.value();
  detail::for_broadcast(to, from, [&](std::size_t i, std::size_t j) { out[j] += src[i]; });
  return record(std::move(out), {a}, [from](const Var&, const Var& g) { return std::vector<Var>{expand(g, from)}; });
}

inline Var sum_all(const Var& a) { return reduce_to(a, Shape{}); }
inline Var mean_all(const Var& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.value().size())); }

// ---- channel slicing --------------------------------------------------------

Var pad_channels(const Var& a, int c0, int total);

/// Channels [c0, c1).
inline Var slice_channels(const Var& a, int c0, int c1) {
  const Shape s = a.shape();
  require(0 <= c0 && c0 < c1 && c1 <= s.c, "slice_channels: bad range");
  const Shape o{s.n, c1 - c0, s.h, s.w};
  Tensor4 out(o);
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  for (int n = 0; n < s.n; ++n)
    for (int c = c0; c < c1; ++c)
      std::copy_n(a.value().data().begin() + a.value().index(n, c, 0, 0), plane,
                  out.data().begin() + out.index(n, c - c0, 0, 0));
  return record(std::move(out), {a}, [c0, total = s.c](const Var&, const Var& g) {
    return std::vector<Var>{pad_channels(g, c0, total)};
  });
}

/// Place `a` at channel offset c0 of a zero tensor with `total` channels.
inline Var pad_channels(const Var& a, int c0, int total) {
  const Shape s = a.shape();
  require(c0 >= 0 && c0 + s.c <= total, "pad_channels: bad range");
  Tensor4 out(Shape{s.n, total, s.h, s.w});
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      std::copy_n(a.value().data().begin() + a.value().index(n, c, 0, 0), plane,
                  out.data().begin() + out.index(n, c + c0, 0, 0));
  return record(std::move(out), {a}, [c0, c = s.c](const Var&, const Var& g) {
    return std::vector<Var>{slice_channels(g, c0, c0 + c)};
  });
}

inline Var concat_channels(const Var& a, const Var& b) {
  require(a.shape().n == b.shape().n && a.shape().h == b.shape().h && a.shape().w == b.shape().w,
          "concat_channels: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  const int total = a.shape().c + b.shape().c;
  return add(pad_channels(a, 0, total), pad_channels(b, a.shape().c, total));
}

// ---- complex values as (re, im) channel pairs --------------------------------

inline Var re(const Var& z) { return slice_channels(z, 0, 1); }
inline Var im(const Var& z) { return slice_channels(z, 1, 2); }
inline Var make_complex(const Var& r, const Var& i) { return concat_channels(r, i); }

inline Var cmul(const Var& a, const Var& b) {
  require(a.shape().c == 2 && b.shape().c == 2, "cmul: expects (re, im) channel pairs");
  const Var ar = re(a), ai = im(a), br = re(b), bi = im(b);
  return make_complex(sub(mul(ar, br), mul(ai, bi)), add(mul(ar, bi), mul(ai, br)));
}

/// |z| with a zero derivative where z = 0.
inline Var cabs(const Var& z) {
  const Var r = re(z), i = im(z);
  return sqrt_safe(add(mul(r, r), mul(i, i)));
}

Var ifft2c(const Var& z);

namespace detail {

inline Tensor4 centered_dft_pairs(const Tensor4& z, bool inverse) {
  const Shape s = z.shape();
  require(s.c == 2, "fft2c: expects (re, im) channel pairs");
  Tensor4 out(s);
  Array2D<cplx> buf(s.h, s.w);
  for (int n = 0; n < s.n; ++n) {
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) buf(y, x) = {z.at(n, 0, y, x), z.at(n, 1, y, x)};
    const auto f = centered_dft2(buf, inverse);
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        out.at(n, 0, y, x) = f(y, x).real();
        out.at(n, 1, y, x) = f(y, x).imag();
      }
  }
  return out;
}

}  // namespace detail

/// Orthonormal centered 2-D DFT over (h, w); its adjoint is the inverse.
inline Var fft2c(const Var& z) {
  return record(detail::centered_dft_pairs(z.value(), false), {z},
                [](const Var&, const Var& g) { return std::vector<Var>{ifft2c(g)}; });
}

inline Var ifft2c(const Var& z) {
  return record(detail::centered_dft_pairs(z.value(), true), {z},
                [](const Var&, const Var& g) { return std::vector<Var>{fft2c(g)}; });
}

// ---- conversions --------------------------------------------------------------

inline Tensor4 to_tensor(const Array2D<cplx>& a) {
  Tensor4 t(Shape{1, 2, a.height(), a.width()});
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      t.at(0, 0, y, x) = a(y, x).real();
      t.at(0, 1, y, x) = a(y, x).imag();
    }
  return t;
}

inline Array2D<cplx> to_complex(const Tensor4& t) {
  require(t.shape().n == 1 && t.shape().c == 2, "to_complex: expects shape (1, 2, h, w)");
  Array2D<cplx> a(t.shape().h, t.shape().w);
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) a(y, x) = {t.at(0, 0, y, x), t.at(0, 1, y, x)};
  return a;
}

inline Tensor4 to_tensor(const Array2D<double>& a) {
  return Tensor4(Shape{1, 1, a.height(), a.width()}, std::vector<double>(a.values().begin(), a.values().end()));
}

inline Array2D<double> to_real(const Tensor4& t) {
  require(t.shape().n == 1 && t.shape().c == 1, "to_real: expects shape (1, 1, h, w)");
  Array2D<double> a(t.shape().h, t.shape().w);
  std::copy(t.data().begin(), t.data().end(), a.values().begin());
  return a;
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double k, const Var& a) { return scale(a, k); }

}  // namespace afp::ad
