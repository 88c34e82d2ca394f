#pragma once

#include "afplus/ad/ops.hpp"

namespace afp::ad {

// conv2d, conv2d_transpose and conv2d_weight are mutual adjoints, so each
// one's backward rule is expressed with the other two.

struct ConvGeom {
  int stride = 1;
  int pad = 1;
};

inline int conv_out_size(int in, int k, ConvGeom g) { return (in + 2 * g.pad - k) / g.stride + 1; }

namespace detail {

// Output index range [lo, hi) along one axis whose input tap stays in bounds.
inline std::pair<int, int> valid_range(int out, int in, int tap, ConvGeom g) {
  // input = o * stride - pad + tap in [0, in)
  int lo = 0;
  while (lo < out && lo * g.stride - g.pad + tap < 0) ++lo;
  int hi = out;
  while (hi > lo && (hi - 1) * g.stride - g.pad + tap >= in) --hi;
  return {lo, hi};
}

// Shared loop: calls f(x_index, y_index, w_index) for every multiply.
template <class F>
void conv_loop(Shape x, Shape y, Shape w, ConvGeom g, F f) {
  const int k = w.h;
  for (int a = 0; a < k; ++a) {
    const auto [ylo, yhi] = valid_range(y.h, x.h, a, g);
    for (int b = 0; b < k; ++b) {
      const auto [xlo, xhi] = valid_range(y.w, x.w, b, g);
      for (int n = 0; n < x.n; ++n)
        for (int o = 0; o < y.c; ++o)
          for (int i = 0; i < x.c; ++i) {
            const std::size_t wi = ((static_cast<std::size_t>(o) * w.c + i) * k + a) * k + b;
            for (int yo = ylo; yo < yhi; ++yo) {
              const int yi = yo * g.stride - g.pad + a;
              const std::size_t xrow = ((static_cast<std::size_t>(n) * x.c + i) * x.h + yi) * x.w;
              const std::size_t yrow = ((static_cast<std::size_t>(n) * y.c + o) * y.h + yo) * y.w;
              f(xrow, yrow, wi, xlo, xhi, b);
            }
          }
    }
  }
}

inline void check_conv(Shape x, Shape w, Shape y, ConvGeom g, const char* op) {
  require(w.h == w.w && w.h >= 1, std::string(op) + ": kernel must be square");
  require(x.c == w.c && y.c == w.n && x.n == y.n, std::string(op) + ": channel mismatch x" + x.str() + " w" + w.str() +
                                                      " y" + y.str());
  require(y.h == conv_out_size(x.h, w.h, g) && y.w == conv_out_size(x.w, w.w, g),
          std::string(op) + ": spatial mismatch x" + x.str() + " y" + y.str());
}

}  // namespace detail

Var conv2d_transpose(const Var& y, const Var& w, ConvGeom g, int h, int wd);
Var conv2d_weight(const Var& x, const Var& y, ConvGeom g, int k);

/// Cross-correlation of x (N, Ci, H, W) with w (Co, Ci, k, k).
inline Var conv2d(const Var& x, const Var& w, ConvGeom g) {
  const Shape xs = x.shape(), ws = w.shape();
  const Shape ys{xs.n, ws.n, conv_out_size(xs.h, ws.h, g), conv_out_size(xs.w, ws.w, g)};
  detail::check_conv(xs, ws, ys, g, "conv2d");
  Tensor4 out(ys);
  const double* xv = x.value().data().data();
  const double* wv = w.value().data().data();
  double* ov = out.data().data();
  detail::conv_loop(xs, ys, ws, g, [&](std::size_t xr, std::size_t yr, std::size_t wi, int lo, int hi, int b) {
    const double c = wv[wi];
    const double* xp = xv + xr;
    double* op = ov + yr;
    const int off = b - g.pad;
    for (int q = lo; q < hi; ++q) op[q] += c * xp[q * g.stride + off];
  });
  return record(std::move(out), {x, w}, [g, xs](const Var& self, const Var& gy) {
    const auto& in = self.get()->inputs;
    return std::vector<Var>{conv2d_transpose(gy, in[1], g, xs.h, xs.w), conv2d_weight(in[0], gy, g, in[1].shape().h)};
  });
}

/// Adjoint of conv2d in its image argument; output is (N, Ci, h, wd).
inline Var conv2d_transpose(const Var& y, const Var& w, ConvGeom g, int h, int wd) {
  const Shape ys = y.shape(), ws = w.shape();
  const Shape xs{ys.n, ws.c, h, wd};
  detail::check_conv(xs, ws, ys, g, "conv2d_transpose");
  Tensor4 out(xs);
  const double* yv = y.value().data().data();
  const double* wv = w.value().data().data();
  double* ov = out.data().data();
  detail::conv_loop(xs, ys, ws, g, [&](std::size_t xr, std::size_t yr, std::size_t wi, int lo, int hi, int b) {
    const double c = wv[wi];
    double* xp = ov + xr;
    const double* yp = yv + yr;
    const int off = b - g.pad;
    for (int q = lo; q < hi; ++q) xp[q * g.stride + off] += c * yp[q];
  });
  return record(std::move(out), {y, w}, [g](const Var& self, const Var& gx) {
    const auto& in = self.get()->inputs;
    return std::vector<Var>{conv2d(gx, in[1], g), conv2d_weight(gx, in[0], g, in[1].shape().h)};
  });
}

/// Adjoint of conv2d in its kernel argument: sum over x (N, Ci, H, W) and
/// y (N, Co, Ho, Wo) giving (Co, Ci, k, k).
inline Var conv2d_weight(const Var& x, const Var& y, ConvGeom g, int k) {
  const Shape xs = x.shape(), ys = y.shape();
  const Shape ws{ys.c, xs.c, k, k};
  detail::check_conv(xs, ws, ys, g, "conv2d_weight");
  Tensor4 out(ws);
  const double* xv = x.value().data().data();
  const double* yv = y.value().data().data();
  double* wv = out.data().data();
  detail::conv_loop(xs, ys, ws, g, [&](std::size_t xr, std::size_t yr, std::size_t wi, int lo, int hi, int b) {
    const double* xp = xv + xr;
    const double* yp = yv + yr;
    const int off = b - g.pad;
    double acc = 0.0;
    for (int q = lo; q < hi; ++q) acc += yp[q] * xp[q * g.stride + off];
    wv[wi] += acc;
  });
  return record(std::move(out), {x, y}, [g](const Var& self, const Var& gw) {
    const auto& in = self.get()->inputs;
    const Shape xs = in[0].shape();
    return std::vector<Var>{conv2d_transpose(in[1], gw, g, xs.h, xs.w), conv2d(in[0], gw, g)};
  });
}

Var sum_pool2(const Var& a);

/// Nearest-neighbour 2x upsampling.
inline Var upsample2(const Var& a) {
  const Shape s = a.shape();
  Tensor4 out(Shape{s.n, s.c, 2 * s.h, 2 * s.w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < 2 * s.h; ++y)
        for (int x = 0; x < 2 * s.w; ++x) out.at(n, c, y, x) = a.value().at(n, c, y / 2, x / 2);
  return record(std::move(out), {a}, [](const Var&, const Var& g) { return std::vector<Var>{sum_pool2(g)}; });
}

/// Sum over 2x2 blocks; adjoint of upsample2.
inline Var sum_pool2(const Var& a) {
  const Shape s = a.shape();
  require(s.h % 2 == 0 && s.w % 2 == 0, "sum_pool2: odd spatial size " + s.str());
  Tensor4 out(Shape{s.n, s.c, s.h / 2, s.w / 2});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) out.at(n, c, y / 2, x / 2) += a.value().at(n, c, y, x);
  return record(std::move(out), {a}, [](const Var&, const Var& g) { return std::vector<Var>{upsample2(g)}; });
}

inline constexpr double kInstanceNormEps = 1e-5;

/// Per-sample, per-channel standardization followed by a learned affine map;
/// gamma and beta have shape (1, C, 1, 1).
inline Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps = kInstanceNormEps) {
  const Shape s = x.shape();
  const Shape stat{s.n, s.c, 1, 1};
  require(gamma.shape() == (Shape{1, s.c, 1, 1}) && beta.shape() == gamma.shape(),
          "instance_norm: affine parameters must have shape (1, C, 1, 1)");
  const double inv_hw = 1.0 / (static_cast<double>(s.h) * s.w);
  const Var mu = scale(reduce_to(x, stat), inv_hw);
  const Var xc = sub(x, expand(mu, s));
  const Var var = scale(reduce_to(mul(xc, xc), stat), inv_hw);
  const Var inv = rsqrt(add_scalar(var, eps));
  const Var y = mul(xc, expand(inv, s));
  return add(mul(y, expand(gamma, s)), expand(beta, s));
}

}  // namespace afp::ad
