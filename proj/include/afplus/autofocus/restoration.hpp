#pragma once

#include <memory>
#include <numbers>

#include "afplus/ad/ops.hpp"
#include "afplus/motion/motion.hpp"

namespace afp {

namespace detail {

struct NufftContext {
  Nufft2D plan;
  OversampledSpectrum grid;
  std::vector<char> active_rows;  // rows outside the protected band
};

}  // namespace detail

/// Differentiable sampling of the band-limited continuation at per-pixel
/// coordinates (cy, cx), each of shape (1, 1, H, W). Returns (re, im) pairs of
/// the (dy, dx)-th partial derivative; inactive rows are zero.
inline ad::Var nufft_sample(std::shared_ptr<const detail::NufftContext> ctx, const ad::Var& cy, const ad::Var& cx,
                            int dy = 0, int dx = 0) {
  const ad::Shape s = cy.shape();
  require(s == cx.shape() && s.n == 1 && s.c == 1, "nufft_sample: coordinates must have shape (1, 1, H, W)");
  require(dy >= 0 && dx >= 0 && dy <= KaiserBessel::kMaxDerivative && dx <= KaiserBessel::kMaxDerivative,
          "nufft_sample: derivative order beyond 3");
  require(static_cast<int>(ctx->active_rows.size()) == s.h, "nufft_sample: row mask size mismatch");
  ad::Tensor4 out(ad::Shape{1, 2, s.h, s.w});
  for (int r = 0; r < s.h; ++r) {
    if (!ctx->active_rows[r]) continue;
    for (int c = 0; c < s.w; ++c) {
      const double ky = cy.value().at(0, 0, r, c), kx = cx.value().at(0, 0, r, c);
      ctx->plan.check_range(ky, kx);
      const cplx v = ctx->plan.sample(ctx->grid, ky, kx, dy, dx);
      out.at(0, 0, r, c) = v.real();
      out.at(0, 1, r, c) = v.imag();
    }
  }
  return ad::record(std::move(out), {cy, cx}, [ctx, dy, dx, s](const ad::Var& self, const ad::Var& g) {
    const auto& in = self.get()->inputs;
    // d/dc of Re(conj(g) f) summed over the (re, im) pair
    auto along = [&](int ey, int ex) {
      return ad::reduce_to(ad::mul(g, nufft_sample(ctx, in[0], in[1], dy + ey, dx + ex)), s);
    };
    return std::vector<ad::Var>{along(1, 0), along(0, 1)};
  });
}

/// Candidate restoration of a fixed corrupted spectrum as a differentiable
/// function of per-row motion estimates: inverse rotation, then inverse
/// translation, matching invert_kspace.
class RestorationOperator {
 public:
  RestorationOperator(const ComplexImage& ksp_corrupted, RowBand protected_rows, NufftOptions opt = {})
      : height_(ksp_corrupted.height()), width_(ksp_corrupted.width()), band_(protected_rows) {
    require_domain(ksp_corrupted, Domain::KSpace, "RestorationOperator");
    require_finite(ksp_corrupted, "RestorationOperator");
    require(band_.begin >= 0 && band_.end <= height_ && band_.begin <= band_.end,
            "RestorationOperator: protected band outside the k-space");
    Nufft2D plan(height_, width_, opt);
    auto grid = plan.oversample(ksp_corrupted);
    std::vector<char> active(static_cast<std::size_t>(height_));
    for (int r = 0; r < height_; ++r) active[r] = band_.contains(r) ? 0 : 1;
    ctx_ = std::make_shared<const detail::NufftContext>(
        detail::NufftContext{std::move(plan), std::move(grid), std::move(active)});

    const ad::Shape plane{1, 1, height_, width_};
    ky_ = ad::Tensor4(plane);
    kx_ = ad::Tensor4(plane);
    for (int r = 0; r < height_; ++r)
      for (int c = 0; c < width_; ++c) {
        ky_.at(0, 0, r, c) = r - height_ / 2;
        kx_.at(0, 0, r, c) = c - width_ / 2;
      }
    ad::Tensor4 kept = ad::to_tensor(ksp_corrupted.array());
    for (int r = 0; r < height_; ++r)
      if (!band_.contains(r))
        for (int c = 0; c < width_; ++c) kept.at(0, 0, r, c) = kept.at(0, 1, r, c) = 0.0;
    protected_part_ = ad::Var::constant(std::move(kept));
    row_mask_ = ad::Tensor4(ad::Shape{1, 1, height_, 1});
    for (int r = 0; r < height_; ++r) row_mask_[r] = band_.contains(r) ? 0.0 : 1.0;
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  RowBand protected_rows() const noexcept { return band_; }
  ad::Shape param_shape() const noexcept { return {1, 1, height_, 1}; }
  /// 1 on rows that may move, 0 on the protected band; shape param_shape().
  const ad::Tensor4& row_mask() const noexcept { return row_mask_; }

  /// alpha in degrees, dx/dy in pixels, each of shape (1, 1, H, 1).
  ad::Var kspace(const ad::Var& alpha, const ad::Var& dx, const ad::Var& dy) const {
    for (const auto* p : {&alpha, &dx, &dy})
      require(p->shape() == param_shape(), "RestorationOperator: parameter shape " + p->shape().str() +
                                               " != " + param_shape().str());
    const ad::Shape plane{1, 1, height_, width_};
    // Inverse rotation: sample at the row coordinates rotated by -alpha.
    const ad::Var a = ad::expand(ad::scale(alpha, std::numbers::pi / 180.0), plane);
    const ad::Var ca = ad::cos(a), sa = ad::sin(a);
    const ad::Var cy = ad::add(ad::mul_const(ca, ky_), ad::mul_const(sa, kx_));
    const ad::Var cx = ad::sub(ad::mul_const(ca, kx_), ad::mul_const(sa, ky_));
    const ad::Var rotated = ad::add(nufft_sample(ctx_, cy, cx), protected_part_);
    // Inverse translation: phase exp(+2 pi i (kx dx / W + ky dy / H)).
    const double two_pi = 2.0 * std::numbers::pi;
    const ad::Var ph = ad::add(ad::scale(ad::mul_const(ad::expand(dx, plane), kx_), two_pi / width_),
                               ad::scale(ad::mul_const(ad::expand(dy, plane), ky_), two_pi / height_));
    return ad::cmul(rotated, ad::make_complex(ad::cos(ph), ad::sin(ph)));
  }

  /// Magnitude of the restored image, shape (1, 1, H, W).
  ad::Var magnitude(const ad::Var& alpha, const ad::Var& dx, const ad::Var& dy) const {
    return ad::cabs(ad::ifft2c(kspace(alpha, dx, dy)));
  }

 private:
  int height_;
  int width_;
  RowBand band_;
  std::shared_ptr<const detail::NufftContext> ctx_;
  ad::Tensor4 ky_, kx_;
  ad::Var protected_part_;
  ad::Tensor4 row_mask_;
};

}  // namespace afp
