#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "afplus/core/fft.hpp"
#include "afplus/core/kaiser_bessel.hpp"
#include "afplus/core/sample_grid.hpp"

namespace afp {

struct NufftOptions {
  int oversampling = 2;
  int kernel_width = 8;
};

/// The input spectrum resampled onto the sigma-times finer frequency grid,
/// with the kernel's apodization divided out in the image domain.
struct OversampledSpectrum {
  int height = 0;  // original k-space size
  int width = 0;
  Array2D<cplx> grid;
};

/// Type-2 non-uniform resampler for a centered H x W spectrum: evaluates the
/// spectrum's band-limited (periodic) continuation at arbitrary frequencies.
///
/// Coordinates are in cycles per field of view. The continuation is periodic
/// with period H (W), so any coordinate within one period of the band, i.e.
/// |ky| <= H and |kx| <= W, is accepted.
class Nufft2D {
 public:
  Nufft2D(int height, int width, NufftOptions opt = {})
      : height_(height),
        width_(width),
        osf_(opt.oversampling),
        kernel_(opt.kernel_width, beatty_beta(opt.kernel_width, opt.oversampling)) {
    require(height >= ComplexImage::kMinSide && width >= ComplexImage::kMinSide,
            "Nufft2D: size must be >= 8");
    require(osf_ >= 2, "Nufft2D: oversampling factor must be an integer >= 2");
    require(opt.kernel_width >= 2 && opt.kernel_width < osf_ * std::min(height, width),
            "Nufft2D: invalid kernel width");
    deapod_y_ = deapodization(height_);
    deapod_x_ = deapodization(width_);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int oversampling() const noexcept { return osf_; }
  const KaiserBessel& kernel() const noexcept { return kernel_; }

  OversampledSpectrum oversample(const ComplexImage& ksp) const {
    require_domain(ksp, Domain::KSpace, "nufft oversample");
    require(ksp.height() == height_ && ksp.width() == width_, "nufft oversample: size mismatch");
    const Array2D<cplx> img = centered_dft2(ksp.array(), true);
    const int mh = osf_ * height_, mw = osf_ * width_;
    Array2D<cplx> padded(mh, mw);
    for (int r = 0; r < height_; ++r) {
      for (int c = 0; c < width_; ++c) {
        padded(r - height_ / 2 + mh / 2, c - width_ / 2 + mw / 2) =
            img(r, c) / (deapod_y_[r] * deapod_x_[c]);
      }
    }
    Array2D<cplx> g = centered_dft2(padded, false);
    const double scale = static_cast<double>(osf_);  // sqrt(mh*mw / (h*w))
    for (auto& v : g.values()) v *= scale;
    return {height_, width_, std::move(g)};
  }

  void check_range(double ky, double kx) const {
    if (!(std::abs(ky) <= height_ && std::abs(kx) <= width_)) {
      throw OutOfRangeError("nufft: coordinate (" + std::to_string(ky) + ", " + std::to_string(kx) +
                            ") outside the supported range");
    }
  }

  /// Partial derivative d^(dy+dx) / dky^dy dkx^dx of the continuation at
  /// (ky, kx). Orders 0..3 per axis.
  cplx sample(const OversampledSpectrum& g, double ky, double kx, int dy = 0, int dx = 0) const {
    const int mh = g.grid.height(), mw = g.grid.width();
    const double uy = osf_ * ky, ux = osf_ * kx;
    const double hw = kernel_.half_width();
    const int y0 = static_cast<int>(std::ceil(uy - hw)), y1 = static_cast<int>(std::floor(uy + hw));
    const int x0 = static_cast<int>(std::ceil(ux - hw)), x1 = static_cast<int>(std::floor(ux + hw));
    double wy[kMaxTaps], wx[kMaxTaps];
    int iy[kMaxTaps], ix[kMaxTaps];
    const int ny = y1 - y0 + 1, nx = x1 - x0 + 1;
    const double sy = std::pow(static_cast<double>(osf_), dy);
    const double sx = std::pow(static_cast<double>(osf_), dx);
    for (int j = 0; j < ny; ++j) {
      wy[j] = sy * kernel_(uy - (y0 + j), dy);
      iy[j] = wrap(y0 + j + mh / 2, mh);
    }
    for (int j = 0; j < nx; ++j) {
      wx[j] = sx * kernel_(ux - (x0 + j), dx);
      ix[j] = wrap(x0 + j + mw / 2, mw);
    }
    cplx acc = 0.0;
    for (int a = 0; a < ny; ++a) {
      if (wy[a] == 0.0) continue;
      cplx rowacc = 0.0;
      const auto row = g.grid.row(iy[a]);
      for (int b = 0; b < nx; ++b) rowacc += wx[b] * row[ix[b]];
      acc += wy[a] * rowacc;
    }
    return acc;
  }

 private:
  static constexpr int kMaxTaps = 64;

  static int wrap(int i, int n) {
    i %= n;
    return i < 0 ? i + n : i;
  }

  std::vector<double> deapodization(int n) const {
    std::vector<double> d(static_cast<std::size_t>(n));
    const double m = static_cast<double>(osf_) * n;
    for (int i = 0; i < n; ++i) d[i] = kernel_.fourier((i - n / 2) / m);
    return d;
  }

  int height_;
  int width_;
  int osf_;
  KaiserBessel kernel_;
  std::vector<double> deapod_y_, deapod_x_;
};

/// Evaluate `ksp` at every point of `grid`, arranged as an H x W k-space.
inline ComplexImage nufft_resample(const ComplexImage& ksp, const SampleGrid& grid,
                                   NufftOptions opt = {}) {
  require_domain(ksp, Domain::KSpace, "nufft_resample");
  require(grid.height() == ksp.height() && grid.width() == ksp.width() && grid.size() == ksp.size(),
          "nufft_resample: grid must have exactly H*W points");
  const Nufft2D plan(ksp.height(), ksp.width(), opt);
  for (const auto& p : grid.points()) plan.check_range(p.ky, p.kx);
  const auto g = plan.oversample(ksp);
  ComplexImage out(ksp.height(), ksp.width(), Domain::KSpace);
  for (std::size_t i = 0; i < grid.size(); ++i) out.values()[i] = plan.sample(g, grid[i].ky, grid[i].kx);
  return out;
}

}  // namespace afp
