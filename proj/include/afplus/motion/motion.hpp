#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "afplus/core/fft.hpp"
#include "afplus/core/nufft.hpp"
#include "afplus/core/random.hpp"
#include "afplus/motion/trajectory.hpp"

namespace afp {

struct CorruptionConfig {
  double center_fraction = 0.08;
  std::optional<double> noise_snr_db;  // unset or +inf: no noise

  void validate() const {
    require(center_fraction >= 0.0 && center_fraction < 1.0, "CorruptionConfig: center_fraction must be in [0, 1)");
    if (noise_snr_db) require(!std::isnan(*noise_snr_db), "CorruptionConfig: noise_snr_db is NaN");
  }
};

constexpr double deg_to_rad(double deg) noexcept { return deg * std::numbers::pi / 180.0; }

/// Fourier-shift translation: row r is multiplied by
/// exp(-2 pi i (kx dx_r / W + ky dy_r / H)). Rows with zero shift are copied.
inline ComplexImage apply_translation(const ComplexImage& ksp, const MotionTrajectory& traj) {
  require_domain(ksp, Domain::KSpace, "apply_translation");
  traj.validate(ksp.height());
  const int h = ksp.height(), w = ksp.width();
  ComplexImage out = ksp;
  for (int r = 0; r < h; ++r) {
    const auto [dx, dy] = traj.shift[r];
    if (dx == 0.0 && dy == 0.0) continue;
    const double ky = r - h / 2;
    auto row = out.row(r);
    for (int c = 0; c < w; ++c) {
      const double kx = c - w / 2;
      const double ph = -2.0 * std::numbers::pi * (kx * dx / w + ky * dy / h);
      row[c] *= cplx(std::cos(ph), std::sin(ph));
    }
  }
  return out;
}

/// Per-row rotation: row r of the output holds the input spectrum's continuation
/// at row r's canonical coordinates rotated by alpha_r. Protected rows and
/// zero-angle rows are copied verbatim.
inline ComplexImage apply_rotation(const ComplexImage& ksp, const MotionTrajectory& traj, NufftOptions opt = {}) {
  require_domain(ksp, Domain::KSpace, "apply_rotation");
  traj.validate(ksp.height());
  const int h = ksp.height(), w = ksp.width();
  const Nufft2D plan(h, w, opt);
  const auto grid = plan.oversample(ksp);
  ComplexImage out = ksp;
  for (int r = 0; r < h; ++r) {
    if (traj.protected_rows.contains(r) || traj.alpha[r] == 0.0) continue;
    const double a = deg_to_rad(traj.alpha[r]);
    auto row = out.row(r);
    for (int c = 0; c < w; ++c) {
      const auto p = rotate_point(r - h / 2, c - w / 2, a);
      row[c] = plan.sample(grid, p.ky, p.kx);
    }
  }
  return out;
}

/// Complex Gaussian noise with sigma set so that signal energy over expected
/// noise energy equals `snr_db`. +inf disables noise.
inline ComplexImage add_noise(const ComplexImage& ksp, double snr_db, Rng& rng) {
  require(!std::isnan(snr_db), "add_noise: snr_db is NaN");
  if (std::isinf(snr_db) && snr_db > 0) return ksp;
  require(std::isfinite(snr_db), "add_noise: snr_db must be finite or +inf");
  double energy = 0.0;
  for (const auto& v : ksp.values()) energy += std::norm(v);
  const double n = static_cast<double>(ksp.size());
  const double sigma = std::sqrt(energy / (2.0 * n * std::pow(10.0, snr_db / 10.0)));
  ComplexImage out = ksp;
  for (auto& v : out.values()) {
    const double re = rng.normal();
    const double im = rng.normal();
    v += sigma * cplx(re, im);
  }
  return out;
}

/// Motion corruption of the k-space (translation, then rotation), with
/// optional noise added after motion. Returns the corrupted image.
inline ComplexImage corrupt_kspace(const ComplexImage& img, const MotionTrajectory& traj, const CorruptionConfig& cfg,
                                   Rng& rng) {
  require_domain(img, Domain::Image, "corrupt");
  cfg.validate();
  auto y = apply_rotation(apply_translation(fft2c(img), traj), traj);
  if (cfg.noise_snr_db) y = add_noise(y, *cfg.noise_snr_db, rng);
  return y;
}

inline ComplexImage corrupt(const ComplexImage& img, const MotionTrajectory& traj, const CorruptionConfig& cfg,
                            Rng& rng) {
  return ifft2c(corrupt_kspace(img, traj, cfg, rng));
}

/// Undo a known trajectory: inverse rotation first, then inverse translation.
inline ComplexImage invert_kspace(const ComplexImage& ksp, const MotionTrajectory& traj) {
  const auto neg = traj.negated();
  return apply_translation(apply_rotation(ksp, neg), neg);
}

inline ComplexImage invert(const ComplexImage& img_corrupted, const MotionTrajectory& traj) {
  require_domain(img_corrupted, Domain::Image, "invert");
  return ifft2c(invert_kspace(fft2c(img_corrupted), traj));
}

}  // namespace afp
