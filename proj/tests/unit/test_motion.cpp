#include <gtest/gtest.h>

#include "afplus/bench/phantom.hpp"
#include "afplus/motion/motion.hpp"
#include "oracles.hpp"

using namespace afp;

namespace {

MotionTrajectory uniform_trajectory(int rows, double alpha, double dx, double dy) {
  auto t = MotionTrajectory::zero(rows);
  for (int r = 0; r < rows; ++r) {
    t.alpha[r] = alpha;
    t.shift[r] = {dx, dy};
  }
  return t;
}

double psnr(const RealImage& ref, const RealImage& test) {
  double peak = 0.0, mse = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    peak = std::max(peak, ref.values()[i]);
    mse += std::pow(ref.values()[i] - test.values()[i], 2);
  }
  return 10.0 * std::log10(peak * peak / (mse / ref.size()));
}

}  // namespace

TEST(ProtectedBand, EvenCountAroundDc) {
  EXPECT_EQ(protected_band(64, 0.08), (RowBand{29, 35}));
  EXPECT_EQ(protected_band(320, 0.08), (RowBand{147, 173}));
  EXPECT_EQ(protected_band(64, 0.0).size(), 0);
  EXPECT_THROW(protected_band(64, 1.0), ContractViolation);
}

TEST(GenTrajectory, ZeroAmplitudeIsZero) {
  auto spec = TrajectorySpec::preset(TrajectoryKind::SingleSine, Severity::Mild, 3);
  spec.amplitude_deg = 0.0;
  spec.amplitude_px = 0.0;
  EXPECT_TRUE(gen_trajectory(spec, 64).is_zero());
}

TEST(GenTrajectory, DeterministicPerSeed) {
  for (auto kind : {TrajectoryKind::SingleSine, TrajectoryKind::Harmonic, TrajectoryKind::Random}) {
    const auto spec = TrajectorySpec::preset(kind, Severity::Severe, 42);
    EXPECT_EQ(gen_trajectory(spec, 64), gen_trajectory(spec, 64));
    auto other = spec;
    other.seed = 43;
    EXPECT_NE(gen_trajectory(spec, 64), gen_trajectory(other, 64));
  }
}

TEST(GenTrajectory, RespectsBoundsAndProtectedRows) {
  for (auto kind : {TrajectoryKind::SingleSine, TrajectoryKind::Harmonic, TrajectoryKind::Random}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto spec = TrajectorySpec::preset(kind, Severity::Severe, seed);
      spec.amplitude_deg = 3.0;  // beyond the bound on purpose
      spec.amplitude_px = 7.0;
      const auto t = gen_trajectory(spec, 64);
      EXPECT_TRUE(t.within(MotionBounds{}));
      for (int r = t.protected_rows.begin; r < t.protected_rows.end; ++r) {
        EXPECT_EQ(t.alpha[r], 0.0);
        EXPECT_EQ(t.shift[r], RowShift{});
      }
    }
  }
}

TEST(GenTrajectory, ValidatesSpec) {
  auto spec = TrajectorySpec::preset(TrajectoryKind::Harmonic, Severity::Mild);
  spec.components.resize(1);
  EXPECT_THROW(gen_trajectory(spec, 64), ContractViolation);
  spec = TrajectorySpec::preset(TrajectoryKind::SingleSine, Severity::Mild);
  spec.components.push_back({1, 0, 1});
  EXPECT_THROW(gen_trajectory(spec, 64), ContractViolation);
  EXPECT_THROW(gen_trajectory(TrajectorySpec::preset(TrajectoryKind::Random, Severity::Mild), 15), ContractViolation);
}

TEST(SavitzkyGolay, MatchesPerWindowPolyfit) {
  Rng rng(7);
  std::vector<double> y(320);
  for (auto& v : y) v = rng.normal();
  const auto got = SavitzkyGolay(21, 3).smooth(y);
  const auto ref = oracle::savgol_polyfit(y, 21, 3);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(got[i], ref[i], 1e-10) << i;
}

TEST(SavitzkyGolay, PreservesCubics) {
  std::vector<double> y(50);
  for (int i = 0; i < 50; ++i) y[i] = 0.3 - 0.1 * i + 0.02 * i * i - 0.001 * i * i * i;
  const auto s = SavitzkyGolay(21, 3).smooth(y);
  for (int i = 0; i < 50; ++i) EXPECT_NEAR(s[i], y[i], 1e-9);
}

TEST(GenTrajectory, RandomIsSmootherThanRawNoise) {
  // Seed 7, 320 rows: compare the smoothed channel's largest row-to-row step
  // with the raw Gaussian's, both at unit peak.
  const auto spec = TrajectorySpec::preset(TrajectoryKind::Random, Severity::Mild, 7);
  const auto t = gen_trajectory(spec, 320, 0.0);
  Rng rng(7);
  std::vector<double> raw(320);
  for (auto& v : raw) v = rng.normal();
  double peak = 0.0;
  for (double v : raw) peak = std::max(peak, std::abs(v));
  double raw_step = 0.0, traj_step = 0.0;
  for (int i = 1; i < 320; ++i) {
    raw_step = std::max(raw_step, std::abs(raw[i] - raw[i - 1]) / peak);
    traj_step = std::max(traj_step, std::abs(t.alpha[i] - t.alpha[i - 1]) / spec.amplitude_deg);
  }
  EXPECT_LT(traj_step, raw_step);
  // The first channel is exactly the polyfit smoothing of the first draws.
  const auto smooth = oracle::savgol_polyfit(raw, 21, 3);
  double speak = 0.0;
  for (double v : smooth) speak = std::max(speak, std::abs(v));
  for (int i = 0; i < 320; ++i) EXPECT_NEAR(t.alpha[i], spec.amplitude_deg * smooth[i] / speak, 1e-9);
}

TEST(ApplyTranslation, ZeroShiftIsExactIdentity) {
  const auto y = ComplexImage(oracle::random_complex(32, 32, 1), Domain::KSpace);
  EXPECT_EQ(apply_translation(y, MotionTrajectory::zero(32)), y);
}

TEST(ApplyTranslation, UniformShiftIsCircularShift) {
  const auto x = ComplexImage(oracle::random_complex(32, 32, 2), Domain::Image);
  const auto out = ifft2c(apply_translation(fft2c(x), uniform_trajectory(32, 0.0, 3.0, 0.0)));
  double err = 0.0;
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) err = std::max(err, std::abs(out(r, c) - x(r, (c - 3 + 32) % 32)));
  EXPECT_LT(err, 1e-10);
}

TEST(ApplyTranslation, PurePhase) {
  const auto y = ComplexImage(oracle::random_complex(32, 32, 3), Domain::KSpace);
  const auto t = gen_trajectory(TrajectorySpec::preset(TrajectoryKind::Random, Severity::Severe, 5), 32);
  const auto out = apply_translation(y, t);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(std::abs(out.values()[i]), std::abs(y.values()[i]), 1e-12);
}

TEST(ApplyTranslation, RejectsLengthMismatch) {
  const auto y = ComplexImage(oracle::random_complex(32, 32, 3), Domain::KSpace);
  EXPECT_THROW(apply_translation(y, MotionTrajectory::zero(16)), ContractViolation);
  EXPECT_THROW(apply_rotation(y, MotionTrajectory::zero(16)), ContractViolation);
}

TEST(ApplyRotation, ZeroRotationIsIdentity) {
  const auto y = ComplexImage(oracle::random_complex(64, 64, 4), Domain::KSpace);
  EXPECT_LT(relative_l2(apply_rotation(y, MotionTrajectory::zero(64)), y), 1e-6);
}

TEST(ApplyRotation, MatchesImageDomainRotation) {
  // Smooth off-center blobs: band-limited enough for bicubic to be a fair
  // reference, asymmetric so a sign flip is visible.
  const int n = 64;
  RealImage x(n, n);
  const double blobs[3][4] = {{20, 30, 3.0, 1.0}, {40, 22, 2.5, 0.7}, {34, 44, 4.0, 0.5}};
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      for (const auto& b : blobs) x(r, c) += b[3] * std::exp(-((r - b[0]) * (r - b[0]) + (c - b[1]) * (c - b[1])) / (2 * b[2] * b[2]));
  const auto y = fft2c(ComplexImage::from_real(x));
  const auto rotated = ifft2c(apply_rotation(y, uniform_trajectory(n, 3.0, 0.0, 0.0))).magnitude();
  const auto ref = oracle::rotate_image(x, deg_to_rad(3.0));
  EXPECT_GT(oracle::psnr_crop(ref, rotated, 0.8), 35.0);
  // The opposite sign must not match as well.
  const auto wrong = oracle::rotate_image(x, deg_to_rad(-3.0));
  EXPECT_LT(oracle::psnr_crop(wrong, rotated, 0.8), oracle::psnr_crop(ref, rotated, 0.8) - 5.0);
}

TEST(ApplyRotation, MatchesPerRowNonuniformDft) {
  const int n = 16;
  const auto y = ComplexImage(oracle::random_complex(n, n, 8), Domain::KSpace);
  auto t = MotionTrajectory::zero(n, RowBand{7, 9});
  for (int r = 0; r < n; ++r)
    if (!t.protected_rows.contains(r)) t.alpha[r] = 1.5 * std::sin(0.7 * r);
  const auto out = apply_rotation(y, t);
  const auto img = oracle::dft2(y.array(), true);
  Array2D<cplx> ref(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (t.protected_rows.contains(r)) {
        ref(r, c) = y(r, c);
        continue;
      }
      const double a = deg_to_rad(t.alpha[r]);
      const double kx = c - n / 2, ky = r - n / 2;
      ref(r, c) = oracle::ndft_point(img, -std::sin(a) * kx + std::cos(a) * ky, std::cos(a) * kx + std::sin(a) * ky);
    }
  }
  EXPECT_LT(relative_l2(out.array(), ref), 1e-4);
  for (int r = 7; r < 9; ++r)
    for (int c = 0; c < n; ++c) EXPECT_EQ(out(r, c), y(r, c));
}

TEST(Corrupt, ZeroTrajectoryIsIdentity) {
  const auto x = ComplexImage::from_real(shepp_logan(64, 64));
  Rng rng(1);
  EXPECT_LT(relative_l2(corrupt(x, MotionTrajectory::zero(64), {}, rng), x), 1e-6);
}

TEST(Corrupt, MildHarmonicDegradesPhantom) {
  const auto clean = shepp_logan(64, 64);
  const auto traj = gen_trajectory(TrajectorySpec::preset(TrajectoryKind::Harmonic, Severity::Mild, 1), 64);
  Rng rng(1);
  const auto c = corrupt(ComplexImage::from_real(clean), traj, {}, rng).magnitude();
  EXPECT_LT(psnr(clean, c), 30.0);
}

TEST(Corrupt, ProtectedRowsUntouched) {
  const auto x = ComplexImage::from_real(shepp_logan(64, 64));
  const auto traj = gen_trajectory(TrajectorySpec::preset(TrajectoryKind::Random, Severity::Severe, 9), 64);
  Rng rng(1);
  const auto y = fft2c(x);
  const auto yc = corrupt_kspace(x, traj, {}, rng);
  for (int r = traj.protected_rows.begin; r < traj.protected_rows.end; ++r)
    for (int c = 0; c < 64; ++c) EXPECT_EQ(yc(r, c), y(r, c));
}

TEST(Corrupt, CommutesWhenOneMotionIsAbsent) {
  const auto y = fft2c(ComplexImage::from_real(shepp_logan(64, 64)));
  auto rot_only = gen_trajectory(TrajectorySpec::preset(TrajectoryKind::Harmonic, Severity::Mild, 2), 64);
  auto shift_only = rot_only;
  for (auto& s : rot_only.shift) s = {};
  for (auto& a : shift_only.alpha) a = 0.0;
  for (const auto* t : {&rot_only, &shift_only}) {
    const auto tr = apply_rotation(apply_translation(y, *t), *t);
    const auto rt = apply_translation(apply_rotation(y, *t), *t);
    EXPECT_LT(relative_l2(tr, rt), 2e-6);
  }
}

TEST(Invert, ZeroTrajectoryIsIdentity) {
  const auto x = ComplexImage(oracle::random_complex(32, 32, 6), Domain::Image);
  EXPECT_LT(relative_l2(invert(x, MotionTrajectory::zero(32)), x), 1e-6);
}

TEST(Invert, MatchedTrajectoryBeatsZeroTrajectory) {
  const auto x = ComplexImage::from_real(shepp_logan(64, 64));
  const auto traj = gen_trajectory(TrajectorySpec::preset(TrajectoryKind::Harmonic, Severity::Mild, 4), 64);
  Rng rng(0);
  const auto c = corrupt(x, traj, {}, rng);
  const double matched = relative_l2(invert(c, traj), x);
  const double wrong = relative_l2(invert(c, MotionTrajectory::zero(64, traj.protected_rows)), x);
  EXPECT_GE(wrong, 10.0 * matched) << matched << " vs " << wrong;
}

TEST(Invert, PureTranslationIsExactlyReversible) {
  const auto x = ComplexImage(oracle::random_complex(32, 32, 6), Domain::Image);
  auto traj = gen_trajectory(TrajectorySpec::preset(TrajectoryKind::Random, Severity::Severe, 4), 32);
  for (auto& a : traj.alpha) a = 0.0;
  Rng rng(0);
  EXPECT_LT(relative_l2(invert(corrupt(x, traj, {}, rng), traj), x), 1e-6);
}

TEST(AddNoise, InfiniteSnrIsIdentity) {
  const auto y = ComplexImage(oracle::random_complex(16, 16, 1), Domain::KSpace);
  Rng rng(3);
  EXPECT_EQ(add_noise(y, std::numeric_limits<double>::infinity(), rng), y);
  EXPECT_THROW(add_noise(y, std::nan(""), rng), ContractViolation);
}

TEST(AddNoise, EmpiricalSnrMatchesRequest) {
  const auto y = fft2c(ComplexImage::from_real(shepp_logan(64, 64)));
  double signal = 0.0;
  for (const auto& v : y.values()) signal += std::norm(v);
  Rng rng(11);
  double noise = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const auto n = add_noise(y, 30.0, rng);
    for (std::size_t i = 0; i < y.size(); ++i) noise += std::norm(n.values()[i] - y.values()[i]);
  }
  EXPECT_NEAR(10.0 * std::log10(signal / (noise / 100.0)), 30.0, 0.5);
}

TEST(AddNoise, SeedsDifferButSigmaAgrees) {
  const auto y = fft2c(ComplexImage::from_real(shepp_logan(64, 64)));
  auto sigma = [&](std::uint64_t seed) {
    Rng rng(seed);
    const auto n = add_noise(y, 20.0, rng);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::norm(n.values()[i] - y.values()[i]);
    return std::pair{n, std::sqrt(s / (2.0 * y.size()))};
  };
  const auto [a, sa] = sigma(1);
  const auto [b, sb] = sigma(2);
  EXPECT_NE(a, b);
  EXPECT_NEAR(sa / sb, 1.0, 0.05);
  EXPECT_EQ(sigma(1).first, a);
}
