#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "afplus/core/error.hpp"
#include "afplus/core/random.hpp"
#include "afplus/motion/savgol.hpp"

namespace afp {

enum class TrajectoryKind { SingleSine, Harmonic, Random };
enum class Severity { Mild, Severe };

/// Box limits on per-row motion.
struct MotionBounds {
  double max_rotation_deg = 2.0;
  double max_shift_px = 5.0;
};

/// One sinusoid of a trajectory waveform. Frequency is in cycles per full
/// k-space traversal.
struct WaveComponent {
  double frequency = 1.0;
  double phase = 0.0;
  double weight = 1.0;
  friend bool operator==(const WaveComponent&, const WaveComponent&) = default;
};

/// Generative description of a motion trajectory.
struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::Harmonic;
  double amplitude_deg = 1.0;
  double amplitude_px = 2.0;
  std::vector<WaveComponent> components;
  std::uint64_t seed = 0;
  Severity severity = Severity::Mild;

  friend bool operator==(const TrajectorySpec&, const TrajectorySpec&) = default;

  /// Default amplitudes for a severity class: mild 1 deg / 2 px, severe at
  /// the motion bounds (2 deg / 5 px).
  static TrajectorySpec preset(TrajectoryKind kind, Severity severity, std::uint64_t seed = 0) {
    TrajectorySpec s;
    s.kind = kind;
    s.severity = severity;
    s.seed = seed;
    s.amplitude_deg = severity == Severity::Mild ? 1.0 : 2.0;
    s.amplitude_px = severity == Severity::Mild ? 2.0 : 5.0;
    switch (kind) {
      case TrajectoryKind::SingleSine: s.components = {{2.0, 0.0, 1.0}}; break;
      case TrajectoryKind::Harmonic: s.components = {{1.0, 0.0, 1.0}, {3.0, 0.7, 0.5}, {5.0, 1.4, 0.25}}; break;
      case TrajectoryKind::Random: s.components = {}; break;
    }
    return s;
  }

  void validate() const {
    require(std::isfinite(amplitude_deg) && amplitude_deg >= 0.0, "TrajectorySpec: amplitude_deg must be >= 0");
    require(std::isfinite(amplitude_px) && amplitude_px >= 0.0, "TrajectorySpec: amplitude_px must be >= 0");
    if (kind == TrajectoryKind::SingleSine)
      require(components.size() == 1, "TrajectorySpec: SingleSine needs exactly one component");
    if (kind == TrajectoryKind::Harmonic)
      require(components.size() >= 2, "TrajectorySpec: Harmonic needs at least two components");
    for (const auto& c : components)
      require(std::isfinite(c.frequency) && std::isfinite(c.phase) && std::isfinite(c.weight),
              "TrajectorySpec: non-finite component");
  }
};

/// Half-open range of k-space rows.
struct RowBand {
  int begin = 0;
  int end = 0;
  bool contains(int r) const noexcept { return r >= begin && r < end; }
  int size() const noexcept { return end - begin; }
  friend bool operator==(const RowBand&, const RowBand&) = default;
};

/// Protected low-frequency band: `fraction * rows` rounded to an even count,
/// centered indices [-c/2, c/2) around the DC row.
inline RowBand protected_band(int rows, double fraction) {
  require(fraction >= 0.0 && fraction < 1.0, "protected_band: center fraction must be in [0, 1)");
  const int count = 2 * static_cast<int>(std::lround(0.5 * fraction * rows));
  return {rows / 2 - count / 2, rows / 2 + count / 2};
}

struct RowShift {
  double dx = 0.0;  // read direction (columns), pixels
  double dy = 0.0;  // phase-encode direction (rows), pixels
  friend bool operator==(const RowShift&, const RowShift&) = default;
};

/// Per-row rigid motion: rotation in degrees and a 2-D shift in pixels.
struct MotionTrajectory {
  std::vector<double> alpha;
  std::vector<RowShift> shift;
  RowBand protected_rows;

  static MotionTrajectory zero(int rows, RowBand band = {}) {
    return {std::vector<double>(rows, 0.0), std::vector<RowShift>(rows), band};
  }

  int rows() const noexcept { return static_cast<int>(alpha.size()); }

  bool is_zero() const {
    return std::all_of(alpha.begin(), alpha.end(), [](double a) { return a == 0.0; }) &&
           std::all_of(shift.begin(), shift.end(), [](const RowShift& s) { return s.dx == 0.0 && s.dy == 0.0; });
  }

  MotionTrajectory negated() const {
    MotionTrajectory t = *this;
    for (auto& a : t.alpha) a = -a;
    for (auto& s : t.shift) s = {-s.dx, -s.dy};
    return t;
  }

  bool within(const MotionBounds& b) const {
    for (int r = 0; r < rows(); ++r) {
      if (std::abs(alpha[r]) > b.max_rotation_deg) return false;
      if (std::abs(shift[r].dx) > b.max_shift_px || std::abs(shift[r].dy) > b.max_shift_px) return false;
      if (protected_rows.contains(r) && (alpha[r] != 0.0 || shift[r].dx != 0.0 || shift[r].dy != 0.0)) return false;
    }
    return true;
  }

  void validate(int expected_rows) const {
    require(static_cast<int>(alpha.size()) == expected_rows && static_cast<int>(shift.size()) == expected_rows,
            "MotionTrajectory: " + std::to_string(alpha.size()) + " rows, expected " + std::to_string(expected_rows));
    require(protected_rows.begin >= 0 && protected_rows.end <= expected_rows && protected_rows.begin <= protected_rows.end,
            "MotionTrajectory: protected band out of range");
  }

  friend bool operator==(const MotionTrajectory&, const MotionTrajectory&) = default;
};

inline constexpr int kSavgolWindow = 21;
inline constexpr int kSavgolOrder = 3;

/// Sample a trajectory from its generative spec. The sinusoid kinds evaluate
/// the weighted sum at t = row / n_rows with a seeded phase offset per motion
/// channel (rotation, dx, dy), so the three channels differ. The random kind
/// draws i.i.d. Gaussians per row and channel, smooths them, and rescales to
/// unit peak. Sinusoid sums are normalized by their total weight. Channels
/// are then multiplied by the TrajectorySpec amplitude and clamped to `bounds`.
inline MotionTrajectory gen_trajectory(const TrajectorySpec& spec, int n_rows, Rng& rng,
                                       double center_fraction = 0.08, MotionBounds bounds = {}) {
  require(n_rows >= 16, "gen_trajectory: need at least 16 rows, got " + std::to_string(n_rows));
  spec.validate();
  const RowBand band = protected_band(n_rows, center_fraction);
  const double amps[3] = {spec.amplitude_deg, spec.amplitude_px, spec.amplitude_px};
  const double limits[3] = {bounds.max_rotation_deg, bounds.max_shift_px, bounds.max_shift_px};
  std::vector<double> channel[3];

  if (spec.kind == TrajectoryKind::Random) {
    const SavitzkyGolay sg(kSavgolWindow, kSavgolOrder);
    for (auto& ch : channel) {
      std::vector<double> noise(static_cast<std::size_t>(n_rows));
      for (auto& v : noise) v = rng.normal();
      ch = n_rows >= kSavgolWindow ? sg.smooth(noise) : noise;
    }
  } else {
    double wsum = 0.0;
    for (const auto& c : spec.components) wsum += std::abs(c.weight);
    for (auto& ch : channel) {
      const double offset = rng.uniform(0.0, 2.0 * std::numbers::pi);
      ch.resize(static_cast<std::size_t>(n_rows));
      for (int r = 0; r < n_rows; ++r) {
        const double t = static_cast<double>(r) / n_rows;
        double v = 0.0;
        for (const auto& c : spec.components)
          v += c.weight * std::sin(2.0 * std::numbers::pi * c.frequency * t + c.phase + offset);
        ch[r] = wsum > 0.0 ? v / wsum : 0.0;
      }
    }
  }

  for (int k = 0; k < 3; ++k) {
    auto& ch = channel[k];
    if (spec.kind == TrajectoryKind::Random) {
      double peak = 0.0;
      for (int r = 0; r < n_rows; ++r)
        if (!band.contains(r)) peak = std::max(peak, std::abs(ch[r]));
      for (auto& v : ch) v = peak > 0.0 ? v / peak : 0.0;
    }
    for (int r = 0; r < n_rows; ++r) {
      ch[r] = band.contains(r) ? 0.0 : std::clamp(amps[k] * ch[r], -limits[k], limits[k]);
    }
  }

  MotionTrajectory out = MotionTrajectory::zero(n_rows, band);
  for (int r = 0; r < n_rows; ++r) {
    out.alpha[r] = channel[0][r];
    out.shift[r] = {channel[1][r], channel[2][r]};
  }
  return out;
}

inline MotionTrajectory gen_trajectory(const TrajectorySpec& spec, int n_rows, double center_fraction = 0.08,
                                       MotionBounds bounds = {}) {
  Rng rng(spec.seed);
  return gen_trajectory(spec, n_rows, rng, center_fraction, bounds);
}

}  // namespace afp
