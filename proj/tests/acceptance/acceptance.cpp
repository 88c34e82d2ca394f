// Acceptance run: one PASS/FAIL line per criterion on stdout, progress on
// stderr. `acceptance 4 6` runs a subset. Exit status 0 only if every
// selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "afplus/bench/report.hpp"
#include "afplus/prior/train.hpp"
#include "oracles.hpp"

using namespace afp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / "afplus_acceptance" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

constexpr TrajectoryKind kKinds[] = {TrajectoryKind::SingleSine, TrajectoryKind::Harmonic, TrajectoryKind::Random};

// Documented identity accuracy of one NUFFT resampling pass.
constexpr double kNufftTolerance = 1e-6;

// ---------------------------------------------------------------- 1

Outcome round_trip() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::vector<double> errs;
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 100; ++i) {
      Rng img_rng(mix_seed(1, static_cast<std::uint64_t>(k * 1000 + i)));
      const auto x = ComplexImage::from_real(random_phantom(64, 64, img_rng));
      const auto traj = gen_trajectory(TrajectorySpec::preset(kKinds[k], Severity::Mild, mix_seed(2, k * 1000 + i)), 64);
      Rng noise(0);
      const double e = relative_l2(invert(corrupt(x, traj, {}, noise), traj), x);
      errs.push_back(e);
      worst = std::max(worst, e);
    }
  const double secs = seconds_since(t0);
  std::sort(errs.begin(), errs.end());
  return {worst < 5e-3 && secs < 60.0,
          "300 pairs (mild presets, 64x64): max rel err " + fmt("%.3g", worst) + ", median " +
              fmt("%.3g", errs[errs.size() / 2]) + " (need < 5e-3); " + fmt("%.1f", secs) + " s (need < 60)"};
}

// ---------------------------------------------------------------- 2

Outcome commutativity() {
  double worst = 0.0;
  std::vector<double> d;
  for (int i = 0; i < 50; ++i) {
    Rng img_rng(mix_seed(3, static_cast<std::uint64_t>(i)));
    const auto y = fft2c(ComplexImage::from_real(random_phantom(64, 64, img_rng)));
    const auto t = gen_trajectory(TrajectorySpec::preset(kKinds[i % 3], Severity::Mild, mix_seed(4, i)), 64);
    const auto tr = apply_rotation(apply_translation(y, t), t);
    const auto rt = apply_translation(apply_rotation(y, t), t);
    d.push_back(relative_l2(tr, rt));
    worst = std::max(worst, d.back());
  }
  std::sort(d.begin(), d.end());
  return {worst < 2.0 * kNufftTolerance, "50 cases: max |TR - RT|/|TR| " + fmt("%.3g", worst) + ", median " +
                                             fmt("%.3g", d[d.size() / 2]) + " (need < " +
                                             fmt("%.0e", 2.0 * kNufftTolerance) + ")"};
}

// ---------------------------------------------------------------- 3

class SigmoidPrior final : public ScalePrior {
 public:
  ad::Var scale_map(const ad::Var& x) const override { return ad::sigmoid(ad::add_scalar(ad::scale(x, 3.0), -1.0)); }
};

double autofocus_fd_worst() {
  const SigmoidPrior prior;
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    Rng rng(100 + k);
    const auto ksp = fft2c(ComplexImage(oracle::random_complex(32, 32, 200 + k), Domain::Image));
    auto t = MotionTrajectory::zero(32, protected_band(32, 0.08));
    for (int r = 0; r < 32; ++r) {
      if (t.protected_rows.contains(r)) continue;
      t.alpha[r] = rng.uniform(-1.5, 1.5);
      t.shift[r] = {rng.uniform(-3, 3), rng.uniform(-3, 3)};
    }
    const ScalePrior* p = k % 2 ? &prior : nullptr;
    const auto g = af_grad(ksp, t, p);
    for (int s = 0; s < 24; ++s) {
      int r;
      do r = static_cast<int>(rng.uniform(0, 32));
      while (t.protected_rows.contains(r));
      const int which = s % 3;
      const double h = which == 0 ? 1e-3 : 1e-4;
      auto bump = [&](MotionTrajectory x, double dlt) {
        if (which == 0) x.alpha[r] += dlt;
        else if (which == 1) x.shift[r].dx += dlt;
        else x.shift[r].dy += dlt;
        return x;
      };
      const double fd = (af_loss(ksp, bump(t, h), p) - af_loss(ksp, bump(t, -h), p)) / (2 * h);
      const double an = which == 0 ? g.d_alpha[r] : (which == 1 ? g.d_shift[r].dx : g.d_shift[r].dy);
      worst = std::max(worst, std::abs(an - fd) / std::max(std::abs(fd), 1e-6));
    }
  }
  return worst;
}

double unrolled_fd_worst() {
  Rng img_rng(8);
  const TrainSample sample{random_phantom(16, 16, img_rng),
                           TrajectorySpec::preset(TrajectoryKind::Harmonic, Severity::Mild, 8000)};
  TrainConfig cfg;
  cfg.inner.n_steps = 2;
  cfg.inner.lr = 0.1;
  cfg.seed = 11;
  const auto s = prepare_sample(sample, cfg, 0);
  PriorNetConfig nc;
  nc.depth = 1;
  nc.base_channels = 2;
  PriorNet net(nc, 5);
  const auto ev = unrolled_objective(net, s, cfg.inner, true);
  double gmax = 0.0;
  for (const auto& g : ev.grads)
    for (double v : g.data()) gmax = std::max(gmax, std::abs(v));
  Rng rng(13);
  const double h = 1e-5;
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto t = static_cast<std::size_t>(rng.next_u64() % net.parameters().size());
    const auto i = static_cast<std::size_t>(rng.next_u64() % net.parameters()[t].value.size());
    PriorNet plus = net, minus = net;
    plus.mutable_parameters()[t].value[i] += h;
    minus.mutable_parameters()[t].value[i] -= h;
    const double fd =
        (unrolled_objective(plus, s, cfg.inner, false).loss - unrolled_objective(minus, s, cfg.inner, false).loss) /
        (2 * h);
    worst = std::max(worst, std::abs(fd - ev.grads[t][i]) / std::max(std::abs(fd), 1e-3 * gmax));
  }
  return worst;
}

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const double af = autofocus_fd_worst();
  const double un = unrolled_fd_worst();
  const double secs = seconds_since(t0);
  return {af < 1e-3 && un < 1e-2 && secs < 600.0,
          "autofocus worst rel err " + fmt("%.3g", af) + " over 240 coords (need < 1e-3); unrolled dL_NN/dp " +
              fmt("%.3g", un) + " over 20 params (need < 1e-2); " + fmt("%.1f", secs) + " s"};
}

// ---------------------------------------------------------------- 4 and 7

struct Efficacy {
  RunReport corrupted, refined;
  std::vector<ReportRow> rows;
};

Efficacy efficacy_runs(std::optional<double> noise_snr_db, const std::string& dir) {
  const auto m = gen_phantoms(50, 64, 2024, scratch(dir));
  ExperimentSpec s;
  s.name = dir;
  s.seed = 7;
  s.corruption.noise_snr_db = noise_snr_db;
  s.method = Method::None;
  auto none = run_experiment(m, s);
  s.method = Method::Autofocusing;
  auto af = run_experiment(m, s);
  auto rows = report_rows({none, af});
  return {std::move(none), std::move(af), std::move(rows)};
}

Outcome efficacy() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto e = efficacy_runs(std::nullopt, "efficacy");
  const double secs = seconds_since(t0);
  bool all_improve = true;
  std::string means;
  for (Metric m : kReportMetrics) {
    const double a = summarize(e.rows[0].column(m)).mean, b = summarize(e.rows[1].column(m)).mean;
    all_improve = all_improve && b > a;
    means += " " + to_string(m) + " " + fmt("%.4g", a) + "->" + fmt("%.4g", b) + ";";
  }
  const double gain = summarize(e.rows[1].column(Metric::Psnr)).mean - summarize(e.rows[0].column(Metric::Psnr)).mean;
  const bool ok = gain >= 1.0 && all_improve && e.refined.failures == 0 && secs < 1800.0;
  return {ok, "50 phantoms 64x64, mild harmonic: PSNR gain " + fmt("%.2f", gain) + " dB (need >= 1);" + means +
                  " failures " + std::to_string(e.refined.failures) + "; " + fmt("%.1f", secs) + " s"};
}

Outcome noise_resilience() {
  const auto e = efficacy_runs(30.0, "noise30");
  int improved = 0, n = 0;
  for (std::size_t i = 0; i < e.refined.images.size(); ++i) {
    const auto& im = e.refined.images[i];
    if (!im.ok) continue;
    ++n;
    if (im.refined.psnr - im.corrupted.psnr >= 1.0) ++improved;
  }
  const double frac = n ? static_cast<double>(improved) / 50.0 : 0.0;
  const double gain = summarize(e.rows[1].column(Metric::Psnr)).mean - summarize(e.rows[0].column(Metric::Psnr)).mean;
  return {frac >= 0.8, "30 dB k-space noise: " + std::to_string(improved) + "/50 cases gain >= 1 dB (" +
                           fmt("%.0f", 100 * frac) + "%, need >= 80%); mean gain " + fmt("%.2f", gain) + " dB"};
}

// ---------------------------------------------------------------- 5

// Toy meta-training at desk scale. The outer step is larger than the default
// 5e-5 because a few epochs must move the prior away from its neutral start.
constexpr int kToySide = 32;
constexpr int kToyTrain = 32;
constexpr int kToyVal = 16;
constexpr int kToyEpochs = 10;
constexpr double kToyOuterLr = 1e-3;
constexpr double kToyInnerLr = 0.03;
constexpr int kToyBase = 8;

Outcome prior_benefit() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = scratch("prior");
  const std::uint64_t seed = 31;
  const auto tr = gen_phantoms(kToyTrain, kToySide, seed, dir / "train", {PixelFormat::F32, Split::Train, false});
  const auto va = gen_phantoms(kToyVal, kToySide, seed + 1, dir / "val", {PixelFormat::F32, Split::Val, false});
  const auto traj = TrajectorySpec::preset(TrajectoryKind::Harmonic, Severity::Mild);
  std::vector<TrainSample> data;
  for (std::size_t i = 0; i < tr.entries.size(); ++i) {
    auto t = traj;
    t.seed = image_seed(seed, tr.entries[i].id);
    data.push_back({tr.load_image(i), t});
  }
  TrainConfig cfg;
  cfg.outer_lr = kToyOuterLr;
  cfg.epochs = kToyEpochs;
  cfg.inner.lr = kToyInnerLr;
  cfg.seed = seed;
  PriorNetConfig nc;
  nc.depth = 2;
  nc.base_channels = kToyBase;
  PriorNet net(nc, seed);
  net.zero_head();
  TrainOptions opt;
  opt.on_epoch = [](const EpochRecord& r) {
    std::cerr << "  [5] epoch " << r.epoch << " L_NN " << fmt("%.6f", r.mean_l_nn) << "\n";
  };
  const auto log = train(net, data, {}, cfg, opt);
  save_weights(net, dir / "prior.afpw");

  ExperimentSpec s;
  s.seed = seed + 2;
  s.autofocus.lr = kToyInnerLr;
  s.method = Method::Autofocusing;
  const auto af = run_experiment(va, s);
  s.method = Method::AutofocusingPlus;
  s.prior_weights = (dir / "prior.afpw").string();
  const auto afp = run_experiment(va, s);
  const auto rows = report_rows({af, afp});
  const auto t = paired_t(rows[2], rows[1], Metric::Psnr);
  const double a = summarize(rows[1].column(Metric::Psnr)).mean, b = summarize(rows[2].column(Metric::Psnr)).mean;
  const double secs = seconds_since(t0);
  return {b >= a && afp.failures == 0 && secs < 7200.0,
          "depth-2 prior, " + std::to_string(kToyTrain) + " phantoms x " + std::to_string(kToyEpochs) +
              " epochs (L_NN " + fmt("%.5f", log.epochs.front().mean_l_nn) + "->" +
              fmt("%.5f", log.epochs.back().mean_l_nn) + "); val PSNR Autofocusing " + fmt("%.3f", a) +
              ", Autofocusing+ " + fmt("%.3f", b) + "; paired one-sided t " + fmt("%.3f", t.t) + " (p " +
              fmt("%.3g", t.p_one_sided) + ", n " + std::to_string(t.n) + "); " + fmt("%.0f", secs) + " s"};
}

// ---------------------------------------------------------------- 6

Outcome metric_oracles() {
  double e_ssim = 0.0, e_ms = 0.0, e_psnr = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng ra(s), rb(s + 100);
    RealImage a(32, 32), b(32, 32);
    for (auto& v : a.values()) v = ra.uniform();
    for (std::size_t i = 0; i < b.size(); ++i) b.values()[i] = a.values()[i] + 0.3 * rb.normal();
    e_ssim = std::max(e_ssim, std::abs(ssim(a, b) - oracle::literal_ssim(a, b, oracle::literal_range(a)).ssim));
    const double w = kMsSsimWeights[0] + kMsSsimWeights[1];
    e_ms = std::max(e_ms, std::abs(ms_ssim_adaptive(a, b) -
                                   oracle::literal_ms_ssim(a, b, {kMsSsimWeights[0] / w, kMsSsimWeights[1] / w})));
    e_psnr = std::max(e_psnr, std::abs(psnr(a, b) - oracle::literal_psnr(a, b)));
  }
  Rng rx(77);
  RealImage x(32, 32);
  for (auto& v : x.values()) v = rx.uniform();
  const bool sentinels = ssim(x, x) == 1.0 && ms_ssim_adaptive(x, x) == 1.0 && std::isinf(psnr(x, x)) && psnr(x, x) > 0;
  return {e_ssim < 1e-8 && e_ms < 1e-10 && e_psnr < 1e-10 && sentinels,
          "10 random 32x32 pairs: SSIM err " + fmt("%.2g", e_ssim) + " (< 1e-8), MS-SSIM err " + fmt("%.2g", e_ms) +
              " (< 1e-10), PSNR err " + fmt("%.2g", e_psnr) + "; identical images give SSIM 1, MS-SSIM 1, PSNR +inf: " +
              (sentinels ? "yes" : "no")};
}

// ---------------------------------------------------------------- 8

int run_cli(const fs::path& cwd, const std::string& args) {
  const std::string cmd =
      "cd '" + cwd.string() + "' && '" + std::string(AFPLUS_CLI_PATH) + "' " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Outcome determinism() {
  const char* env = std::getenv("AFPLUS_OUTPUT_DIR");
  if (env && *env) return {false, "AFPLUS_OUTPUT_DIR is set; unset it to run this check"};
  const auto root = scratch("determinism");
  std::vector<std::string> problems;
  for (const char* run : {"a", "b"}) {
    // Same relative paths in each directory: the configs are identical,
    // only the worker count differs.
    const auto d = root / run;
    fs::create_directories(d);
    const int threads = std::string(run) == "a" ? 1 : 3;
    int rc = run_cli(d, "phantoms -n 6 --size 64 --seed 5 -o ph");
    rc |= run_cli(d, "train -m ph/manifest.json -o prior --epochs 1 --depth 1 --base-channels 2 --steps 2 --seed 3");
    rc |= run_cli(d, "bench -m ph/manifest.json -o bench --steps 10 --seed 9 --threads " + std::to_string(threads) +
                         " --method None --method Autofocusing --method AutofocusingPlus --method PriorOnlyDeblur"
                         " --prior-weights prior/weights.afpw");
    if (rc != 0) problems.push_back(std::string("cli run ") + run + " exited nonzero");
  }
  int compared = 0;
  for (const char* f : {"bench/report.json", "bench/report.csv", "bench/report.md", "prior/weights.afpw",
                        "ph/phantom_0003.f32"}) {
    if (!fs::exists(root / "a" / f)) {
      problems.push_back(std::string("missing ") + f);
      continue;
    }
    ++compared;
    if (file_bytes(root / "a" / f) != file_bytes(root / "b" / f)) problems.push_back(std::string(f) + " differs");
  }
  std::string detail = "two CLI pipelines (phantoms, train, bench with 4 methods, 1 vs 3 threads): " +
                       std::to_string(compared) + " artifacts compared";
  for (const auto& p : problems) detail += "; " + p;
  if (problems.empty()) detail += ", all byte-identical";
  return {problems.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"round-trip physics", round_trip},   {"commutativity", commutativity},
      {"gradient soundness", gradients},    {"demotion efficacy", efficacy},
      {"prior benefit ordering", prior_benefit}, {"metric correctness", metric_oracles},
      {"noise resilience", noise_resilience},    {"determinism", determinism}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  bool all = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    std::cerr << "criterion " << id << " (" << criteria[k].first << ") ...\n";
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[k].first << ": " << o.detail << std::endl;
  }
  return all ? 0 : 1;
}
