#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "afplus/metrics/metrics.hpp"
#include "afplus/prior/prior_net.hpp"

namespace afp {

struct TrainSample {
  RealImage clean;
  TrajectorySpec trajectory;
};

struct TrainConfig {
  double outer_lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int epochs = 160;
  AutofocusConfig inner{};
  std::optional<double> noise_snr_db;
  std::uint64_t seed = 0;

  void validate() const {
    require(outer_lr > 0.0 && std::isfinite(outer_lr), "TrainConfig: outer_lr must be positive");
    require(epochs >= 1, "TrainConfig: epochs must be >= 1");
    require(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0, "TrainConfig: betas must lie in (0, 1)");
    require(eps > 0.0, "TrainConfig: eps must be positive");
    inner.validate();
  }
};

/// A training pair after corruption: the network only ever sees `kspace`.
struct PreparedSample {
  ComplexImage kspace;
  RealImage clean;
  RowBand band;
};

/// Corrupts one sample deterministically from (seed, index).
inline PreparedSample prepare_sample(const TrainSample& s, const TrainConfig& cfg, std::size_t index) {
  const int h = s.clean.height();
  const auto traj = gen_trajectory(s.trajectory, h, cfg.inner.center_fraction, cfg.inner.bounds);
  Rng noise(mix_seed(cfg.seed, index));
  const CorruptionConfig cc{cfg.inner.center_fraction, cfg.noise_snr_db};
  return {corrupt_kspace(ComplexImage::from_real(s.clean), traj, cc, noise), s.clean, traj.protected_rows};
}

struct OuterEvaluation {
  double loss = 0.0;
  std::vector<ad::Tensor4> grads;  // empty unless requested
};

/// L_NN = mean |refined magnitude - clean| after the full inner loop run with
/// the network's current parameters, and optionally its exact gradient with
/// respect to every parameter through all unrolled inner steps.
inline OuterEvaluation unrolled_objective(const PriorNet& net, const PreparedSample& s, const AutofocusConfig& inner,
                                          bool with_grad) {
  const std::vector<ad::Var> params = with_grad ? net.leaf_params() : net.constant_params();
  const BoundPrior prior(net, params);
  const AutofocusObjective obj(s.kspace, s.band, &prior);
  const auto run = unroll_demotion(obj, inner, with_grad);
  ad::GradMode rec(with_grad);
  const ad::Var mag = obj.op().magnitude(run.alpha, run.dx, run.dy);
  const ad::Var l_nn = ad::mean_all(ad::abs(ad::sub(mag, ad::Var::constant(ad::to_tensor(s.clean)))));
  OuterEvaluation out{l_nn.item(), {}};
  if (with_grad) {
    const auto g = ad::grad(l_nn, params);
    out.grads.reserve(g.size());
    for (const auto& v : g) out.grads.push_back(v.value());
  }
  return out;
}

/// Supervised objective of the stand-alone baseline: mean |peak * S(x / peak)
/// - clean| on the corrupted magnitude x, no inner loop.
inline OuterEvaluation deblur_objective(const PriorNet& net, const PreparedSample& s, bool with_grad) {
  const RealImage mag = ifft2c(s.kspace).magnitude();
  double peak = 0.0;
  for (double v : mag.values()) peak = std::max(peak, v);
  if (peak <= 0.0) peak = 1.0;
  ad::GradMode rec(with_grad);
  const std::vector<ad::Var> params = with_grad ? net.leaf_params() : net.constant_params();
  const ad::Var x = ad::scale(ad::Var::constant(ad::to_tensor(mag)), 1.0 / peak);
  const ad::Var out = ad::scale(net.apply(x, params), peak);
  const ad::Var loss = ad::mean_all(ad::abs(ad::sub(out, ad::Var::constant(ad::to_tensor(s.clean)))));
  OuterEvaluation ev{loss.item(), {}};
  if (with_grad)
    for (const auto& g : ad::grad(loss, params)) ev.grads.push_back(g.value());
  return ev;
}

struct EpochRecord {
  int epoch = 0;
  double mean_l_nn = 0.0;
  double val_psnr = std::numeric_limits<double>::quiet_NaN();
  double val_ssim = std::numeric_limits<double>::quiet_NaN();
  bool operator==(const EpochRecord&) const = default;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;

  std::string csv() const {
    std::string out = "epoch,mean_l_nn,val_psnr,val_ssim\n";
    char buf[160];
    for (const auto& e : epochs) {
      std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g\n", e.epoch, e.mean_l_nn, e.val_psnr, e.val_ssim);
      out += buf;
    }
    return out;
  }
};

/// Per-element Adam moments for the outer loop, kept in double precision.
struct OuterAdam {
  std::vector<std::vector<double>> m, v;
  std::int64_t step = 0;

  void init(const PriorNet& net) {
    m.clear();
    v.clear();
    for (const auto& p : net.parameters()) {
      m.emplace_back(p.value.size(), 0.0);
      v.emplace_back(p.value.size(), 0.0);
    }
    step = 0;
  }

  /// Parameters are rounded back onto the float32 lattice after the update.
  void update(PriorNet& net, const std::vector<ad::Tensor4>& grads, const TrainConfig& cfg) {
    auto& ps = net.mutable_parameters();
    require(grads.size() == ps.size() && m.size() == ps.size(), "OuterAdam: parameter count mismatch");
    ++step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t t = 0; t < ps.size(); ++t) {
      auto& p = ps[t].value;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = grads[t][i];
        m[t][i] = cfg.beta1 * m[t][i] + (1.0 - cfg.beta1) * g;
        v[t][i] = cfg.beta2 * v[t][i] + (1.0 - cfg.beta2) * g * g;
        const double upd = cfg.outer_lr * (m[t][i] / c1) / (std::sqrt(v[t][i] / c2) + cfg.eps);
        p[i] = PriorNet::to_float_lattice(p[i] - upd);
      }
    }
  }
};

struct TrainOptions {
  /// Written after every epoch; with `resume`, an existing file is continued.
  std::optional<std::filesystem::path> checkpoint;
  bool resume = false;
  /// Epoch-log CSV rewritten after every epoch.
  std::optional<std::filesystem::path> log_csv;
  /// Stop after this many epochs in this call (simulates an interruption).
  std::optional<int> stop_after;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Checkpoint layout (little endian): magic "AFPCKPT\0", u32 version,
// f64 outer_lr, u64 seed, u32 epochs done, i64 Adam step, the weight blob,
// then per tensor the first and second moments as f64, then u32 log length
// and per record i32 epoch, f64 mean_l_nn, f64 val_psnr, f64 val_ssim.
inline constexpr char kCheckpointMagic[8] = {'A', 'F', 'P', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct TrainCheckpoint {
  PriorNet net;
  OuterAdam adam;
  int epochs_done = 0;
  TrainLog log;
};

inline void save_checkpoint(const TrainCheckpoint& ck, const TrainConfig& cfg, const std::filesystem::path& path) {
  ByteWriter w;
  w.raw(kCheckpointMagic, 8);
  w.u32(kCheckpointFormatVersion);
  w.f64(cfg.outer_lr);
  w.u64(cfg.seed);
  w.u32(static_cast<std::uint32_t>(ck.epochs_done));
  w.i64(ck.adam.step);
  const auto blob = encode_weights(ck.net);
  w.raw(blob.data(), blob.size());
  for (std::size_t t = 0; t < ck.adam.m.size(); ++t) {
    for (double x : ck.adam.m[t]) w.f64(x);
    for (double x : ck.adam.v[t]) w.f64(x);
  }
  w.u32(static_cast<std::uint32_t>(ck.log.epochs.size()));
  for (const auto& e : ck.log.epochs) {
    w.i32(e.epoch);
    w.f64(e.mean_l_nn);
    w.f64(e.val_psnr);
    w.f64(e.val_ssim);
  }
  // Write-then-rename so an interruption never leaves a torn checkpoint.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  w.save(tmp);
  std::filesystem::rename(tmp, path);
}

inline TrainCheckpoint load_checkpoint(const std::filesystem::path& path, const TrainConfig& cfg,
                                       const PriorNetConfig& expected) {
  ByteReader r = ByteReader::open(path);
  detail::read_header(r, kCheckpointMagic, kCheckpointFormatVersion, "checkpoint");
  if (r.f64() != cfg.outer_lr || r.u64() != cfg.seed)
    throw LoadError(path.string() + ": checkpoint was written with a different outer_lr or seed");
  const int done = static_cast<int>(r.u32());
  const std::int64_t step = r.i64();
  PriorNet net = decode_weights(r, expected);
  TrainCheckpoint ck{std::move(net), {}, done, {}};
  ck.adam.init(ck.net);
  ck.adam.step = step;
  for (std::size_t t = 0; t < ck.adam.m.size(); ++t) {
    for (double& x : ck.adam.m[t]) x = r.f64();
    for (double& x : ck.adam.v[t]) x = r.f64();
  }
  const std::uint32_t n = r.u32();
  if (n != static_cast<std::uint32_t>(done))
    throw LoadError(path.string() + ": log has " + std::to_string(n) + " records for " + std::to_string(done) +
                    " epochs");
  for (std::uint32_t i = 0; i < n; ++i) {
    EpochRecord e;
    e.epoch = r.i32();
    e.mean_l_nn = r.f64();
    e.val_psnr = r.f64();
    e.val_ssim = r.f64();
    ck.log.epochs.push_back(e);
  }
  if (!r.at_end()) throw LoadError(path.string() + ": trailing bytes in checkpoint");
  return ck;
}

namespace detail {

/// Seeded Fisher-Yates order for one epoch.
inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(mix_seed(seed, 0x5eed0000ULL + static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.next_u64() % i]);
  return idx;
}

inline void check_finite_step(const OuterEvaluation& ev, int epoch, std::size_t sample) {
  const auto where = " at epoch " + std::to_string(epoch) + ", sample " + std::to_string(sample);
  if (!std::isfinite(ev.loss)) throw NumericalFailure("train: non-finite L_NN" + where);
  for (const auto& g : ev.grads)
    if (!g.all_finite()) throw NumericalFailure("train: non-finite parameter gradient" + where);
}

}  // namespace detail

/// Mean PSNR / SSIM of prior-guided demotion over a validation set.
inline std::pair<double, double> validate_prior(const PriorNet& net, const std::vector<PreparedSample>& val,
                                                const AutofocusConfig& inner) {
  if (val.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double p = 0.0, s = 0.0;
  for (const auto& v : val) {
    const auto refined = demote(v.kspace, inner, &net).refined_image.magnitude();
    p += psnr(v.clean, refined);
    s += ssim(v.clean, refined);
  }
  return {p / static_cast<double>(val.size()), s / static_cast<double>(val.size())};
}

enum class TrainObjective { Unrolled, Deblur };

inline std::string to_string(TrainObjective o) { return o == TrainObjective::Unrolled ? "unrolled" : "deblur"; }

namespace detail {

inline TrainLog train_loop(PriorNet& net, const std::vector<TrainSample>& train_set,
                           const std::vector<TrainSample>& val_set, const TrainConfig& cfg, const TrainOptions& opt,
                           TrainObjective objective) {
  cfg.validate();
  require(!train_set.empty(), "train: empty training set");
  const int m = 1 << net.config().depth;
  std::vector<PreparedSample> tr, va;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    const auto& c = train_set[i].clean;
    require(c.height() % m == 0 && c.width() % m == 0,
            "train: sample " + std::to_string(i) + " size not divisible by 2^depth");
    tr.push_back(prepare_sample(train_set[i], cfg, i));
  }
  for (std::size_t i = 0; i < val_set.size(); ++i) va.push_back(prepare_sample(val_set[i], cfg, 1000000 + i));

  TrainCheckpoint st{net, {}, 0, {}};
  st.adam.init(net);
  if (opt.resume && opt.checkpoint && std::filesystem::exists(*opt.checkpoint))
    st = load_checkpoint(*opt.checkpoint, cfg, net.config());

  int ran = 0;
  while (st.epochs_done < cfg.epochs && !(opt.stop_after && ran >= *opt.stop_after)) {
    const int epoch = st.epochs_done + 1;
    double sum = 0.0;
    for (std::size_t i : epoch_order(tr.size(), cfg.seed, epoch)) {
      OuterEvaluation ev;
      try {
        ev = objective == TrainObjective::Unrolled ? unrolled_objective(st.net, tr[i], cfg.inner, true)
                                                   : deblur_objective(st.net, tr[i], true);
      } catch (const NumericalFailure& e) {
        throw NumericalFailure("train: epoch " + std::to_string(epoch) + ", sample " + std::to_string(i) + ": " +
                               e.what());
      }
      check_finite_step(ev, epoch, i);
      sum += ev.loss;
      st.adam.update(st.net, ev.grads, cfg);
    }
    EpochRecord rec{epoch, sum / static_cast<double>(tr.size())};
    if (objective == TrainObjective::Unrolled) {
      std::tie(rec.val_psnr, rec.val_ssim) = validate_prior(st.net, va, cfg.inner);
    } else if (!va.empty()) {
      double p = 0.0, s = 0.0;
      for (const auto& v : va) {
        const auto out = prior_deblur(st.net, ifft2c(v.kspace).magnitude());
        p += psnr(v.clean, out);
        s += ssim(v.clean, out);
      }
      rec.val_psnr = p / static_cast<double>(va.size());
      rec.val_ssim = s / static_cast<double>(va.size());
    }
    st.log.epochs.push_back(rec);
    st.epochs_done = epoch;
    ++ran;
    if (opt.checkpoint) save_checkpoint(st, cfg, *opt.checkpoint);
    if (opt.log_csv) {
      std::ofstream f(*opt.log_csv, std::ios::trunc);
      if (!f) throw IoError("train: cannot write " + opt.log_csv->string());
      f << st.log.csv();
    }
    if (opt.on_epoch) opt.on_epoch(rec);
  }
  net = st.net;
  return st.log;
}

}  // namespace detail

/// Meta-training of the scale prior (batch size one, unrolled inner loop).
/// `net` is updated in place; the returned log covers every completed epoch,
/// including ones restored from a checkpoint.
inline TrainLog train(PriorNet& net, const std::vector<TrainSample>& train_set,
                      const std::vector<TrainSample>& val_set, const TrainConfig& cfg, const TrainOptions& opt = {}) {
  return detail::train_loop(net, train_set, val_set, cfg, opt, TrainObjective::Unrolled);
}

/// Supervised training of the same network as a stand-alone deblurring map
/// (the prior-only baseline). cfg.inner only supplies corruption settings.
inline TrainLog train_deblur(PriorNet& net, const std::vector<TrainSample>& train_set,
                             const std::vector<TrainSample>& val_set, const TrainConfig& cfg,
                             const TrainOptions& opt = {}) {
  return detail::train_loop(net, train_set, val_set, cfg, opt, TrainObjective::Deblur);
}

}  // namespace afp
