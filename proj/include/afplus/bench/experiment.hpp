#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "afplus/bench/dataset.hpp"
#include "afplus/metrics/metrics.hpp"
#include "afplus/prior/prior_net.hpp"

namespace afp {

inline constexpr int kExperimentSchemaVersion = 1;
inline constexpr const char* kExperimentSchema = "afplus.experiment";
inline constexpr int kRunReportSchemaVersion = 1;
inline constexpr const char* kRunReportSchema = "afplus.run_report";

enum class Method { None, Autofocusing, AutofocusingPlus, PriorOnlyDeblur };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::None: return "None";
    case Method::Autofocusing: return "Autofocusing";
    case Method::AutofocusingPlus: return "AutofocusingPlus";
    case Method::PriorOnlyDeblur: return "PriorOnlyDeblur";
  }
  return "?";
}

/// Row label used in report tables.
inline std::string display_name(Method m) {
  switch (m) {
    case Method::None: return "Corrupted";
    case Method::Autofocusing: return "Autofocusing";
    case Method::AutofocusingPlus: return "Autofocusing+";
    case Method::PriorOnlyDeblur: return "Prior-only deblur";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::None, Method::Autofocusing, Method::AutofocusingPlus, Method::PriorOnlyDeblur})
    if (s == to_string(m)) return m;
  throw ContractViolation("unknown method '" + s + "' (expected None, Autofocusing, AutofocusingPlus or PriorOnlyDeblur)");
}

inline std::string to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::SingleSine: return "single_sine";
    case TrajectoryKind::Harmonic: return "harmonic";
    case TrajectoryKind::Random: return "random";
  }
  return "?";
}

inline TrajectoryKind parse_trajectory_kind(const std::string& s) {
  for (auto k : {TrajectoryKind::SingleSine, TrajectoryKind::Harmonic, TrajectoryKind::Random})
    if (s == to_string(k)) return k;
  throw ContractViolation("unknown trajectory kind '" + s + "' (expected single_sine, harmonic or random)");
}

inline std::string to_string(Severity s) { return s == Severity::Mild ? "mild" : "severe"; }

inline Severity parse_severity(const std::string& s) {
  if (s == "mild") return Severity::Mild;
  if (s == "severe") return Severity::Severe;
  throw ContractViolation("unknown severity '" + s + "' (expected mild or severe)");
}

/// Inner-loop settings used by the bench unless overridden; the step size is
/// the one that moves degree/pixel parameters appreciably in 30 steps.
inline AutofocusConfig bench_autofocus_defaults() {
  AutofocusConfig c;
  c.lr = 0.1;
  return c;
}

struct ExperimentSpec {
  std::string name = "experiment";
  TrajectorySpec trajectory = TrajectorySpec::preset(TrajectoryKind::Harmonic, Severity::Mild);
  CorruptionConfig corruption{};
  Method method = Method::Autofocusing;
  AutofocusConfig autofocus = bench_autofocus_defaults();
  std::optional<std::string> prior_weights;
  std::uint64_t seed = 0;

  void validate() const {
    trajectory.validate();
    corruption.validate();
    autofocus.validate();
    require(autofocus.center_fraction == corruption.center_fraction,
            "ExperimentSpec: autofocus and corruption center_fraction differ");
    if (method == Method::AutofocusingPlus || method == Method::PriorOnlyDeblur)
      require(prior_weights.has_value() && !prior_weights->empty(),
              "ExperimentSpec: method " + to_string(method) + " requires prior_weights");
  }
};

namespace detail {

/// Non-finite numbers become the strings "inf", "-inf", "nan".
inline json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double number_from(const json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw LoadError("expected a number, got '" + s + "'");
}

/// FNV-1a, so per-image seeds depend on the id text only.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

inline json to_json(const TrajectorySpec& t) {
  json comps = json::array();
  for (const auto& c : t.components) comps.push_back({{"frequency", c.frequency}, {"phase", c.phase}, {"weight", c.weight}});
  return {{"kind", to_string(t.kind)},       {"severity", to_string(t.severity)}, {"amplitude_deg", t.amplitude_deg},
          {"amplitude_px", t.amplitude_px}, {"components", std::move(comps)}};
}

inline TrajectorySpec trajectory_from_json(const json& j) {
  auto t = TrajectorySpec::preset(parse_trajectory_kind(j.at("kind").get<std::string>()),
                                  parse_severity(j.value("severity", std::string("mild"))));
  if (j.contains("amplitude_deg")) t.amplitude_deg = j.at("amplitude_deg").get<double>();
  if (j.contains("amplitude_px")) t.amplitude_px = j.at("amplitude_px").get<double>();
  if (j.contains("components")) {
    t.components.clear();
    for (const auto& c : j.at("components"))
      t.components.push_back({c.at("frequency").get<double>(), c.value("phase", 0.0), c.value("weight", 1.0)});
  }
  return t;
}

inline json to_json(const AutofocusConfig& a) {
  return {{"n_steps", a.n_steps},
          {"lr", a.lr},
          {"beta1", a.beta1},
          {"beta2", a.beta2},
          {"eps", a.eps},
          {"max_rotation_deg", a.bounds.max_rotation_deg},
          {"max_shift_px", a.bounds.max_shift_px}};
}

inline AutofocusConfig autofocus_from_json(const json& j, AutofocusConfig a = bench_autofocus_defaults()) {
  a.n_steps = j.value("n_steps", a.n_steps);
  a.lr = j.value("lr", a.lr);
  a.beta1 = j.value("beta1", a.beta1);
  a.beta2 = j.value("beta2", a.beta2);
  a.eps = j.value("eps", a.eps);
  a.bounds.max_rotation_deg = j.value("max_rotation_deg", a.bounds.max_rotation_deg);
  a.bounds.max_shift_px = j.value("max_shift_px", a.bounds.max_shift_px);
  return a;
}

inline json to_json(const ExperimentSpec& s) {
  json corr{{"center_fraction", s.corruption.center_fraction},
            {"noise_snr_db", s.corruption.noise_snr_db ? detail::number(*s.corruption.noise_snr_db) : json(nullptr)}};
  return {{"schema", kExperimentSchema},
          {"schema_version", kExperimentSchemaVersion},
          {"name", s.name},
          {"method", to_string(s.method)},
          {"seed", s.seed},
          {"trajectory", to_json(s.trajectory)},
          {"corruption", std::move(corr)},
          {"autofocus", to_json(s.autofocus)},
          {"prior_weights", s.prior_weights ? json(*s.prior_weights) : json(nullptr)}};
}

/// Parses and validates a spec; malformed input is a ContractViolation.
inline ExperimentSpec experiment_from_json(const json& j) {
  try {
    detail::check_schema(j, kExperimentSchema, kExperimentSchemaVersion, "experiment spec");
  } catch (const LoadError& e) {
    throw ContractViolation(e.what());
  }
  try {
    ExperimentSpec s;
    s.name = j.value("name", s.name);
    s.method = parse_method(j.at("method").get<std::string>());
    s.seed = j.value("seed", s.seed);
    if (j.contains("trajectory")) s.trajectory = trajectory_from_json(j.at("trajectory"));
    if (j.contains("corruption")) {
      const auto& c = j.at("corruption");
      s.corruption.center_fraction = c.value("center_fraction", s.corruption.center_fraction);
      if (c.contains("noise_snr_db") && !c.at("noise_snr_db").is_null())
        s.corruption.noise_snr_db = detail::number_from(c.at("noise_snr_db"));
    }
    if (j.contains("autofocus")) s.autofocus = autofocus_from_json(j.at("autofocus"));
    s.autofocus.center_fraction = s.corruption.center_fraction;
    if (j.contains("prior_weights") && !j.at("prior_weights").is_null())
      s.prior_weights = j.at("prior_weights").get<std::string>();
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw ContractViolation(std::string("experiment spec: ") + e.what());
  } catch (const LoadError& e) {
    throw ContractViolation(std::string("experiment spec: ") + e.what());
  }
}

/// Metrics of one restoration. Metrics whose minimum size exceeds the image
/// (VIF below 64 px) are NaN and reported as n/a.
inline MetricBundle bench_metrics(const RealImage& ref, const RealImage& test) {
  const int side = std::min(ref.height(), ref.width());
  MetricBundle m;
  m.psnr = psnr(ref, test);
  m.ssim = ssim(ref, test);
  m.ms_ssim = ms_ssim_adaptive(ref, test);
  m.vif = side >= 64 ? vif(ref, test) : std::numeric_limits<double>::quiet_NaN();
  return m;
}

struct ImageResult {
  std::string id;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  MetricBundle corrupted;
  MetricBundle refined;
  double seconds = 0.0;  // wall clock; not part of the serialized report
};

struct RunReport {
  ExperimentSpec spec;
  std::vector<ImageResult> images;
  int failures = 0;
  bool failed = false;

  int succeeded() const { return static_cast<int>(images.size()) - failures; }
};

inline std::uint64_t image_seed(std::uint64_t run_seed, const std::string& id) {
  return mix_seed(run_seed, detail::fnv1a(id));
}

/// Corrupted k-space and its magnitude image for one manifest entry. Every
/// method sees exactly this input for a given (run seed, id).
struct CorruptedCase {
  ComplexImage kspace;
  RealImage magnitude;
  MotionTrajectory trajectory;
};

inline CorruptedCase corrupt_case(const RealImage& clean, const ExperimentSpec& spec, std::uint64_t seed) {
  TrajectorySpec ts = spec.trajectory;
  ts.seed = seed;
  auto traj = gen_trajectory(ts, clean.height(), spec.corruption.center_fraction, spec.autofocus.bounds);
  const bool noisy = spec.corruption.noise_snr_db && std::isfinite(*spec.corruption.noise_snr_db);
  if (traj.is_zero() && !noisy) {
    // Identity corruption: keep the clean image exactly.
    return {fft2c(ComplexImage::from_real(clean)), clean, std::move(traj)};
  }
  Rng noise(mix_seed(seed, 0x6e6f697365ULL));
  auto ksp = corrupt_kspace(ComplexImage::from_real(clean), traj, spec.corruption, noise);
  auto mag = ifft2c(ksp).magnitude();
  return {std::move(ksp), std::move(mag), std::move(traj)};
}

inline RealImage apply_method(Method m, const CorruptedCase& c, const AutofocusConfig& cfg, const PriorNet* net) {
  switch (m) {
    case Method::None: return c.magnitude;
    case Method::Autofocusing: return demote(c.kspace, cfg).refined_image.magnitude();
    case Method::AutofocusingPlus: return demote(c.kspace, cfg, net).refined_image.magnitude();
    case Method::PriorOnlyDeblur: return prior_deblur(*net, c.magnitude);
  }
  throw ContractViolation("apply_method: unknown method");
}

struct RunOptions {
  int threads = 0;  // 0: hardware concurrency
};

/// Fraction of failed images above which the whole run is marked failed.
inline constexpr double kMaxFailureFraction = 0.2;

/// Runs one method over every manifest image. Per-image failures are recorded
/// and the run continues; results are ordered as in the manifest regardless
/// of the thread count.
inline RunReport run_experiment(const DatasetManifest& manifest, const ExperimentSpec& spec,
                                const RunOptions& opt = {}) {
  spec.validate();
  require(!manifest.entries.empty(), "run_experiment: empty manifest");
  std::optional<PriorNet> net;
  if (spec.method == Method::AutofocusingPlus || spec.method == Method::PriorOnlyDeblur)
    net = load_weights(*spec.prior_weights);

  RunReport rep{spec, std::vector<ImageResult>(manifest.entries.size()), 0, false};
  auto one = [&](std::size_t i) {
    ImageResult& r = rep.images[i];
    r.id = manifest.entries[i].id;
    r.seed = image_seed(spec.seed, r.id);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const RealImage clean = manifest.load_image(i);
      const auto c = corrupt_case(clean, spec, r.seed);
      const RealImage refined = apply_method(spec.method, c, spec.autofocus, net ? &*net : nullptr);
      for (double v : refined.values())
        if (!std::isfinite(v)) throw NumericalFailure("non-finite refined image");
      r.corrupted = bench_metrics(clean, c.magnitude);
      r.refined = spec.method == Method::None ? r.corrupted : bench_metrics(clean, refined);
      r.ok = true;
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  const std::size_t n = manifest.entries.size();
  std::size_t workers = opt.threads > 0 ? static_cast<std::size_t>(opt.threads)
                                        : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) one(i);
      });
  }
  for (const auto& r : rep.images) rep.failures += r.ok ? 0 : 1;
  rep.failed = rep.failures > kMaxFailureFraction * static_cast<double>(n);
  return rep;
}

inline json to_json(const MetricBundle& m) {
  return {{"psnr", detail::number(m.psnr)},
          {"ssim", detail::number(m.ssim)},
          {"vif", detail::number(m.vif)},
          {"ms_ssim", detail::number(m.ms_ssim)}};
}

inline MetricBundle metrics_from_json(const json& j) {
  return {detail::number_from(j.at("psnr")), detail::number_from(j.at("ssim")), detail::number_from(j.at("ms_ssim")),
          detail::number_from(j.at("vif"))};
}

/// Deterministic serialization: everything except wall-clock timings.
inline json to_json(const RunReport& r) {
  json images = json::array();
  for (const auto& im : r.images) {
    json j{{"id", im.id}, {"seed", im.seed}, {"status", im.ok ? "ok" : "failed"}};
    if (im.ok) {
      j["corrupted"] = to_json(im.corrupted);
      j["refined"] = to_json(im.refined);
    } else {
      j["error"] = im.error;
    }
    images.push_back(std::move(j));
  }
  return {{"schema", kRunReportSchema},
          {"schema_version", kRunReportSchemaVersion},
          {"spec", to_json(r.spec)},
          {"total", r.images.size()},
          {"failures", r.failures},
          {"failed", r.failed},
          {"images", std::move(images)}};
}

inline RunReport run_report_from_json(const json& j) {
  detail::check_schema(j, kRunReportSchema, kRunReportSchemaVersion, "run report");
  try {
    RunReport r;
    r.spec = experiment_from_json(j.at("spec"));
    r.failures = j.at("failures").get<int>();
    r.failed = j.at("failed").get<bool>();
    for (const auto& im : j.at("images")) {
      ImageResult x;
      x.id = im.at("id").get<std::string>();
      x.seed = im.at("seed").get<std::uint64_t>();
      x.ok = im.at("status").get<std::string>() == "ok";
      if (x.ok) {
        x.corrupted = metrics_from_json(im.at("corrupted"));
        x.refined = metrics_from_json(im.at("refined"));
      } else {
        x.error = im.value("error", std::string());
      }
      r.images.push_back(std::move(x));
    }
    return r;
  } catch (const json::exception& e) {
    throw LoadError(std::string("run report: ") + e.what());
  } catch (const ContractViolation& e) {
    throw LoadError(std::string("run report: ") + e.what());
  }
}

inline RunReport load_run_report(const std::filesystem::path& path) {
  return run_report_from_json(detail::read_json_file(path));
}

}  // namespace afp
