#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "afplus/ad/nn.hpp"
#include "afplus/autofocus/autofocus.hpp"
#include "afplus/core/binary_io.hpp"
#include "afplus/core/random.hpp"

namespace afp {

struct PriorNetConfig {
  int depth = 2;
  int base_channels = 16;
  int kernel_size = 3;
  double negative_slope = 0.01;

  void validate() const {
    require(depth >= 0 && depth <= 6, "PriorNetConfig: depth must be in [0, 6]");
    require(base_channels >= 1, "PriorNetConfig: base_channels must be >= 1");
    require(kernel_size >= 1 && kernel_size % 2 == 1, "PriorNetConfig: kernel_size must be odd");
    require(negative_slope >= 0.0 && negative_slope < 1.0 && std::isfinite(negative_slope),
            "PriorNetConfig: negative_slope must be in [0, 1)");
  }
  bool operator==(const PriorNetConfig&) const = default;
  std::string str() const {
    return "depth=" + std::to_string(depth) + " base_channels=" + std::to_string(base_channels) +
           " kernel_size=" + std::to_string(kernel_size) + " negative_slope=" + std::to_string(negative_slope);
  }
};

struct NamedTensor {
  std::string name;
  ad::Tensor4 value;
};

/// One convolution of the U-Net, optionally followed by instance norm and
/// leaky ReLU. Parameters are laid out as weight, bias[, gamma, beta].
struct ConvLayer {
  std::string name;
  int in_channels;
  int out_channels;
  int stride;
  bool normalized;
  std::size_t first_param;
};

namespace detail {

inline std::vector<ConvLayer> unet_layers(const PriorNetConfig& cfg) {
  std::vector<ConvLayer> out;
  std::size_t next = 0;
  auto add = [&](std::string name, int ci, int co, int stride, bool norm) {
    out.push_back({std::move(name), ci, co, stride, norm, next});
    next += norm ? 4 : 2;
  };
  auto ch = [&](int level) { return cfg.base_channels << level; };
  add("enc0.0", 1, ch(0), 1, true);
  add("enc0.1", ch(0), ch(0), 1, true);
  for (int l = 1; l <= cfg.depth; ++l) {
    add("enc" + std::to_string(l) + ".0", ch(l - 1), ch(l), 2, true);
    add("enc" + std::to_string(l) + ".1", ch(l), ch(l), 1, true);
  }
  for (int l = cfg.depth; l >= 1; --l) {
    add("up" + std::to_string(l), ch(l), ch(l - 1), 1, true);
    add("dec" + std::to_string(l), 2 * ch(l - 1), ch(l - 1), 1, true);
  }
  add("head", ch(0), 1, 1, false);
  return out;
}

}  // namespace detail

/// U-Net style scaler network: conv/instance-norm/leaky-ReLU blocks,
/// stride-2 convolutions down, nearest-neighbour upsampling + conv up, skip
/// concatenation at every level, sigmoid head. Parameters are always values
/// on the float32 lattice so that saving them is lossless.
class PriorNet final : public ScalePrior {
 public:
  explicit PriorNet(PriorNetConfig cfg = {}, std::uint64_t seed = 0) : cfg_(cfg) {
    cfg_.validate();
    layers_ = detail::unet_layers(cfg_);
    Rng rng(seed);
    const int k = cfg_.kernel_size;
    // Kaiming-uniform (fan-in) gain for leaky ReLU.
    const double gain2 = 2.0 / (1.0 + cfg_.negative_slope * cfg_.negative_slope);
    for (const auto& L : layers_) {
      ad::Tensor4 w(ad::Shape{L.out_channels, L.in_channels, k, k});
      const double bound = std::sqrt(3.0 * gain2 / (static_cast<double>(L.in_channels) * k * k));
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = to_float_lattice(rng.uniform(-bound, bound));
      const ad::Shape per_channel{1, L.out_channels, 1, 1};
      params_.push_back({L.name + ".weight", std::move(w)});
      params_.push_back({L.name + ".bias", ad::Tensor4(per_channel)});
      if (L.normalized) {
        params_.push_back({L.name + ".norm.gamma", ad::Tensor4(per_channel, 1.0)});
        params_.push_back({L.name + ".norm.beta", ad::Tensor4(per_channel)});
      }
    }
  }

  const PriorNetConfig& config() const noexcept { return cfg_; }
  const std::vector<ConvLayer>& layers() const noexcept { return layers_; }
  const std::vector<NamedTensor>& parameters() const noexcept { return params_; }
  /// Mutable access invalidates any recorded tape.
  std::vector<NamedTensor>& mutable_parameters() noexcept {
    tape_.reset();
    return params_;
  }

  /// Scalar count implied by the architecture alone.
  static std::size_t parameter_count(const PriorNetConfig& cfg) {
    cfg.validate();
    std::size_t n = 0;
    const auto k2 = static_cast<std::size_t>(cfg.kernel_size) * cfg.kernel_size;
    for (const auto& L : detail::unet_layers(cfg))
      n += static_cast<std::size_t>(L.out_channels) * (L.in_channels * k2 + (L.normalized ? 3 : 1));
    return n;
  }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  /// Zero the head's kernel and bias, making the output exactly 0.5.
  void zero_head() {
    for (auto& p : mutable_parameters())
      if (p.name.rfind("head.", 0) == 0) p.value = ad::Tensor4(p.value.shape());
  }

  static double to_float_lattice(double v) { return static_cast<double>(static_cast<float>(v)); }

  void require_input(const ad::Shape& s) const {
    const int m = 1 << cfg_.depth;
    require(s.c == 1 && s.n >= 1, "PriorNet: input must have shape (N, 1, H, W), got " + s.str());
    require(s.h % m == 0 && s.w % m == 0,
            "PriorNet: spatial size " + std::to_string(s.h) + "x" + std::to_string(s.w) + " not divisible by 2^depth = " +
                std::to_string(m));
  }

  /// The network as a pure function of its input and one Var per parameter
  /// tensor (in parameters() order).
  ad::Var apply(const ad::Var& x, const std::vector<ad::Var>& p) const {
    require_input(x.shape());
    require(p.size() == params_.size(), "PriorNet::apply: expected " + std::to_string(params_.size()) +
                                            " parameter tensors, got " + std::to_string(p.size()));
    std::size_t li = 0;
    auto block = [&](const ad::Var& in) {
      const ConvLayer& L = layers_[li++];
      const std::size_t q = L.first_param;
      ad::Var h = ad::conv2d(in, p[q], {L.stride, cfg_.kernel_size / 2});
      h = ad::add(h, ad::expand(p[q + 1], h.shape()));
      if (!L.normalized) return h;
      return ad::leaky_relu(ad::instance_norm(h, p[q + 2], p[q + 3]), cfg_.negative_slope);
    };
    std::vector<ad::Var> skips;
    ad::Var h = block(block(x));
    skips.push_back(h);
    for (int l = 1; l <= cfg_.depth; ++l) {
      h = block(block(h));
      skips.push_back(h);
    }
    for (int l = cfg_.depth; l >= 1; --l) {
      h = block(ad::upsample2(h));
      h = block(ad::concat_channels(h, skips[static_cast<std::size_t>(l - 1)]));
    }
    return ad::sigmoid(block(h));
  }

  /// Parameters as graph constants (inference inside the inner loop).
  std::vector<ad::Var> constant_params() const {
    std::vector<ad::Var> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(ad::Var::constant(p.value));
    return out;
  }
  std::vector<ad::Var> leaf_params() const {
    std::vector<ad::Var> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(ad::Var::leaf(p.value));
    return out;
  }

  ad::Var scale_map(const ad::Var& x) const override { return apply(x, constant_params()); }

  /// Forward pass that records a tape for backward().
  ad::Tensor4 forward(const ad::Tensor4& x) {
    require_input(x.shape());
    require(x.all_finite(), "PriorNet::forward: non-finite input");
    ad::GradMode rec(true);
    Tape t{ad::Var::leaf(x), leaf_params(), {}};
    t.output = apply(t.input, t.params);
    ad::Tensor4 y = t.output.value();
    tape_ = std::move(t);
    return y;
  }

  /// Inference only; no tape.
  ad::Tensor4 predict(const ad::Tensor4& x) const {
    ad::GradMode off(false);
    return scale_map(ad::Var::constant(x)).value();
  }

  struct Gradients {
    std::vector<ad::Tensor4> params;
    ad::Tensor4 input;
  };

  /// Vector-Jacobian product of the last forward() with `upstream`.
  Gradients backward(const ad::Tensor4& upstream) const {
    require(tape_.has_value(), "PriorNet::backward: no forward tape recorded");
    require(upstream.shape() == tape_->output.shape(), "PriorNet::backward: upstream shape " + upstream.shape().str() +
                                                           " != output " + tape_->output.shape().str());
    std::vector<ad::Var> wrt = tape_->params;
    wrt.push_back(tape_->input);
    const ad::Var seed = ad::Var::constant(upstream);
    const auto g = ad::grad(tape_->output, wrt, false, &seed);
    Gradients out;
    for (std::size_t i = 0; i + 1 < g.size(); ++i) out.params.push_back(g[i].value());
    out.input = g.back().value();
    return out;
  }

  bool has_tape() const noexcept { return tape_.has_value(); }
  void clear_tape() noexcept { tape_.reset(); }

 private:
  struct Tape {
    ad::Var input;
    std::vector<ad::Var> params;
    ad::Var output;
  };

  PriorNetConfig cfg_;
  std::vector<ConvLayer> layers_;
  std::vector<NamedTensor> params_;
  std::optional<Tape> tape_;
};

/// PriorNet evaluated with caller-supplied parameter Vars, so the inner loop
/// can be differentiated with respect to them.
class BoundPrior final : public ScalePrior {
 public:
  BoundPrior(const PriorNet& net, std::vector<ad::Var> params) : net_(net), params_(std::move(params)) {}
  ad::Var scale_map(const ad::Var& x) const override { return net_.apply(x, params_); }
  const std::vector<ad::Var>& params() const noexcept { return params_; }

 private:
  const PriorNet& net_;
  std::vector<ad::Var> params_;
};

/// The network used directly as an image-to-image map, peak * S(x / peak):
/// the stand-alone deblurring baseline.
inline RealImage prior_deblur(const PriorNet& net, const RealImage& corrupted) {
  double peak = 0.0;
  for (double v : corrupted.values()) peak = std::max(peak, v);
  if (peak <= 0.0) peak = 1.0;
  ad::Tensor4 x = ad::to_tensor(corrupted);
  for (auto& v : x.data()) v /= peak;
  const auto s = net.predict(x);
  RealImage out(corrupted.height(), corrupted.width());
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = peak * s[i];
  return out;
}

// Weight file layout (little endian):
//   magic "AFPWGHT\0", u32 version,
//   config: i32 depth, i32 base_channels, i32 kernel_size, f64 negative_slope,
//   u32 tensor count, then per tensor: str name, u32 rank (4), 4 x u32 dims,
//   float32 data.
inline constexpr char kWeightMagic[8] = {'A', 'F', 'P', 'W', 'G', 'H', 'T', '\0'};
inline constexpr std::uint32_t kWeightFormatVersion = 1;

namespace detail {

inline void write_config(ByteWriter& w, const PriorNetConfig& c) {
  w.i32(c.depth);
  w.i32(c.base_channels);
  w.i32(c.kernel_size);
  w.f64(c.negative_slope);
}

inline PriorNetConfig read_config(ByteReader& r) {
  PriorNetConfig c;
  c.depth = r.i32();
  c.base_channels = r.i32();
  c.kernel_size = r.i32();
  c.negative_slope = r.f64();
  try {
    c.validate();
  } catch (const ContractViolation& e) {
    throw LoadError(r.what() + ": invalid network config (" + e.what() + ")");
  }
  return c;
}

inline void write_tensors(ByteWriter& w, const std::vector<NamedTensor>& ts) {
  w.u32(static_cast<std::uint32_t>(ts.size()));
  for (const auto& t : ts) {
    w.str(t.name);
    const auto s = t.value.shape();
    w.u32(4);
    for (int d : {s.n, s.c, s.h, s.w}) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.value.data()) {
      require(static_cast<double>(static_cast<float>(v)) == v || !std::isfinite(v),
              "save_weights: parameter " + t.name + " is not representable in float32");
      w.f32(static_cast<float>(v));
    }
  }
}

inline void read_tensors(ByteReader& r, std::vector<NamedTensor>& into) {
  const std::uint32_t count = r.u32();
  if (count != into.size())
    throw LoadError(r.what() + ": file has " + std::to_string(count) + " tensors, config implies " +
                    std::to_string(into.size()));
  for (auto& t : into) {
    const std::string name = r.str();
    if (name != t.name) throw LoadError(r.what() + ": expected tensor '" + t.name + "', found '" + name + "'");
    const std::uint32_t rank = r.u32();
    if (rank != 4) throw LoadError(r.what() + ": tensor '" + name + "' has rank " + std::to_string(rank));
    const auto s = t.value.shape();
    for (int d : {s.n, s.c, s.h, s.w})
      if (r.u32() != static_cast<std::uint32_t>(d)) throw LoadError(r.what() + ": shape mismatch for '" + name + "'");
    for (std::size_t i = 0; i < t.value.size(); ++i) {
      const double v = r.f32();
      if (!std::isfinite(v)) throw LoadError(r.what() + ": non-finite value in '" + name + "'");
      t.value[i] = v;
    }
  }
}

inline void read_header(ByteReader& r, const char (&magic)[8], std::uint32_t version, const char* kind) {
  char m[8];
  r.raw(m, 8);
  if (!std::equal(m, m + 8, magic)) throw LoadError(r.what() + ": not a " + kind + " file (bad magic)");
  const std::uint32_t v = r.u32();
  if (v != version)
    throw LoadError(r.what() + ": unsupported " + kind + " format version " + std::to_string(v) + " (expected " +
                    std::to_string(version) + ")");
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_weights(const PriorNet& net) {
  ByteWriter w;
  w.raw(kWeightMagic, 8);
  w.u32(kWeightFormatVersion);
  detail::write_config(w, net.config());
  detail::write_tensors(w, net.parameters());
  return w.bytes();
}

inline void save_weights(const PriorNet& net, const std::filesystem::path& path) {
  ByteWriter w;
  const auto bytes = encode_weights(net);
  w.raw(bytes.data(), bytes.size());
  w.save(path);
}

inline PriorNet decode_weights(ByteReader& r, const std::optional<PriorNetConfig>& expected = std::nullopt) {
  detail::read_header(r, kWeightMagic, kWeightFormatVersion, "weight");
  const PriorNetConfig cfg = detail::read_config(r);
  if (expected && !(*expected == cfg))
    throw LoadError(r.what() + ": config mismatch, file has {" + cfg.str() + "}, expected {" + expected->str() + "}");
  PriorNet net(cfg);
  detail::read_tensors(r, net.mutable_parameters());
  return net;
}

/// Loads a network; with `expected`, any config difference is a LoadError.
inline PriorNet load_weights(const std::filesystem::path& path,
                             const std::optional<PriorNetConfig>& expected = std::nullopt) {
  ByteReader r = ByteReader::open(path);
  PriorNet net = decode_weights(r, expected);
  if (!r.at_end()) throw LoadError(path.string() + ": " + std::to_string(r.remaining()) + " trailing bytes");
  return net;
}

}  // namespace afp
