#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "afplus/autofocus/restoration.hpp"

namespace afp {

struct AutofocusConfig {
  int n_steps = 30;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  MotionBounds bounds{};
  // Which rows are frozen at zero; the same fraction the corruption protects.
  double center_fraction = 0.08;

  void validate() const {
    require(n_steps >= 0, "AutofocusConfig: n_steps must be >= 0");
    require(lr > 0.0 && std::isfinite(lr), "AutofocusConfig: lr must be positive");
    require(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0, "AutofocusConfig: betas must lie in (0, 1)");
    require(eps > 0.0, "AutofocusConfig: eps must be positive");
    require(bounds.max_rotation_deg > 0.0 && bounds.max_shift_px > 0.0, "AutofocusConfig: bounds must be positive");
    require(center_fraction >= 0.0 && center_fraction < 1.0, "AutofocusConfig: center_fraction must be in [0, 1)");
  }
};

/// Learned (or constant) multiplicative scale map applied to the candidate
/// magnitude inside the loss. Input and output have shape (1, 1, H, W); the
/// input is the magnitude divided by a per-sample constant.
class ScalePrior {
 public:
  virtual ~ScalePrior() = default;
  virtual ad::Var scale_map(const ad::Var& normalized_magnitude) const = 0;
};

class ConstantPrior final : public ScalePrior {
 public:
  explicit ConstantPrior(double value) : value_(value) {}
  ad::Var scale_map(const ad::Var& x) const override { return ad::Var::constant(ad::Tensor4(x.shape(), value_)); }

 private:
  double value_;
};

/// Adam moments for one parameter tensor.
struct AdamState {
  ad::Var m;
  ad::Var v;
  long step = 0;
};

/// One Adam step written with graph ops, so with recording on the new
/// parameter is a differentiable function of the gradient.
inline ad::Var adam_update(const ad::Var& p, const ad::Var& g, AdamState& st, double lr, double b1, double b2,
                           double eps) {
  if (!st.m.defined()) {
    st.m = ad::Var::constant(ad::Tensor4(p.shape()));
    st.v = ad::Var::constant(ad::Tensor4(p.shape()));
  }
  ++st.step;
  st.m = ad::add(ad::scale(st.m, b1), ad::scale(g, 1.0 - b1));
  st.v = ad::add(ad::scale(st.v, b2), ad::scale(ad::mul(g, g), 1.0 - b2));
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
  const ad::Var denom = ad::add_scalar(ad::sqrt_safe(ad::scale(st.v, 1.0 / c2)), eps);
  return ad::sub(p, ad::scale(ad::mul(st.m, ad::safe_recip(denom)), lr / c1));
}

struct DemotionResult {
  ComplexImage refined_image;
  ComplexImage refined_kspace;
  MotionTrajectory estimated_traj;
  std::vector<double> loss_history;
  bool used_prior = false;
};

/// Constant used to bring the prior's input to roughly [0, 1]: the peak
/// magnitude of the corrupted image (1 for an all-zero input).
inline double prior_input_scale(const ComplexImage& ksp) {
  double peak = 0.0;
  for (const auto& v : ifft2c(ksp).values()) peak = std::max(peak, std::abs(v));
  return peak > 0.0 ? peak : 1.0;
}

/// The autofocus objective on one corrupted spectrum.
class AutofocusObjective {
 public:
  AutofocusObjective(const ComplexImage& ksp_corrupted, RowBand protected_rows, const ScalePrior* prior = nullptr)
      : op_(ksp_corrupted, protected_rows), prior_(prior), input_scale_(prior_input_scale(ksp_corrupted)) {}

  const RestorationOperator& op() const noexcept { return op_; }
  const ScalePrior* prior() const noexcept { return prior_; }
  double input_scale() const noexcept { return input_scale_; }

  /// mean(|x| * S(|x| / scale)), or mean(|x|) without a prior.
  ad::Var loss(const ad::Var& alpha, const ad::Var& dx, const ad::Var& dy) const {
    const ad::Var mag = op_.magnitude(alpha, dx, dy);
    if (!prior_) return ad::mean_all(mag);
    const ad::Var s = prior_->scale_map(ad::scale(mag, 1.0 / input_scale_));
    require(s.shape() == mag.shape(), "af_loss: prior output shape " + s.shape().str() + " != " + mag.shape().str());
    return ad::mean_all(ad::mul(mag, s));
  }

 private:
  RestorationOperator op_;
  const ScalePrior* prior_;
  double input_scale_;
};

namespace detail {

inline ad::Tensor4 row_tensor(const std::vector<double>& v) {
  return ad::Tensor4(ad::Shape{1, 1, static_cast<int>(v.size()), 1}, v);
}

inline std::vector<double> row_vector(const ad::Tensor4& t) { return {t.data().begin(), t.data().end()}; }

inline void check_shapes(const ComplexImage& ksp, const MotionTrajectory& traj, const char* op) {
  require_domain(ksp, Domain::KSpace, op);
  require(traj.rows() == ksp.height(), std::string(op) + ": trajectory has " + std::to_string(traj.rows()) +
                                           " rows, k-space has " + std::to_string(ksp.height()));
  traj.validate(ksp.height());
}

struct TrajVars {
  ad::Var alpha, dx, dy;
};

inline TrajVars to_vars(const MotionTrajectory& traj, bool leaf) {
  std::vector<double> dx(traj.rows()), dy(traj.rows());
  for (int r = 0; r < traj.rows(); ++r) {
    dx[r] = traj.shift[r].dx;
    dy[r] = traj.shift[r].dy;
  }
  auto make = [leaf](const std::vector<double>& v) {
    return leaf ? ad::Var::leaf(row_tensor(v)) : ad::Var::constant(row_tensor(v));
  };
  return {make(traj.alpha), make(dx), make(dy)};
}

inline MotionTrajectory to_trajectory(const TrajVars& v, RowBand band) {
  const int rows = v.alpha.shape().h;
  auto t = MotionTrajectory::zero(rows, band);
  for (int r = 0; r < rows; ++r) {
    t.alpha[r] = v.alpha.value()[r];
    t.shift[r] = {v.dx.value()[r], v.dy.value()[r]};
  }
  return t;
}

}  // namespace detail

/// Mean-L1 autofocus loss of the candidate restoration invert(ksp, traj).
inline double af_loss(const ComplexImage& ksp_corrupted, const MotionTrajectory& traj,
                      const ScalePrior* prior = nullptr) {
  detail::check_shapes(ksp_corrupted, traj, "af_loss");
  ad::GradMode off(false);
  const AutofocusObjective obj(ksp_corrupted, traj.protected_rows, prior);
  const auto v = detail::to_vars(traj, false);
  return obj.loss(v.alpha, v.dx, v.dy).item();
}

struct MotionGradient {
  std::vector<double> d_alpha;  // per degree
  std::vector<RowShift> d_shift;  // per pixel
};

namespace detail {

inline void check_gradient(const ad::Tensor4& g, const char* what) {
  for (std::size_t r = 0; r < g.size(); ++r) {
    if (!std::isfinite(g[r]))
      throw NumericalFailure(std::string("af_grad: non-finite ") + what + " gradient at row " + std::to_string(r));
  }
}

}  // namespace detail

/// Exact reverse-mode gradient of af_loss with respect to every row's
/// (alpha, dx, dy), including the path through the prior's input.
inline MotionGradient af_grad(const ComplexImage& ksp_corrupted, const MotionTrajectory& traj,
                              const ScalePrior* prior = nullptr) {
  detail::check_shapes(ksp_corrupted, traj, "af_grad");
  const AutofocusObjective obj(ksp_corrupted, traj.protected_rows, prior);
  const auto v = detail::to_vars(traj, true);
  const auto g = ad::grad(obj.loss(v.alpha, v.dx, v.dy), {v.alpha, v.dx, v.dy});
  detail::check_gradient(g[0].value(), "alpha");
  detail::check_gradient(g[1].value(), "dx");
  detail::check_gradient(g[2].value(), "dy");
  MotionGradient out;
  out.d_alpha = detail::row_vector(g[0].value());
  out.d_shift.resize(traj.rows());
  for (int r = 0; r < traj.rows(); ++r) out.d_shift[r] = {g[1].value()[r], g[2].value()[r]};
  return out;
}

/// Final iterate of the inner loop together with its loss history. With
/// create_graph the iterate stays differentiable with respect to anything
/// the prior depends on.
struct UnrolledDemotion {
  ad::Var alpha, dx, dy;
  std::vector<double> loss_history;
};

inline UnrolledDemotion unroll_demotion(const AutofocusObjective& obj, const AutofocusConfig& cfg,
                                        bool create_graph = false) {
  cfg.validate();
  const auto& op = obj.op();
  const ad::Tensor4 zeros(op.param_shape());
  UnrolledDemotion st{ad::Var::leaf(zeros), ad::Var::leaf(zeros), ad::Var::leaf(zeros), {}};
  std::array<AdamState, 3> adam;
  const double limits[3] = {cfg.bounds.max_rotation_deg, cfg.bounds.max_shift_px, cfg.bounds.max_shift_px};
  st.loss_history.reserve(static_cast<std::size_t>(cfg.n_steps) + 1);
  for (int step = 0; step < cfg.n_steps; ++step) {
    ad::GradMode rec(true);
    const ad::Var loss = obj.loss(st.alpha, st.dx, st.dy);
    st.loss_history.push_back(loss.item());
    auto g = ad::grad(loss, {st.alpha, st.dx, st.dy}, create_graph);
    const char* names[3] = {"alpha", "dx", "dy"};
    ad::Var* params[3] = {&st.alpha, &st.dx, &st.dy};
    ad::GradMode upd(create_graph);
    for (int k = 0; k < 3; ++k) {
      detail::check_gradient(g[k].value(), names[k]);
      // Protected rows have no gradient and never move.
      const ad::Var gk = ad::mul_const(g[k], op.row_mask());
      ad::Var p = adam_update(*params[k], gk, adam[k], cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
      p = ad::clamp(ad::mul_const(p, op.row_mask()), -limits[k], limits[k]);
      *params[k] = create_graph ? p : ad::Var::leaf(p.value());
    }
  }
  {
    ad::GradMode rec(create_graph);
    st.loss_history.push_back(obj.loss(st.alpha, st.dx, st.dy).item());
  }
  return st;
}

/// Blind demotion: Adam on the per-row motion estimates from zero, clamped
/// to the bounds after every step, centre rows frozen.
inline DemotionResult demote(const ComplexImage& ksp_corrupted, const AutofocusConfig& cfg,
                             const ScalePrior* prior = nullptr) {
  require_domain(ksp_corrupted, Domain::KSpace, "demote");
  require_finite(ksp_corrupted, "demote");
  cfg.validate();
  const RowBand band = protected_band(ksp_corrupted.height(), cfg.center_fraction);
  const AutofocusObjective obj(ksp_corrupted, band, prior);
  const auto run = unroll_demotion(obj, cfg, false);
  DemotionResult out{ifft2c(ksp_corrupted), ksp_corrupted,
                     detail::to_trajectory({run.alpha, run.dx, run.dy}, band), run.loss_history, prior != nullptr};
  out.refined_kspace = invert_kspace(ksp_corrupted, out.estimated_traj);
  out.refined_image = ifft2c(out.refined_kspace);
  return out;
}

}  // namespace afp
