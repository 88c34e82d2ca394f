#include <gtest/gtest.h>

#include "afplus/ad/nn.hpp"
#include "afplus/autofocus/restoration.hpp"
#include "fd.hpp"

using namespace afp;
using namespace afp::ad;
using fdcheck::random_tensor;

namespace {

constexpr double kTol = 1e-3;

// Scalar probe: <w, op(x...)> with a fixed random w.
fdcheck::Fn probe(std::function<Var(const std::vector<Var>&)> op, Shape out, std::uint64_t seed = 99) {
  Rng rng(seed);
  const Tensor4 w = random_tensor(out, rng);
  return [op, w](const std::vector<Var>& in) { return sum_all(mul_const(op(in), w)); };
}

struct Case {
  const char* name;
  std::function<Var(const std::vector<Var>&)> op;
  std::vector<Shape> inputs;
  Shape out;
  double lo = -1.0, hi = 1.0;
};

std::vector<Case> cases() {
  const Shape s{2, 3, 4, 5};
  const Shape z{1, 2, 6, 8};
  return {
      {"add", [](auto& v) { return add(v[0], v[1]); }, {s, s}, s},
      {"sub", [](auto& v) { return sub(v[0], v[1]); }, {s, s}, s},
      {"mul", [](auto& v) { return mul(v[0], v[1]); }, {s, s}, s},
      {"scale", [](auto& v) { return scale(v[0], -2.5); }, {s}, s},
      {"cos", [](auto& v) { return ad::cos(v[0]); }, {s}, s},
      {"sin", [](auto& v) { return ad::sin(v[0]); }, {s}, s},
      {"sigmoid", [](auto& v) { return sigmoid(v[0]); }, {s}, s, -3.0, 3.0},
      {"safe_recip", [](auto& v) { return safe_recip(v[0]); }, {s}, s, 0.5, 2.0},
      {"sqrt_safe", [](auto& v) { return sqrt_safe(v[0]); }, {s}, s, 0.2, 2.0},
      {"rsqrt", [](auto& v) { return rsqrt(v[0]); }, {s}, s, 0.2, 2.0},
      {"abs", [](auto& v) { return ad::abs(v[0]); }, {s}, s},
      {"clamp", [](auto& v) { return clamp(v[0], -0.5, 0.5); }, {s}, s},
      {"leaky_relu", [](auto& v) { return leaky_relu(v[0], 0.01); }, {s}, s},
      {"expand", [](auto& v) { return expand(v[0], Shape{2, 3, 4, 5}); }, {Shape{1, 3, 1, 5}}, s},
      {"reduce_to", [](auto& v) { return reduce_to(v[0], Shape{2, 1, 4, 1}); }, {s}, Shape{2, 1, 4, 1}},
      {"slice", [](auto& v) { return slice_channels(v[0], 1, 3); }, {s}, Shape{2, 2, 4, 5}},
      {"concat", [](auto& v) { return concat_channels(v[0], v[1]); }, {s, Shape{2, 1, 4, 5}}, Shape{2, 4, 4, 5}},
      {"cmul", [](auto& v) { return cmul(v[0], v[1]); }, {z, z}, z},
      {"cabs", [](auto& v) { return cabs(v[0]); }, {z}, Shape{1, 1, 6, 8}},
      {"fft2c", [](auto& v) { return fft2c(v[0]); }, {z}, z},
      {"ifft2c", [](auto& v) { return ifft2c(v[0]); }, {z}, z},
      {"conv2d", [](auto& v) { return conv2d(v[0], v[1], {1, 1}); }, {Shape{2, 2, 6, 6}, Shape{3, 2, 3, 3}},
       Shape{2, 3, 6, 6}},
      {"conv2d_stride2", [](auto& v) { return conv2d(v[0], v[1], {2, 1}); }, {Shape{1, 2, 8, 8}, Shape{3, 2, 3, 3}},
       Shape{1, 3, 4, 4}},
      {"conv2d_transpose", [](auto& v) { return conv2d_transpose(v[0], v[1], {2, 1}, 8, 8); },
       {Shape{1, 3, 4, 4}, Shape{3, 2, 3, 3}}, Shape{1, 2, 8, 8}},
      {"conv2d_weight", [](auto& v) { return conv2d_weight(v[0], v[1], {1, 1}, 3); },
       {Shape{1, 2, 5, 5}, Shape{1, 3, 5, 5}}, Shape{3, 2, 3, 3}},
      {"upsample2", [](auto& v) { return upsample2(v[0]); }, {Shape{1, 2, 3, 4}}, Shape{1, 2, 6, 8}},
      {"sum_pool2", [](auto& v) { return sum_pool2(v[0]); }, {Shape{1, 2, 6, 8}}, Shape{1, 2, 3, 4}},
      {"instance_norm", [](auto& v) { return instance_norm(v[0], v[1], v[2]); },
       {Shape{2, 3, 4, 4}, Shape{1, 3, 1, 1}, Shape{1, 3, 1, 1}}, Shape{2, 3, 4, 4}},
      {"mean_l1", [](auto& v) { return mean_all(ad::abs(sub(v[0], v[1]))); }, {s, s}, Shape{}},
  };
}

class Primitive : public ::testing::TestWithParam<int> {};

}  // namespace

TEST_P(Primitive, FirstDerivativeMatchesFiniteDifferences) {
  const auto c = cases()[GetParam()];
  Rng rng(GetParam() + 1);
  std::vector<Tensor4> xs;
  for (auto s : c.inputs) xs.push_back(random_tensor(s, rng, c.lo, c.hi));
  EXPECT_LT(fdcheck::max_rel_error(probe(c.op, c.out), xs), kTol) << c.name;
}

TEST_P(Primitive, SecondDerivativeMatchesFiniteDifferences) {
  const auto c = cases()[GetParam()];
  Rng rng(GetParam() + 100);
  std::vector<Tensor4> xs, dirs;
  for (auto s : c.inputs) {
    xs.push_back(random_tensor(s, rng, c.lo, c.hi));
    dirs.push_back(random_tensor(s, rng));
  }
  EXPECT_LT(fdcheck::max_rel_error_second(probe(c.op, c.out), xs, dirs), kTol) << c.name;
}

INSTANTIATE_TEST_SUITE_P(Ops, Primitive, ::testing::Range(0, static_cast<int>(cases().size())),
                         [](const auto& info) { return std::string(cases()[info.param].name); });

TEST(NufftSample, CoordinateDerivativesMatchFiniteDifferences) {
  const int n = 16;
  Rng rng(5);
  ComplexImage ksp(n, n, Domain::KSpace);
  for (auto& v : ksp.values()) v = {rng.normal(), rng.normal()};
  const Nufft2D plan(n, n);
  auto ctx = std::make_shared<const afp::detail::NufftContext>(
      afp::detail::NufftContext{plan, plan.oversample(ksp), std::vector<char>(n, 1)});
  const Shape s{1, 1, n, n};
  auto op = [ctx](const std::vector<Var>& v) { return nufft_sample(ctx, v[0], v[1]); };
  std::vector<Tensor4> xs{random_tensor(s, rng, -7.0, 7.0), random_tensor(s, rng, -7.0, 7.0)};
  EXPECT_LT(fdcheck::max_rel_error(probe(op, Shape{1, 2, n, n}), xs), kTol);
  std::vector<Tensor4> dirs{random_tensor(s, rng), random_tensor(s, rng)};
  EXPECT_LT(fdcheck::max_rel_error_second(probe(op, Shape{1, 2, n, n}), xs, dirs), kTol);
}

TEST(NufftSample, RejectsOrderBeyondKernelSupport) {
  const int n = 8;
  ComplexImage ksp(n, n, Domain::KSpace);
  const Nufft2D plan(n, n);
  auto ctx = std::make_shared<const afp::detail::NufftContext>(
      afp::detail::NufftContext{plan, plan.oversample(ksp), std::vector<char>(n, 1)});
  const auto c = Var::constant(Tensor4(Shape{1, 1, n, n}));
  EXPECT_THROW(nufft_sample(ctx, c, c, 4, 0), ContractViolation);
}

TEST(Graph, UnreachedInputGetsZeros) {
  const auto a = Var::leaf(Tensor4(Shape{1, 1, 2, 2}, 1.0));
  const auto b = Var::leaf(Tensor4(Shape{1, 1, 3, 1}, 1.0));
  const auto g = grad(sum_all(mul(a, a)), {a, b});
  EXPECT_EQ(g[1].value(), Tensor4(Shape{1, 1, 3, 1}));
  EXPECT_EQ(g[0].value(), Tensor4(Shape{1, 1, 2, 2}, 2.0));
}

TEST(Graph, SharedSubexpressionAccumulates) {
  const auto a = Var::leaf(Tensor4(Shape{}, 3.0));
  const auto b = mul(a, a);
  const auto g = grad(add(b, mul(b, a)), {a});  // a^2 + a^3
  EXPECT_DOUBLE_EQ(g[0].item(), 2 * 3.0 + 3 * 9.0);
}

TEST(Graph, SeedIsLinear) {
  Rng rng(3);
  const auto x = Var::leaf(random_tensor(Shape{1, 2, 4, 4}, rng));
  const auto w = Var::leaf(random_tensor(Shape{3, 2, 3, 3}, rng));
  const auto y = sigmoid(conv2d(x, w, {1, 1}));
  const auto seed = Var::constant(random_tensor(y.shape(), rng));
  const auto seed2 = Var::constant(scale(seed, 2.0).value());
  const auto g1 = grad(y, {x, w}, false, &seed);
  const auto g2 = grad(y, {x, w}, false, &seed2);
  for (int k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < g1[k].value().size(); ++i)
      EXPECT_NEAR(g2[k].value()[i], 2.0 * g1[k].value()[i], 1e-10);
}

TEST(Graph, NoRecordingWhenDisabled) {
  const auto a = Var::leaf(Tensor4(Shape{}, 1.0));
  GradMode off(false);
  EXPECT_FALSE(mul(a, a).requires_grad());
}

TEST(Graph, GradientWithRespectToIntermediate) {
  const auto a = Var::leaf(Tensor4(Shape{}, 2.0));
  const auto b = mul(a, a);
  const auto g = grad(mul(b, b), {b});
  EXPECT_DOUBLE_EQ(g[0].item(), 2 * 4.0);
}

TEST(Graph, LongChainsReleaseWithoutRecursion) {
  auto a = Var::leaf(Tensor4(Shape{}, 1.0));
  Var x = a;
  for (int i = 0; i < 200000; ++i) x = add_scalar(x, 1e-6);
  EXPECT_NEAR(grad(x, {a})[0].item(), 1.0, 0.0);
  x = Var();  // must not overflow the stack
  SUCCEED();
}

TEST(Graph, ShapeMismatchIsContractViolation) {
  const auto a = Var::constant(Tensor4(Shape{1, 1, 2, 2}));
  const auto b = Var::constant(Tensor4(Shape{1, 1, 2, 3}));
  EXPECT_THROW(add(a, b), ContractViolation);
  EXPECT_THROW(conv2d(a, Var::constant(Tensor4(Shape{1, 2, 3, 3})), {1, 1}), ContractViolation);
  EXPECT_THROW(expand(b, Shape{1, 1, 4, 3}), ContractViolation);
}
