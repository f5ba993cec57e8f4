#include <random>

#include "doctest.h"
#include "oracle.hpp"

using namespace dcpose;

namespace {

struct ConvCase {
  int in, out, k, d, g;
};

const ConvCase kCases[] = {{3, 4, 3, 1, 1},  {4, 4, 1, 1, 1},  {6, 6, 3, 2, 3},  {6, 12, 3, 3, 3},
                           {2, 2, 3, 6, 1},  {5, 5, 3, 9, 5},  {4, 2, 3, 12, 2}, {3, 3, 3, 15, 1},
                           {8, 32, 3, 1, 2}, {30, 15, 1, 1, 15}};

Tensor4 shifted_input_conv(const Tensor4& x, const ConvParams& p) { return oracle::conv2d(x, p); }

}  // namespace

TEST_CASE("conv2d matches nested loops across dilation and group settings") {
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    std::mt19937_64 rng(seed);
    for (const auto& c : kCases) {
      const auto p = oracle::random_conv(c.in, c.out, c.k, c.d, c.g, rng);
      const auto x = oracle::random_tensor(2, c.in, 17, 13, rng);
      CHECK(max_abs_diff(conv2d(x, p), shifted_input_conv(x, p)) <= 1e-10);
    }
  }
}

TEST_CASE("identity-centre kernel on ones") {
  auto p = ConvParams::zeros(1, 1, 3);
  p.weight(0, 0, 1, 1) = 1.0;
  Tensor4 x(1, 1, 3, 3, 1.0);
  CHECK(conv2d(x, p).vec() == x.vec());
}

TEST_CASE("dilation 2 on a delta lands taps at +-2") {
  std::mt19937_64 rng(4);
  auto p = oracle::random_conv(1, 1, 3, 2, 1, rng);
  p.bias[0] = 0.0;
  Tensor4 x(1, 1, 9, 9);
  x(0, 0, 4, 4) = 1.0;
  const auto y = conv2d(x, p);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(y(0, 0, 4 + 2 * (1 - i), 4 + 2 * (1 - j)) == doctest::Approx(p.weight(0, 0, i, j)));
  CHECK(max_abs_diff(y, oracle::conv2d(x, p)) <= 1e-12);
  CHECK(y(0, 0, 3, 4) == 0.0);
}

TEST_CASE("grouped conv equals independent per-group convs") {
  std::mt19937_64 rng(9);
  const int J = 4;
  const auto p = oracle::random_conv(3 * J, 2 * J, 3, 1, J, rng);
  const auto x = oracle::random_tensor(1, 3 * J, 10, 10, rng);
  const auto y = conv2d(x, p);
  for (int g = 0; g < J; ++g) {
    auto q = ConvParams::zeros(3, 2, 3);
    for (int o = 0; o < 2; ++o) {
      q.bias[std::size_t(o)] = p.bias[std::size_t(2 * g + o)];
      for (int ci = 0; ci < 3; ++ci)
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) q.weight(o, ci, i, j) = p.weight(2 * g + o, ci, i, j);
    }
    const auto yg = conv2d(slice_channels(x, 3 * g, 3), q);
    CHECK(slice_channels(y, 2 * g, 2).vec() == yg.vec());
  }
}

TEST_CASE("conv2d is linear without bias") {
  std::mt19937_64 rng(21);
  auto p = oracle::random_conv(4, 6, 3, 3, 2, rng);
  std::fill(p.bias.begin(), p.bias.end(), 0.0);
  const auto a = oracle::random_tensor(1, 4, 12, 12, rng), b = oracle::random_tensor(1, 4, 12, 12, rng);
  const auto lhs = conv2d(1.7 * a + (-0.3) * b, p);
  const auto rhs = 1.7 * conv2d(a, p) + (-0.3) * conv2d(b, p);
  CHECK(max_abs_diff(lhs, rhs) <= 1e-10);
}

TEST_CASE("conv2d backward passes finite differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (const ConvCase c : {ConvCase{3, 4, 3, 1, 1}, ConvCase{4, 6, 3, 3, 2}, ConvCase{2, 2, 3, 6, 2}}) {
      std::mt19937_64 rng(100 + seed);
      auto p = oracle::random_conv(c.in, c.out, c.k, c.d, c.g, rng);
      auto x = oracle::random_tensor(1, c.in, 8, 9, rng);
      const auto r = oracle::random_tensor(1, c.out, 8, 9, rng);
      auto grad = p.zeros_like();
      const auto dx = conv2d_backward(x, p, r, &grad);
      auto loss = [&] { return oracle::dot(conv2d(x, p), r); };
      CHECK(oracle::fd_check(x.vec(), dx.vec(), loss, rng) < oracle::kTolerance);
      CHECK(oracle::fd_check(p.weight.vec(), grad.weight.vec(), loss, rng) < oracle::kTolerance);
      CHECK(oracle::fd_check(p.bias, grad.bias, loss, rng) < oracle::kTolerance);
    }
  }
}

TEST_CASE("bilinear sampling") {
  Tensor4 x(1, 1, 2, 2);
  x(0, 0, 0, 0) = 0;
  x(0, 0, 0, 1) = 1;
  x(0, 0, 1, 0) = 2;
  x(0, 0, 1, 1) = 3;
  CHECK(bilinear_sample(x, 0, 0, 1, 0) == 2.0);
  CHECK(bilinear_sample(x, 0, 0, 0, 1) == 1.0);
  CHECK(bilinear_sample(x, 0, 0, 0.5, 0.5) == doctest::Approx(1.5));
  CHECK(bilinear_sample(x, 0, 0, -5, -5) == 0.0);
  CHECK(bilinear_sample(x, 0, 0, -1, 0) == 0.0);
  CHECK(bilinear_sample(x, 0, 0, -0.5, 0) == doctest::Approx(0.0));
  CHECK(bilinear_sample(x, 0, 0, 1.5, 1.0) == doctest::Approx(1.5));
  std::mt19937_64 rng(2);
  const auto t = oracle::random_tensor(1, 2, 5, 7, rng);
  std::uniform_real_distribution<double> u(-2.0, 8.0);
  for (int i = 0; i < 200; ++i) {
    const double py = u(rng), px = u(rng);
    CHECK(bilinear_sample(t, 0, 1, py, px) == doctest::Approx(oracle::bilinear(t, 0, 1, py, px)).epsilon(1e-12));
  }
}

TEST_CASE("deformable conv matches the sampling oracle") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(seed);
    for (int d : {1, 3, 6}) {
      const auto p = oracle::random_conv(3, 2, 3, d, 1, rng);
      const auto x = oracle::random_tensor(1, 3, 9, 8, rng);
      DeformInputs in{oracle::random_tensor(1, 18, 9, 8, rng, -2.5, 2.5), oracle::random_tensor(1, 9, 9, 8, rng, 0, 1)};
      CHECK(max_abs_diff(deform_conv_v2(x, in, p), oracle::deform_conv(x, in.offsets, in.masks, p)) <= 1e-10);
    }
  }
}

TEST_CASE("deformable conv with zero offsets and unit masks is dilated conv") {
  std::mt19937_64 rng(5);
  for (int d : {3, 6, 9, 12, 15}) {
    const auto p = oracle::random_conv(4, 4, 3, d, 1, rng);
    const auto x = oracle::random_tensor(1, 4, 20, 18, rng);
    DeformInputs in{Tensor4(1, 18, 20, 18), Tensor4(1, 9, 20, 18, 1.0)};
    CHECK(max_abs_diff(deform_conv_v2(x, in, p), conv2d(x, p)) <= 1e-6);
  }
}

TEST_CASE("deformable conv with zero masks is the bias") {
  std::mt19937_64 rng(6);
  const auto p = oracle::random_conv(2, 3, 3, 3, 1, rng);
  const auto x = oracle::random_tensor(1, 2, 7, 7, rng);
  DeformInputs in{oracle::random_tensor(1, 18, 7, 7, rng), Tensor4(1, 9, 7, 7)};
  const auto y = deform_conv_v2(x, in, p);
  for (int o = 0; o < 3; ++o)
    for (double v : y.plane(0, o)) CHECK(v == p.bias[std::size_t(o)]);
}

TEST_CASE("deformable conv backward passes finite differences") {
  for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
    std::mt19937_64 rng(seed);
    auto p = oracle::random_conv(2, 2, 3, 3, 1, rng);
    auto x = oracle::random_tensor(1, 2, 6, 6, rng);
    DeformInputs in{oracle::random_tensor(1, 18, 6, 6, rng, -1.7, 1.7), oracle::random_tensor(1, 9, 6, 6, rng, 0, 1)};
    const auto r = oracle::random_tensor(1, 2, 6, 6, rng);
    auto grad = p.zeros_like();
    const auto g = deform_conv_v2_backward(x, in, p, r, &grad);
    auto loss = [&] { return oracle::dot(deform_conv_v2(x, in, p), r); };
    CHECK(oracle::fd_check(x.vec(), g.dx.vec(), loss, rng) < oracle::kTolerance);
    CHECK(oracle::fd_check(in.offsets.vec(), g.doffsets.vec(), loss, rng) < oracle::kTolerance);
    CHECK(oracle::fd_check(in.masks.vec(), g.dmasks.vec(), loss, rng) < oracle::kTolerance);
    CHECK(oracle::fd_check(p.weight.vec(), grad.weight.vec(), loss, rng) < oracle::kTolerance);
    CHECK(oracle::fd_check(p.bias, grad.bias, loss, rng) < oracle::kTolerance);
  }
}

TEST_CASE("residual stack with zero weights and identity skip") {
  auto stack = make_residual_stack(4, 8, 4, 2, 1);
  CHECK_FALSE(stack[0].skip.has_value());
  std::mt19937_64 rng(1);
  const auto x = oracle::random_tensor(1, 4, 5, 5, rng);
  // relu(0 + x), twice
  CHECK(residual_stack(x, stack).vec() == relu(x).vec());
}

TEST_CASE("residual stack depth 1 equals composed convs") {
  std::mt19937_64 rng(7);
  ResidualStack stack{{oracle::random_conv(4, 6, 3, 1, 1, rng), oracle::random_conv(6, 3, 3, 1, 1, rng),
                       oracle::random_conv(4, 3, 1, 1, 1, rng)}};
  const auto x = oracle::random_tensor(1, 4, 8, 8, rng);
  const auto h = relu(oracle::conv2d(x, stack[0].conv1));
  const auto expected = relu(oracle::conv2d(h, stack[0].conv2) + oracle::conv2d(x, *stack[0].skip));
  CHECK(max_abs_diff(residual_stack(x, stack), expected) <= 1e-12);
}

TEST_CASE("residual stack backward passes finite differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(200 + seed);
    auto stack = make_residual_stack(6, 12, 3, 2, 3);
    for (auto& b : stack) {
      b.conv1 = oracle::random_conv(b.conv1.in_channels(), b.conv1.out_channels(), 3, 1, 3, rng);
      b.conv2 = oracle::random_conv(b.conv2.in_channels(), b.conv2.out_channels(), 3, 1, 3, rng);
      if (b.skip) b.skip = oracle::random_conv(b.skip->in_channels(), b.skip->out_channels(), 1, 1, 3, rng);
    }
    auto x = oracle::random_tensor(1, 6, 7, 7, rng);
    const auto r = oracle::random_tensor(1, 3, 7, 7, rng);
    ResidualCache cache;
    residual_stack(x, stack, &cache);
    auto grad = zeros_like(stack);
    const auto dx = residual_stack_backward(cache, stack, r, &grad);
    auto loss = [&] { return oracle::dot(residual_stack(x, stack), r); };
    CHECK(oracle::fd_check(x.vec(), dx.vec(), loss, rng) < oracle::kTolerance);
    for (std::size_t b = 0; b < stack.size(); ++b) {
      CHECK(oracle::fd_check(stack[b].conv1.weight.vec(), grad[b].conv1.weight.vec(), loss, rng) < oracle::kTolerance);
      CHECK(oracle::fd_check(stack[b].conv2.bias, grad[b].conv2.bias, loss, rng) < oracle::kTolerance);
      if (stack[b].skip)
        CHECK(oracle::fd_check(stack[b].skip->weight.vec(), grad[b].skip->weight.vec(), loss, rng) < oracle::kTolerance);
    }
  }
}

TEST_CASE("activations") {
  Tensor4 x(1, 1, 1, 3);
  x.vec() = {-1.0, 0.0, 2.0};
  CHECK(relu(x).vec() == std::vector<double>{0.0, 0.0, 2.0});
  const auto s = sigmoid(x);
  CHECK(s.vec()[1] == 0.5);
  Tensor4 dy(1, 1, 1, 3, 1.0);
  CHECK(relu_backward(x, dy).vec() == std::vector<double>{0.0, 0.0, 1.0});
  CHECK(sigmoid_backward(s, dy).vec()[1] == 0.25);
}

TEST_CASE("invalid conv parameters are rejected") {
  CHECK_THROWS_AS(ConvParams::zeros(3, 4, 3, 1, 2), InvalidArgument);
  CHECK_THROWS_AS(ConvParams::zeros(4, 4, 2, 1, 1), InvalidArgument);
  auto p = ConvParams::zeros(2, 2, 3);
  CHECK_THROWS_AS(conv2d(Tensor4(1, 3, 4, 4), p), InvalidArgument);
}
