#include <doctest.h>

#include <cmath>
#include <vector>

#include "bsca/ops.hpp"
#include "bsca/rng.hpp"
#include "checks.hpp"
#include "ref_ops.hpp"

using namespace bsca;
using testsup::fd_gradient;
using testsup::max_mismatch;
using testsup::to_double;

namespace {

// Values with pairwise gaps >= 0.01 so finite differences never cross a
// max-pool argmax boundary.
Tensor well_separated_tensor(std::vector<int> shape, Rng& rng) {
  Tensor t(std::move(shape));
  std::vector<int> order(static_cast<std::size_t>(t.numel()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  rng.shuffle(order);
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    t[i] = static_cast<float>(0.01 * order[static_cast<std::size_t>(i)] - 0.3);
  }
  return t;
}

}  // namespace

TEST_CASE("conv2d_backward zero cotangent gives zero gradients") {
  Rng rng(1);
  const Tensor input = testsup::random_tensor({1, 2, 5, 5}, rng);
  const Tensor weight = testsup::random_tensor({3, 2, 3, 3}, rng);
  const ConvSpec spec{2, 3, 3, 1, 1};
  const Tensor grad_out({1, 3, 5, 5});
  const ConvGrads g = conv2d_backward(grad_out, input, weight, spec);
  for (std::int64_t i = 0; i < g.grad_input.numel(); ++i) CHECK(g.grad_input[i] == 0.0f);
  for (std::int64_t i = 0; i < g.grad_weight.numel(); ++i) CHECK(g.grad_weight[i] == 0.0f);
}

TEST_CASE("conv2d_backward matches finite differences of sum(output)") {
  Rng rng(2);
  const Tensor input = testsup::random_tensor({1, 1, 4, 4}, rng);
  const Tensor weight = testsup::random_tensor({1, 1, 3, 3}, rng);
  const ConvSpec spec{1, 1, 3, 1, 0};
  const Tensor grad_out = Tensor::full({1, 1, 2, 2}, 1.0f);
  const ConvGrads g = conv2d_backward(grad_out, input, weight, spec);

  const std::vector<double> cot(4, 1.0);
  const auto wd = to_double(weight);
  const auto xd = to_double(input);
  const auto fd_x = fd_gradient(
      [&](const std::vector<double>& x) { return refop::conv2d(x, {1, 1, 4, 4}, wd, 1, 3, 1, 0); },
      xd, cot);
  const auto fd_w = fd_gradient(
      [&](const std::vector<double>& w) { return refop::conv2d(xd, {1, 1, 4, 4}, w, 1, 3, 1, 0); },
      wd, cot);
  CHECK(max_mismatch(to_double(g.grad_input), fd_x) <= 1.0);
  CHECK(max_mismatch(to_double(g.grad_weight), fd_w) <= 1.0);
}

TEST_CASE("conv2d_backward finite-difference sweep") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(2));
    const int cin = 1 + static_cast<int>(rng.below(3));
    const int cout = 1 + static_cast<int>(rng.below(3));
    const int h = 4 + static_cast<int>(rng.below(4));
    const int w = 4 + static_cast<int>(rng.below(4));
    const int k = rng.below(2) ? 3 : 1;
    const int stride = 1 + static_cast<int>(rng.below(2));
    const int padding = static_cast<int>(rng.below(2));
    const ConvSpec spec{cin, cout, k, stride, padding};
    const refop::Dims4 dims{n, cin, h, w};

    const Tensor input = testsup::random_tensor({n, cin, h, w}, rng);
    const Tensor weight = testsup::random_tensor({cout, cin, k, k}, rng);
    const Tensor out = conv2d(input, weight, spec);
    Tensor grad_out(out.shape());
    for (std::int64_t i = 0; i < grad_out.numel(); ++i) {
      grad_out[i] = static_cast<float>(rng.normal());
    }

    const ConvGrads g = conv2d_backward(grad_out, input, weight, spec);
    const auto cot = to_double(grad_out);
    const auto xd = to_double(input);
    const auto wd = to_double(weight);
    const auto fd_x = fd_gradient(
        [&](const std::vector<double>& x) { return refop::conv2d(x, dims, wd, cout, k, stride, padding); },
        xd, cot);
    const auto fd_w = fd_gradient(
        [&](const std::vector<double>& w2) { return refop::conv2d(xd, dims, w2, cout, k, stride, padding); },
        wd, cot);
    CHECK(max_mismatch(to_double(g.grad_input), fd_x) <= 1.0);
    CHECK(max_mismatch(to_double(g.grad_weight), fd_w) <= 1.0);
  }
}

TEST_CASE("1x1 conv backward is the channel-mixing adjoint") {
  Rng rng(4);
  const Tensor input = testsup::random_tensor({1, 2, 3, 3}, rng);
  const Tensor weight = testsup::random_tensor({3, 2, 1, 1}, rng);
  const ConvSpec spec{2, 3, 1, 1, 0};
  Tensor grad_out({1, 3, 3, 3});
  for (std::int64_t i = 0; i < grad_out.numel(); ++i) grad_out[i] = static_cast<float>(rng.normal());
  const ConvGrads g = conv2d_backward(grad_out, input, weight, spec);
  // grad_input[ci] = sum_co w[co][ci] * grad_out[co], per pixel.
  for (int ci = 0; ci < 2; ++ci) {
    for (int p = 0; p < 9; ++p) {
      double want = 0.0;
      for (int co = 0; co < 3; ++co) {
        want += weight.at(co, ci, 0, 0) * grad_out[co * 9 + p];
      }
      CHECK(g.grad_input[ci * 9 + p] == doctest::Approx(want).epsilon(1e-4));
    }
  }
}

TEST_CASE("batchnorm_backward zero cotangent and mean-free property") {
  Rng rng(5);
  const Tensor input = testsup::random_tensor({2, 3, 2, 2}, rng);
  BatchNormState state = BatchNormState::make(3);
  state.mode = Mode::training;

  const Tensor zeros({2, 3, 2, 2});
  const BatchNormGrads zg = batchnorm_backward(zeros, input, state);
  for (std::int64_t i = 0; i < zg.grad_input.numel(); ++i) CHECK(zg.grad_input[i] == 0.0f);
  for (int c = 0; c < 3; ++c) {
    CHECK(zg.grad_gamma[c] == 0.0f);
    CHECK(zg.grad_beta[c] == 0.0f);
  }

  Tensor grad_out({2, 3, 2, 2});
  for (std::int64_t i = 0; i < grad_out.numel(); ++i) grad_out[i] = static_cast<float>(rng.normal());
  const BatchNormGrads g = batchnorm_backward(grad_out, input, state);
  // Normalization removes the mean direction: per-channel grad_input sums to 0.
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0;
    for (int n = 0; n < 2; ++n)
      for (int h = 0; h < 2; ++h)
        for (int w = 0; w < 2; ++w) sum += g.grad_input.at(n, c, h, w);
    CHECK(std::abs(sum) < 1e-4);
  }
}

TEST_CASE("batchnorm_backward finite-difference sweep") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(2));
    const int c = 1 + static_cast<int>(rng.below(3));
    const int h = 2 + static_cast<int>(rng.below(2));
    const int w = 2 + static_cast<int>(rng.below(2));
    const refop::Dims4 dims{n, c, h, w};

    const Tensor input = testsup::random_tensor({n, c, h, w}, rng);
    BatchNormState state = BatchNormState::make(c);
    state.mode = Mode::training;
    for (int ch = 0; ch < c; ++ch) {
      state.gamma[ch] = static_cast<float>(1.0 + 0.3 * rng.normal());
      state.beta[ch] = static_cast<float>(0.3 * rng.normal());
    }
    Tensor grad_out({n, c, h, w});
    for (std::int64_t i = 0; i < grad_out.numel(); ++i) grad_out[i] = static_cast<float>(rng.normal());

    const BatchNormGrads g = batchnorm_backward(grad_out, input, state);
    const auto cot = to_double(grad_out);
    const auto xd = to_double(input);
    const auto gammad = to_double(state.gamma);
    const auto betad = to_double(state.beta);
    const double eps = state.epsilon;

    const auto fd_x = fd_gradient(
        [&](const std::vector<double>& x) { return refop::batchnorm_train(x, dims, gammad, betad, eps); },
        xd, cot);
    const auto fd_gamma = fd_gradient(
        [&](const std::vector<double>& gm) { return refop::batchnorm_train(xd, dims, gm, betad, eps); },
        gammad, cot);
    const auto fd_beta = fd_gradient(
        [&](const std::vector<double>& bt) { return refop::batchnorm_train(xd, dims, gammad, bt, eps); },
        betad, cot);
    CHECK(max_mismatch(to_double(g.grad_input), fd_x, 1e-3, 1e-4) <= 1.0);
    CHECK(max_mismatch(to_double(g.grad_gamma), fd_gamma, 1e-3, 1e-4) <= 1.0);
    CHECK(max_mismatch(to_double(g.grad_beta), fd_beta, 1e-3, 1e-4) <= 1.0);
  }
}

TEST_CASE("relu_backward gates the gradient") {
  const Tensor input = Tensor::from({4}, {-1.0f, 0.0f, 0.5f, 2.0f});
  const Tensor grad_out = Tensor::full({4}, 3.0f);
  const Tensor g = relu_backward(grad_out, input);
  CHECK(g[0] == 0.0f);
  CHECK(g[1] == 0.0f);  // gradient at exactly 0 is 0
  CHECK(g[2] == 3.0f);
  CHECK(g[3] == 3.0f);

  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = testsup::random_tensor({2, 2, 3, 3}, rng);
    for (std::int64_t i = 0; i < x.numel(); ++i) {
      if (std::abs(x[i]) < 0.1f) x[i] = x[i] < 0 ? -0.1f : 0.1f;  // keep away from the kink
    }
    Tensor cot_t({2, 2, 3, 3});
    for (std::int64_t i = 0; i < cot_t.numel(); ++i) cot_t[i] = static_cast<float>(rng.normal());
    const Tensor got = relu_backward(cot_t, x);
    const auto fd = fd_gradient([](const std::vector<double>& v) { return refop::relu(v); },
                                to_double(x), to_double(cot_t));
    CHECK(max_mismatch(to_double(got), fd) <= 1.0);
  }
}

TEST_CASE("maxpool backward matches finite differences") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(2));
    const int c = 1 + static_cast<int>(rng.below(2));
    const int h = 4 + static_cast<int>(rng.below(4));
    const int w = 4 + static_cast<int>(rng.below(4));
    const Tensor input = well_separated_tensor({n, c, h, w}, rng);
    const MaxPoolOut res = maxpool2d(input, 3, 2, 1);
    Tensor grad_out(res.output.shape());
    for (std::int64_t i = 0; i < grad_out.numel(); ++i) grad_out[i] = static_cast<float>(rng.normal());
    const Tensor got = maxpool2d_backward(grad_out, res.argmax, input.shape());
    const auto fd = fd_gradient(
        [&](const std::vector<double>& x) { return refop::maxpool(x, {n, c, h, w}, 3, 2, 1); },
        to_double(input), to_double(grad_out));
    CHECK(max_mismatch(to_double(got), fd) <= 1.0);
  }
}

TEST_CASE("avgpool backward spreads uniformly and matches finite differences") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(2));
    const int c = 1 + static_cast<int>(rng.below(3));
    const int h = 2 + static_cast<int>(rng.below(5));
    const int w = 2 + static_cast<int>(rng.below(5));
    const Tensor input = testsup::random_tensor({n, c, h, w}, rng);
    Tensor grad_out({n, c, 1, 1});
    for (std::int64_t i = 0; i < grad_out.numel(); ++i) grad_out[i] = static_cast<float>(rng.normal());
    const Tensor got = adaptive_avgpool_1x1_backward(grad_out, input.shape());
    const auto fd = fd_gradient(
        [&](const std::vector<double>& x) { return refop::avgpool_1x1(x, {n, c, h, w}); },
        to_double(input), to_double(grad_out));
    CHECK(max_mismatch(to_double(got), fd) <= 1.0);
  }
}

TEST_CASE("linear backward matches finite differences") {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(4));
    const int f = 2 + static_cast<int>(rng.below(6));
    const int k = 1 + static_cast<int>(rng.below(4));
    const Tensor input = testsup::random_tensor({n, f}, rng);
    const Tensor weight = testsup::random_tensor({k, f}, rng);
    const Tensor bias = testsup::random_tensor({k}, rng);
    Tensor grad_out({n, k});
    for (std::int64_t i = 0; i < grad_out.numel(); ++i) grad_out[i] = static_cast<float>(rng.normal());

    const LinearGrads g = linear_backward(grad_out, input, weight);
    const auto cot = to_double(grad_out);
    const auto xd = to_double(input);
    const auto wd = to_double(weight);
    const auto bd = to_double(bias);
    const auto fd_x = fd_gradient(
        [&](const std::vector<double>& x) { return refop::linear(x, n, f, wd, k, bd); }, xd, cot);
    const auto fd_w = fd_gradient(
        [&](const std::vector<double>& w2) { return refop::linear(xd, n, f, w2, k, bd); }, wd, cot);
    const auto fd_b = fd_gradient(
        [&](const std::vector<double>& b2) { return refop::linear(xd, n, f, wd, k, b2); }, bd, cot);
    CHECK(max_mismatch(to_double(g.grad_input), fd_x) <= 1.0);
    CHECK(max_mismatch(to_double(g.grad_weight), fd_w) <= 1.0);
    CHECK(max_mismatch(to_double(g.grad_bias), fd_b) <= 1.0);
  }
}

TEST_CASE("cross-entropy gradient matches finite differences of the loss") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(4));
    const int k = 4;
    const Tensor logits = testsup::random_tensor({n, k}, rng, 2.0);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (auto& l : labels) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));

    const XentOut res = softmax_cross_entropy(logits, labels);
    const auto fd = fd_gradient(
        [&](const std::vector<double>& x) {
          return std::vector<double>{refop::softmax_xent_loss(x, n, k, labels)};
        },
        to_double(logits), {1.0});
    CHECK(max_mismatch(to_double(res.grad_logits), fd) <= 1.0);
  }
}
