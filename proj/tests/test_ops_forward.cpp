#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "bsca/ops.hpp"
#include "bsca/rng.hpp"
#include "checks.hpp"
#include "ref_ops.hpp"

using namespace bsca;
using testsup::to_double;

namespace {

Tensor iota_tensor(std::vector<int> shape) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(i + 1);
  return t;
}

}  // namespace

TEST_CASE("conv2d hand-checked 4x4 window sums") {
  const Tensor input = iota_tensor({1, 1, 4, 4});
  const Tensor weight = Tensor::full({1, 1, 3, 3}, 1.0f);
  const ConvSpec spec{1, 1, 3, 1, 0};
  const Tensor out = conv2d(input, weight, spec);
  REQUIRE(out.shape() == std::vector<int>{1, 1, 2, 2});
  CHECK(out[0] == doctest::Approx(54.0));
  CHECK(out[1] == doctest::Approx(63.0));
  CHECK(out[2] == doctest::Approx(90.0));
  CHECK(out[3] == doctest::Approx(99.0));

  // The nested-loop reference agrees.
  const auto ref = refop::conv2d(to_double(input), {1, 1, 4, 4}, to_double(weight), 1, 3, 1, 0);
  for (int i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(ref[static_cast<std::size_t>(i)]));
}

TEST_CASE("conv2d zero input stays zero") {
  Rng rng(7);
  const Tensor input({1, 1, 3, 3});
  const Tensor weight = testsup::random_tensor({2, 1, 3, 3}, rng);
  const Tensor out = conv2d(input, weight, ConvSpec{1, 2, 3, 1, 1});
  for (std::int64_t i = 0; i < out.numel(); ++i) CHECK(out[i] == 0.0f);
}

TEST_CASE("conv2d stem geometry 3x256x256 -> 64x128x128") {
  Rng rng(11);
  const Tensor input = testsup::random_tensor({1, 3, 256, 256}, rng);
  const Tensor weight = testsup::random_tensor({64, 3, 7, 7}, rng, 0.05);
  const Tensor out = conv2d(input, weight, ConvSpec{3, 64, 7, 2, 3});
  CHECK(out.shape() == std::vector<int>{1, 64, 128, 128});
}

TEST_CASE("conv2d fast path equals the naive reference") {
  Rng rng(42);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(2));
    const int cin = 1 + static_cast<int>(rng.below(4));
    const int cout = 1 + static_cast<int>(rng.below(4));
    const int h = 4 + static_cast<int>(rng.below(13));
    const int w = 4 + static_cast<int>(rng.below(13));
    const int k = rng.below(2) ? 3 : 1;
    const int stride = 1 + static_cast<int>(rng.below(2));
    const int padding = static_cast<int>(rng.below(2));
    const Tensor input = testsup::random_tensor({n, cin, h, w}, rng);
    const Tensor weight = testsup::random_tensor({cout, cin, k, k}, rng);
    const Tensor out = conv2d(input, weight, ConvSpec{cin, cout, k, stride, padding});
    const auto ref = refop::conv2d(to_double(input), {n, cin, h, w}, to_double(weight), cout, k,
                                   stride, padding);
    REQUIRE(out.numel() == static_cast<std::int64_t>(ref.size()));
    for (std::int64_t i = 0; i < out.numel(); ++i) {
      CHECK(std::abs(out[i] - ref[static_cast<std::size_t>(i)]) < 1e-5);
    }
  }
}

TEST_CASE("conv2d rejects mismatched channels and degenerate geometry") {
  const Tensor input({1, 2, 4, 4});
  const Tensor weight({1, 3, 3, 3});
  CHECK_THROWS_AS(conv2d(input, weight, ConvSpec{3, 1, 3, 1, 0}), ShapeError);
  const Tensor w2({1, 2, 3, 3});
  CHECK_THROWS_AS(conv2d(Tensor({1, 2, 2, 2}), w2, ConvSpec{2, 1, 3, 1, 0}), ShapeError);
  CHECK_THROWS_AS(conv_out_extent(2, 3, 1, 0), ShapeError);
  CHECK(conv_out_extent(256, 7, 2, 3) == 128);
  CHECK(conv_out_extent(128, 3, 2, 1) == 64);
}

TEST_CASE("batchnorm training normalizes per channel") {
  Rng rng(5);
  Tensor input = testsup::random_tensor({4, 3, 5, 5}, rng, 2.0);
  for (std::int64_t i = 0; i < input.numel(); ++i) input[i] += 1.5f;

  BatchNormState state = BatchNormState::make(3);
  state.mode = Mode::training;

  SUBCASE("identity affine gives mean 0, biased variance 1") {
    const Tensor out = batchnorm(input, state);
    for (int c = 0; c < 3; ++c) {
      double sum = 0.0, sumsq = 0.0;
      int count = 0;
      for (int n = 0; n < 4; ++n)
        for (int h = 0; h < 5; ++h)
          for (int w = 0; w < 5; ++w) {
            const double v = out.at(n, c, h, w);
            sum += v;
            sumsq += v * v;
            ++count;
          }
      const double mean = sum / count;
      const double var = sumsq / count - mean * mean;
      CHECK(std::abs(mean) < 1e-5);
      CHECK(std::abs(var - 1.0) < 1e-4);
    }
  }

  SUBCASE("gamma=2 beta=3 gives mean 3, std 2") {
    state.gamma.fill(2.0f);
    state.beta.fill(3.0f);
    const Tensor out = batchnorm(input, state);
    for (int c = 0; c < 3; ++c) {
      double sum = 0.0, sumsq = 0.0;
      int count = 0;
      for (int n = 0; n < 4; ++n)
        for (int h = 0; h < 5; ++h)
          for (int w = 0; w < 5; ++w) {
            const double v = out.at(n, c, h, w);
            sum += v;
            sumsq += v * v;
            ++count;
          }
      const double mean = sum / count;
      const double stddev = std::sqrt(sumsq / count - mean * mean);
      CHECK(std::abs(mean - 3.0) < 1e-4);
      CHECK(std::abs(stddev - 2.0) < 1e-4);
    }
  }

  SUBCASE("matches the double-precision reference") {
    const Tensor out = batchnorm(input, state);
    const auto ref = refop::batchnorm_train(to_double(input), {4, 3, 5, 5},
                                            std::vector<double>(3, 1.0),
                                            std::vector<double>(3, 0.0), state.epsilon);
    for (std::int64_t i = 0; i < out.numel(); ++i) {
      CHECK(out[i] == doctest::Approx(ref[static_cast<std::size_t>(i)]).epsilon(1e-4));
    }
  }
}

TEST_CASE("batchnorm eval uses running statistics and mutates nothing") {
  Rng rng(9);
  const Tensor input = testsup::random_tensor({2, 2, 3, 3}, rng);
  BatchNormState state = BatchNormState::make(2);
  state.mode = Mode::eval;
  const Tensor before_mean = state.running_mean;
  const Tensor out = batchnorm(input, state);
  const float scale = 1.0f / std::sqrt(1.0f + state.epsilon);
  for (std::int64_t i = 0; i < input.numel(); ++i) {
    CHECK(out[i] == doctest::Approx(input[i] * scale).epsilon(1e-6));
  }
  CHECK(state.running_mean.values() == before_mean.values());
}

TEST_CASE("batchnorm updates running stats with unbiased variance") {
  Tensor input({1, 1, 1, 2});
  input[0] = 0.0f;
  input[1] = 2.0f;  // mean 1, biased var 1, unbiased var 2
  BatchNormState state = BatchNormState::make(1);
  state.mode = Mode::training;
  (void)batchnorm(input, state);
  CHECK(state.running_mean[0] == doctest::Approx(0.1 * 1.0));
  CHECK(state.running_var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 2.0));
}

TEST_CASE("batchnorm rejects channel mismatch and singleton batches") {
  BatchNormState state = BatchNormState::make(4);
  state.mode = Mode::training;
  Tensor bad({1, 3, 2, 2});
  CHECK_THROWS_AS(batchnorm(bad, state), ShapeError);
  BatchNormState one = BatchNormState::make(1);
  one.mode = Mode::training;
  Tensor single({1, 1, 1, 1});
  CHECK_THROWS_AS(batchnorm(single, one), ShapeError);
}

TEST_CASE("relu clamps negatives") {
  const Tensor input = Tensor::from({3}, {-1.0f, 0.0f, 2.0f});
  const Tensor out = relu(input);
  CHECK(out[0] == 0.0f);
  CHECK(out[1] == 0.0f);
  CHECK(out[2] == 2.0f);
}

TEST_CASE("maxpool hand-checked on 1..16") {
  const Tensor input = iota_tensor({1, 1, 4, 4});
  const MaxPoolOut res = maxpool2d(input, 3, 2, 1);
  REQUIRE(res.output.shape() == std::vector<int>{1, 1, 2, 2});
  CHECK(res.output[0] == 6.0f);
  CHECK(res.output[1] == 8.0f);
  CHECK(res.output[2] == 14.0f);
  CHECK(res.output[3] == 16.0f);

  const auto ref = refop::maxpool(to_double(input), {1, 1, 4, 4}, 3, 2, 1);
  for (int i = 0; i < 4; ++i) CHECK(res.output[i] == doctest::Approx(ref[static_cast<std::size_t>(i)]));
}

TEST_CASE("maxpool geometry 64x128x128 -> 64x64x64") {
  const Tensor input({1, 64, 128, 128});
  const MaxPoolOut res = maxpool2d(input);
  CHECK(res.output.shape() == std::vector<int>{1, 64, 64, 64});
}

TEST_CASE("maxpool ties break to the lowest flat index") {
  const Tensor input = Tensor::full({1, 1, 4, 4}, 5.0f);
  const MaxPoolOut res = maxpool2d(input, 3, 2, 1);
  // Window (0,0) covers rows/cols 0..1, first cell is flat 0; window (0,1)
  // covers cols 1..3, first cell flat 1; and so on down the plane.
  CHECK(res.argmax[0] == 0);
  CHECK(res.argmax[1] == 1);
  CHECK(res.argmax[2] == 4);
  CHECK(res.argmax[3] == 5);

  const Tensor grad_out = Tensor::full({1, 1, 2, 2}, 1.0f);
  const Tensor gx = maxpool2d_backward(grad_out, res.argmax, input.shape());
  CHECK(gx[0] == 1.0f);
  CHECK(gx[1] == 1.0f);
  CHECK(gx[4] == 1.0f);
  CHECK(gx[5] == 1.0f);
  double total = 0.0;
  for (std::int64_t i = 0; i < gx.numel(); ++i) total += gx[i];
  CHECK(total == doctest::Approx(4.0));
}

TEST_CASE("adaptive average pool") {
  SUBCASE("geometry 512x8x8 -> 512x1x1") {
    const Tensor input({1, 512, 8, 8});
    CHECK(adaptive_avgpool_1x1(input).shape() == std::vector<int>{1, 512, 1, 1});
  }
  SUBCASE("constant channel averages to itself") {
    Tensor input = Tensor::full({2, 3, 4, 4}, 2.5f);
    const Tensor out = adaptive_avgpool_1x1(input);
    for (std::int64_t i = 0; i < out.numel(); ++i) CHECK(out[i] == doctest::Approx(2.5));
  }
}

TEST_CASE("linear with identity weight is the identity") {
  const int f = 5;
  Tensor weight({f, f});
  for (int i = 0; i < f; ++i) weight.at(i, i) = 1.0f;
  Rng rng(3);
  const Tensor input = testsup::random_tensor({2, f}, rng);
  const Tensor out = linear(input, weight, Tensor({f}));
  for (std::int64_t i = 0; i < input.numel(); ++i) CHECK(out[i] == doctest::Approx(input[i]));
}

TEST_CASE("linear 512->4 parameter arithmetic") {
  const Tensor weight({4, 512});
  const Tensor bias({4});
  CHECK(weight.numel() + bias.numel() == 2052);
}

TEST_CASE("softmax cross entropy frozen values") {
  SUBCASE("uniform logits cost ln 4") {
    const Tensor logits = Tensor::full({3, 4}, 0.7f);
    const XentOut res = softmax_cross_entropy(logits, {0, 1, 3});
    CHECK(res.loss == doctest::Approx(std::log(4.0)).epsilon(1e-6));
    CHECK(res.loss == doctest::Approx(1.386294).epsilon(1e-5));
  }
  SUBCASE("logits 1..4 with the true class last") {
    const Tensor logits = Tensor::from({1, 4}, {1.0f, 2.0f, 3.0f, 4.0f});
    const XentOut res = softmax_cross_entropy(logits, {3});
    CHECK(res.loss == doctest::Approx(0.440190).epsilon(1e-5));
    const double ref = refop::softmax_xent_loss({1.0, 2.0, 3.0, 4.0}, 1, 4, {3});
    CHECK(res.loss == doctest::Approx(ref).epsilon(1e-7));
  }
  SUBCASE("loss decreases monotonically with margin and tends to 0") {
    double prev = 1e9;
    for (double margin : {1.0, 2.0, 4.0, 8.0, 16.0}) {
      Tensor logits({1, 4});
      logits.at(0, 2) = static_cast<float>(margin);
      const XentOut res = softmax_cross_entropy(logits, {2});
      CHECK(res.loss >= 0.0);
      CHECK(res.loss < prev);
      prev = res.loss;
    }
    CHECK(prev < 1e-6);
  }
  SUBCASE("label out of range is rejected") {
    const Tensor logits({1, 4});
    CHECK_THROWS_AS(softmax_cross_entropy(logits, {4}), DataError);
    CHECK_THROWS_AS(softmax_cross_entropy(logits, {-1}), DataError);
  }
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(21);
  const Tensor logits = testsup::random_tensor({6, 4}, rng, 3.0);
  const Tensor p = softmax_rows(logits);
  for (int i = 0; i < 6; ++i) {
    double sum = 0.0;
    for (int j = 0; j < 4; ++j) {
      CHECK(p.at(i, j) >= 0.0f);
      sum += p.at(i, j);
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
}
