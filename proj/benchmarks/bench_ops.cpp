#include <benchmark/benchmark.h>

#include "bsca/gemm.hpp"
#include "bsca/ops.hpp"
#include "bsca/rng.hpp"

namespace {

bsca::Tensor random_tensor(std::vector<int> shape, std::uint64_t seed) {
  bsca::Rng rng(seed);
  bsca::Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.normal());
  return t;
}

void BM_GemmSquare(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const bsca::Tensor a = random_tensor({n, n}, 1);
  const bsca::Tensor b = random_tensor({n, n}, 2);
  bsca::Tensor c({n, n});
  for (auto _ : state) {
    bsca::gemm_nn(n, n, n, a.data(), b.data(), c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}
BENCHMARK(BM_GemmSquare)->Arg(128)->Arg(512);

void BM_Conv2dForward(benchmark::State& state) {
  const int hw = static_cast<int>(state.range(0));
  const bsca::Tensor input = random_tensor({8, 64, hw, hw}, 3);
  const bsca::Tensor weight = random_tensor({64, 64, 3, 3}, 4);
  const bsca::ConvSpec spec{64, 64, 3, 1, 1};
  for (auto _ : state) {
    bsca::Tensor out = bsca::conv2d(input, weight, spec);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Conv2dForward)->Arg(16)->Arg(32);

void BM_Conv2dBackward(benchmark::State& state) {
  const int hw = static_cast<int>(state.range(0));
  const bsca::Tensor input = random_tensor({8, 64, hw, hw}, 5);
  const bsca::Tensor weight = random_tensor({64, 64, 3, 3}, 6);
  const bsca::ConvSpec spec{64, 64, 3, 1, 1};
  const bsca::Tensor grad_out = random_tensor({8, 64, hw, hw}, 7);
  for (auto _ : state) {
    bsca::ConvGrads grads = bsca::conv2d_backward(grad_out, input, weight, spec);
    benchmark::DoNotOptimize(grads.grad_input.data());
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(16)->Arg(32);

}  // namespace
