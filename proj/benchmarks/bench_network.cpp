#include <benchmark/benchmark.h>

#include "bsca/adam.hpp"
#include "bsca/resnet.hpp"
#include "bsca/rng.hpp"

namespace {

bsca::Tensor random_batch(int n, int size, std::uint64_t seed) {
  bsca::Rng rng(seed);
  bsca::Tensor t({n, 3, size, size});
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform());
  return t;
}

void BM_ForwardEval(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  bsca::Network net = bsca::build_network(1);
  const bsca::Tensor batch = random_batch(1, size, 2);
  for (auto _ : state) {
    bsca::Tensor logits = bsca::forward(net, batch, bsca::Mode::eval);
    benchmark::DoNotOptimize(logits.data());
  }
}
BENCHMARK(BM_ForwardEval)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  bsca::Network net = bsca::build_network(1);
  const bsca::Tensor batch = random_batch(8, size, 3);
  const std::vector<int> labels = {0, 1, 2, 3, 0, 1, 2, 3};
  bsca::AdamConfig adam;
  adam.lr = 1e-3;
  for (auto _ : state) {
    bsca::ActivationTape tape;
    bsca::Tensor logits = bsca::forward(net, batch, bsca::Mode::training, &tape);
    const bsca::XentOut xent = bsca::softmax_cross_entropy(logits, labels);
    bsca::Gradients grads = bsca::backward(net, tape, xent.grad_logits);
    bsca::adam_step(net, grads, adam);
    benchmark::DoNotOptimize(net.fc_bias.data());
  }
}
BENCHMARK(BM_TrainStep)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
