#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bsca/ops.hpp"
#include "bsca/tensor.hpp"

namespace bsca {

/// Trainable convolution: weight plus its optimizer moment buffers.
struct ConvLayer {
  ConvSpec spec;
  Tensor weight;
  Tensor weight_m;
  Tensor weight_v;
};

struct BatchNormLayer {
  BatchNormState state;
  Tensor gamma_m, gamma_v;
  Tensor beta_m, beta_v;
  static BatchNormLayer make(int channels);
};

/// Two 3x3 conv+BN stages with an additive shortcut. The shortcut is a 1x1
/// conv + BN projection exactly when the block changes channels or stride.
struct BasicBlock {
  ConvLayer conv_a;
  BatchNormLayer bn_a;
  ConvLayer conv_b;
  BatchNormLayer bn_b;
  bool has_downsample = false;
  ConvLayer down_conv;
  BatchNormLayer down_bn;
};

/// The fixed 18-layer residual classifier: 64-64-128-256-512 channels with
/// spatial halving at each stage transition, global average pool, 4-way head.
struct Network {
  static constexpr int kNumClasses = 4;
  static constexpr int kFeatureDim = 512;

  ConvLayer conv1;
  BatchNormLayer bn1;
  std::array<BasicBlock, 2> layer1, layer2, layer3, layer4;
  Tensor fc_weight, fc_weight_m, fc_weight_v;
  Tensor fc_bias, fc_bias_m, fc_bias_v;
  std::uint64_t step_count = 0;
};

/// One gradient tensor per trainable parameter, mirroring Network.
struct Gradients {
  struct BlockGrads {
    Tensor conv_a_w, conv_b_w;
    Tensor bn_a_gamma, bn_a_beta, bn_b_gamma, bn_b_beta;
    Tensor down_w, down_bn_gamma, down_bn_beta;
  };
  Tensor conv1_w;
  Tensor bn1_gamma, bn1_beta;
  std::array<BlockGrads, 8> blocks;  // layer1[0], layer1[1], layer2[0], ...
  Tensor fc_w, fc_b;
};

/// Fixed traversal over trainable parameters. Defines the canonical parameter
/// order used for initialization draws, checkpoints, and optimizer updates:
/// conv1, bn1 (gamma then beta), layer1..layer4 blocks in order (conv_a, bn_a,
/// conv_b, bn_b, then downsample conv + bn when present), fc weight, fc bias.
/// fn(name, value, m, v [, grad*]) — grad is null when `grads` is null.
template <class NetT, class GradT, class Fn>
void for_each_param(NetT& net, GradT* grads, Fn&& fn) {
  fn("conv1.weight", net.conv1.weight, net.conv1.weight_m, net.conv1.weight_v,
     grads ? &grads->conv1_w : nullptr);
  fn("bn1.gamma", net.bn1.state.gamma, net.bn1.gamma_m, net.bn1.gamma_v,
     grads ? &grads->bn1_gamma : nullptr);
  fn("bn1.beta", net.bn1.state.beta, net.bn1.beta_m, net.bn1.beta_v,
     grads ? &grads->bn1_beta : nullptr);
  std::array<decltype(&net.layer1), 4> layers = {&net.layer1, &net.layer2, &net.layer3,
                                                 &net.layer4};
  for (int li = 0; li < 4; ++li) {
    for (int bi = 0; bi < 2; ++bi) {
      auto& b = (*layers[li])[static_cast<std::size_t>(bi)];
      auto* bg = grads ? &grads->blocks[static_cast<std::size_t>(li * 2 + bi)] : nullptr;
      const std::string prefix = "layer" + std::to_string(li + 1) + "." + std::to_string(bi) + ".";
      fn(prefix + "conv_a.weight", b.conv_a.weight, b.conv_a.weight_m, b.conv_a.weight_v,
         bg ? &bg->conv_a_w : nullptr);
      fn(prefix + "bn_a.gamma", b.bn_a.state.gamma, b.bn_a.gamma_m, b.bn_a.gamma_v,
         bg ? &bg->bn_a_gamma : nullptr);
      fn(prefix + "bn_a.beta", b.bn_a.state.beta, b.bn_a.beta_m, b.bn_a.beta_v,
         bg ? &bg->bn_a_beta : nullptr);
      fn(prefix + "conv_b.weight", b.conv_b.weight, b.conv_b.weight_m, b.conv_b.weight_v,
         bg ? &bg->conv_b_w : nullptr);
      fn(prefix + "bn_b.gamma", b.bn_b.state.gamma, b.bn_b.gamma_m, b.bn_b.gamma_v,
         bg ? &bg->bn_b_gamma : nullptr);
      fn(prefix + "bn_b.beta", b.bn_b.state.beta, b.bn_b.beta_m, b.bn_b.beta_v,
         bg ? &bg->bn_b_beta : nullptr);
      if (b.has_downsample) {
        fn(prefix + "downsample.conv.weight", b.down_conv.weight, b.down_conv.weight_m,
           b.down_conv.weight_v, bg ? &bg->down_w : nullptr);
        fn(prefix + "downsample.bn.gamma", b.down_bn.state.gamma, b.down_bn.gamma_m,
           b.down_bn.gamma_v, bg ? &bg->down_bn_gamma : nullptr);
        fn(prefix + "downsample.bn.beta", b.down_bn.state.beta, b.down_bn.beta_m,
           b.down_bn.beta_v, bg ? &bg->down_bn_beta : nullptr);
      }
    }
  }
  fn("fc.weight", net.fc_weight, net.fc_weight_m, net.fc_weight_v, grads ? &grads->fc_w : nullptr);
  fn("fc.bias", net.fc_bias, net.fc_bias_m, net.fc_bias_v, grads ? &grads->fc_b : nullptr);
}

/// Adapter when gradients are not involved: fn(name, value, m, v).
template <class NetT, class Fn>
void for_each_param(NetT& net, Fn&& fn) {
  for_each_param(net, static_cast<Gradients*>(nullptr),
                 [&fn](const std::string& name, auto& value, auto& m, auto& v, Tensor*) {
                   fn(name, value, m, v);
                 });
}

/// Traversal over batch-norm layers (for running statistics).
template <class NetT, class Fn>
void for_each_bn(NetT& net, Fn&& fn) {
  fn("bn1", net.bn1);
  std::array<decltype(&net.layer1), 4> layers = {&net.layer1, &net.layer2, &net.layer3,
                                                 &net.layer4};
  for (int li = 0; li < 4; ++li) {
    for (int bi = 0; bi < 2; ++bi) {
      auto& b = (*layers[li])[static_cast<std::size_t>(bi)];
      const std::string prefix = "layer" + std::to_string(li + 1) + "." + std::to_string(bi) + ".";
      fn(prefix + "bn_a", b.bn_a);
      fn(prefix + "bn_b", b.bn_b);
      if (b.has_downsample) fn(prefix + "downsample.bn", b.down_bn);
    }
  }
}

/// Deterministic initialization: conv weights Kaiming-normal (fan-out, ReLU
/// gain), BN gamma=1 / beta=0, fc weight uniform in +-1/sqrt(512), fc bias 0.
/// Random draws happen in the canonical parameter order, row-major within each
/// tensor, from the splitmix64 stream seeded here.
Network build_network(std::uint64_t seed);

/// Shapes and buffers only, no random draws. All tensors zero.
Network network_skeleton();

/// Everything the backward pass reads. Holds roughly one copy of each
/// intermediate activation plus the max-pool argmax.
struct BlockTape {
  Tensor conv_a_out;   // pre bn_a
  Tensor relu_a_out;
  Tensor conv_b_out;   // pre bn_b
  Tensor down_out;     // pre downsample bn (projection blocks only)
  Tensor output;       // post-shortcut ReLU
};

struct ActivationTape {
  Tensor input;
  Tensor conv1_out;    // pre bn1
  Tensor relu1_out;
  MaxPoolOut pool;
  std::array<BlockTape, 8> blocks;
  Tensor features;     // N x 512, post global pool
};

/// Runs the graph on an N x 3 x H x W batch. H and W may be any size the
/// stage geometry supports (the global pool absorbs spatial variation); the
/// canonical input is 256 x 256. When `tape` is given every intermediate is
/// retained for backward(); otherwise intermediates are dropped as soon as
/// possible. Eval mode leaves all running statistics untouched.
Tensor forward(Network& net, const Tensor& batch, Mode mode, ActivationTape* tape = nullptr);

/// Reverse-mode gradients for every trainable parameter. `tape` must come
/// from a training-mode forward on this network.
Gradients backward(Network& net, const ActivationTape& tape, const Tensor& grad_logits);

/// All-zero gradients shaped like the network's parameters.
Gradients zero_gradients(const Network& net);

struct ParamInfo {
  std::string name;
  std::vector<int> shape;
  std::int64_t count = 0;
};

/// Per-parameter shapes and counts in canonical order.
std::vector<ParamInfo> parameter_report(const Network& net);
std::int64_t total_parameter_count(const Network& net);

}  // namespace bsca
