#include "bsca/resnet.hpp"

#include <cmath>
#include <utility>

#include "bsca/rng.hpp"

namespace bsca {

namespace {

ConvLayer make_conv(int in_ch, int out_ch, int kernel, int stride, int padding) {
  ConvLayer layer;
  layer.spec = ConvSpec{in_ch, out_ch, kernel, stride, padding};
  layer.weight = Tensor({out_ch, in_ch, kernel, kernel});
  layer.weight_m = Tensor(layer.weight.shape());
  layer.weight_v = Tensor(layer.weight.shape());
  return layer;
}

BasicBlock make_block(int in_ch, int out_ch, int stride) {
  BasicBlock b;
  b.conv_a = make_conv(in_ch, out_ch, 3, stride, 1);
  b.bn_a = BatchNormLayer::make(out_ch);
  b.conv_b = make_conv(out_ch, out_ch, 3, 1, 1);
  b.bn_b = BatchNormLayer::make(out_ch);
  b.has_downsample = (in_ch != out_ch) || (stride != 1);
  if (b.has_downsample) {
    b.down_conv = make_conv(in_ch, out_ch, 1, stride, 0);
    b.down_bn = BatchNormLayer::make(out_ch);
  }
  return b;
}

void add_inplace(Tensor& acc, const Tensor& other, const char* what) {
  if (!acc.same_shape(other)) {
    throw ShapeError(std::string(what) + ": branch shape " + shape_str(acc.shape()) +
                     " != shortcut shape " + shape_str(other.shape()));
  }
  float* a = acc.data();
  const float* b = other.data();
  const std::int64_t n = acc.numel();
  for (std::int64_t i = 0; i < n; ++i) a[i] += b[i];
}

// Forward through one block into t.output. `x` stays alive in the caller's
// tape chain.
void block_forward(BasicBlock& b, const Tensor& x, BlockTape& t, bool keep) {
  t.conv_a_out = conv2d(x, b.conv_a.weight, b.conv_a.spec);
  Tensor bn_a_out = batchnorm(t.conv_a_out, b.bn_a.state);
  if (!keep) t.conv_a_out = Tensor();
  t.relu_a_out = relu(bn_a_out);
  bn_a_out = Tensor();
  t.conv_b_out = conv2d(t.relu_a_out, b.conv_b.weight, b.conv_b.spec);
  if (!keep) t.relu_a_out = Tensor();
  Tensor sum = batchnorm(t.conv_b_out, b.bn_b.state);
  if (!keep) t.conv_b_out = Tensor();
  if (b.has_downsample) {
    t.down_out = conv2d(x, b.down_conv.weight, b.down_conv.spec);
    add_inplace(sum, batchnorm(t.down_out, b.down_bn.state), "block shortcut add");
    if (!keep) t.down_out = Tensor();
  } else {
    add_inplace(sum, x, "block shortcut add");
  }
  t.output = relu(sum);
}

// Backward through one block: returns the gradient w.r.t. the block input.
Tensor block_backward(BasicBlock& b, const Tensor& x, const BlockTape& t, const Tensor& grad_out,
                      Gradients::BlockGrads& g) {
  // Final ReLU: output > 0 iff its pre-activation > 0.
  Tensor grad_sum = relu_backward(grad_out, t.output);

  // Trunk: bn_b <- conv_b <- relu_a <- bn_a <- conv_a.
  BatchNormGrads bnb = batchnorm_backward(grad_sum, t.conv_b_out, b.bn_b.state);
  g.bn_b_gamma = std::move(bnb.grad_gamma);
  g.bn_b_beta = std::move(bnb.grad_beta);
  ConvGrads cvb = conv2d_backward(bnb.grad_input, t.relu_a_out, b.conv_b.weight, b.conv_b.spec);
  g.conv_b_w = std::move(cvb.grad_weight);
  Tensor grad_bn_a_out = relu_backward(cvb.grad_input, t.relu_a_out);
  cvb.grad_input = Tensor();
  BatchNormGrads bna = batchnorm_backward(grad_bn_a_out, t.conv_a_out, b.bn_a.state);
  g.bn_a_gamma = std::move(bna.grad_gamma);
  g.bn_a_beta = std::move(bna.grad_beta);
  ConvGrads cva = conv2d_backward(bna.grad_input, x, b.conv_a.weight, b.conv_a.spec);
  g.conv_a_w = std::move(cva.grad_weight);
  Tensor grad_x = std::move(cva.grad_input);

  // Shortcut branch receives the same grad_sum.
  if (b.has_downsample) {
    BatchNormGrads dbn = batchnorm_backward(grad_sum, t.down_out, b.down_bn.state);
    g.down_bn_gamma = std::move(dbn.grad_gamma);
    g.down_bn_beta = std::move(dbn.grad_beta);
    ConvGrads dcv = conv2d_backward(dbn.grad_input, x, b.down_conv.weight, b.down_conv.spec);
    g.down_w = std::move(dcv.grad_weight);
    add_inplace(grad_x, dcv.grad_input, "block input grad merge");
  } else {
    add_inplace(grad_x, grad_sum, "block input grad merge");
  }
  return grad_x;
}

void set_mode(Network& net, Mode mode) {
  for_each_bn(net, [mode](const std::string&, BatchNormLayer& bn) { bn.state.mode = mode; });
}

}  // namespace

BatchNormLayer BatchNormLayer::make(int channels) {
  BatchNormLayer layer;
  layer.state = BatchNormState::make(channels);
  layer.gamma_m = Tensor({channels});
  layer.gamma_v = Tensor({channels});
  layer.beta_m = Tensor({channels});
  layer.beta_v = Tensor({channels});
  return layer;
}

Network network_skeleton() {
  Network net;
  net.conv1 = make_conv(3, 64, 7, 2, 3);
  net.bn1 = BatchNormLayer::make(64);
  net.layer1 = {make_block(64, 64, 1), make_block(64, 64, 1)};
  net.layer2 = {make_block(64, 128, 2), make_block(128, 128, 1)};
  net.layer3 = {make_block(128, 256, 2), make_block(256, 256, 1)};
  net.layer4 = {make_block(256, 512, 2), make_block(512, 512, 1)};
  net.fc_weight = Tensor({Network::kNumClasses, Network::kFeatureDim});
  net.fc_weight_m = Tensor(net.fc_weight.shape());
  net.fc_weight_v = Tensor(net.fc_weight.shape());
  net.fc_bias = Tensor({Network::kNumClasses});
  net.fc_bias_m = Tensor(net.fc_bias.shape());
  net.fc_bias_v = Tensor(net.fc_bias.shape());
  return net;
}

Network build_network(std::uint64_t seed) {
  Network net = network_skeleton();
  Rng rng(seed);
  for_each_param(net, [&rng](const std::string& name, Tensor& value, Tensor&, Tensor&) {
    if (name.ends_with("conv1.weight") || name.ends_with("conv_a.weight") ||
        name.ends_with("conv_b.weight") || name.ends_with("conv.weight")) {
      // Kaiming normal, fan-out mode, ReLU gain sqrt(2).
      const auto& s = value.shape();
      const double fan_out = static_cast<double>(s[0]) * s[2] * s[3];
      const double stddev = std::sqrt(2.0 / fan_out);
      for (std::int64_t i = 0; i < value.numel(); ++i) {
        value[i] = static_cast<float>(rng.normal() * stddev);
      }
    } else if (name == "fc.weight") {
      const double bound = 1.0 / std::sqrt(static_cast<double>(Network::kFeatureDim));
      for (std::int64_t i = 0; i < value.numel(); ++i) {
        value[i] = static_cast<float>(rng.uniform(-bound, bound));
      }
    }
    // BN gamma/beta and fc bias keep their constant initialization.
  });
  return net;
}

Tensor forward(Network& net, const Tensor& batch, Mode mode, ActivationTape* tape) {
  if (batch.ndim() != 4) {
    throw ShapeError("forward: batch must be N x 3 x H x W, got " + shape_str(batch.shape()));
  }
  if (batch.dim(1) != 3) {
    throw ShapeError("forward: batch channel count " + std::to_string(batch.dim(1)) + " != 3");
  }
  set_mode(net, mode);
  const bool keep = tape != nullptr;

  ActivationTape local;
  ActivationTape& t = keep ? *tape : local;
  if (keep) t.input = batch;

  t.conv1_out = conv2d(batch, net.conv1.weight, net.conv1.spec);
  Tensor bn1_out = batchnorm(t.conv1_out, net.bn1.state);
  if (!keep) t.conv1_out = Tensor();
  t.relu1_out = relu(bn1_out);
  bn1_out = Tensor();
  t.pool = maxpool2d(t.relu1_out, 3, 2, 1);
  if (!keep) t.relu1_out = Tensor();

  std::array<BasicBlock*, 8> blocks = {&net.layer1[0], &net.layer1[1], &net.layer2[0],
                                       &net.layer2[1], &net.layer3[0], &net.layer3[1],
                                       &net.layer4[0], &net.layer4[1]};
  const Tensor* cur = &t.pool.output;
  for (int i = 0; i < 8; ++i) {
    block_forward(*blocks[static_cast<std::size_t>(i)], *cur, t.blocks[static_cast<std::size_t>(i)],
                  keep);
    if (!keep && i > 0) t.blocks[static_cast<std::size_t>(i - 1)].output = Tensor();
    if (!keep && i == 0) t.pool = MaxPoolOut{};
    cur = &t.blocks[static_cast<std::size_t>(i)].output;
  }

  Tensor pooled = adaptive_avgpool_1x1(*cur);
  if (!keep) t.blocks[7].output = Tensor();
  const int n = pooled.dim(0);
  t.features = Tensor::from({n, Network::kFeatureDim}, std::move(pooled.values()));
  return linear(t.features, net.fc_weight, net.fc_bias);
}

Gradients backward(Network& net, const ActivationTape& tape, const Tensor& grad_logits) {
  const int n = tape.features.dim(0);
  require_shape(grad_logits, {n, Network::kNumClasses}, "backward grad_logits");

  Gradients grads;
  LinearGrads lg = linear_backward(grad_logits, tape.features, net.fc_weight);
  grads.fc_w = std::move(lg.grad_weight);
  grads.fc_b = std::move(lg.grad_bias);

  const auto& last_out = tape.blocks[7].output;
  Tensor grad_pooled =
      Tensor::from({n, Network::kFeatureDim, 1, 1}, std::move(lg.grad_input.values()));
  Tensor grad = adaptive_avgpool_1x1_backward(grad_pooled, last_out.shape());

  std::array<BasicBlock*, 8> blocks = {&net.layer1[0], &net.layer1[1], &net.layer2[0],
                                       &net.layer2[1], &net.layer3[0], &net.layer3[1],
                                       &net.layer4[0], &net.layer4[1]};
  for (int i = 7; i >= 0; --i) {
    const Tensor& block_in = (i == 0) ? tape.pool.output : tape.blocks[static_cast<std::size_t>(i - 1)].output;
    grad = block_backward(*blocks[static_cast<std::size_t>(i)], block_in,
                          tape.blocks[static_cast<std::size_t>(i)], grad,
                          grads.blocks[static_cast<std::size_t>(i)]);
  }

  grad = maxpool2d_backward(grad, tape.pool.argmax, tape.relu1_out.shape());
  grad = relu_backward(grad, tape.relu1_out);
  BatchNormGrads bn1g = batchnorm_backward(grad, tape.conv1_out, net.bn1.state);
  grads.bn1_gamma = std::move(bn1g.grad_gamma);
  grads.bn1_beta = std::move(bn1g.grad_beta);
  ConvGrads c1 = conv2d_backward(bn1g.grad_input, tape.input, net.conv1.weight, net.conv1.spec);
  grads.conv1_w = std::move(c1.grad_weight);
  return grads;
}

Gradients zero_gradients(const Network& net) {
  Gradients grads;
  for_each_param(const_cast<Network&>(net), &grads,
                 [](const std::string&, Tensor& value, Tensor&, Tensor&, Tensor* grad) {
                   *grad = Tensor(value.shape());
                 });
  return grads;
}

std::vector<ParamInfo> parameter_report(const Network& net) {
  std::vector<ParamInfo> rows;
  for_each_param(net, [&rows](const std::string& name, const Tensor& value, const Tensor&,
                              const Tensor&) {
    rows.push_back(ParamInfo{name, value.shape(), value.numel()});
  });
  return rows;
}

std::int64_t total_parameter_count(const Network& net) {
  std::int64_t total = 0;
  for (const auto& row : parameter_report(net)) total += row.count;
  return total;
}

}  // namespace bsca
