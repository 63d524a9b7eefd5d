#pragma once

#include <cstdint>
#include <vector>

#include "bsca/tensor.hpp"

namespace bsca {

enum class Mode { training, eval };

/// Geometry of one 2-D convolution. Convolutions carry no bias.
struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;
};

/// floor((extent + 2*padding - kernel) / stride) + 1. Throws ShapeError when
/// the result would be < 1.
int conv_out_extent(int extent, int kernel, int stride, int padding);

/// Zero-padded cross-correlation. input N x Cin x H x W, weight Cout x Cin x k x k.
/// Fast path is im2col + GEMM.
Tensor conv2d(const Tensor& input, const Tensor& weight, const ConvSpec& spec);

struct ConvGrads {
  Tensor grad_input;
  Tensor grad_weight;
};
ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight,
                          const ConvSpec& spec);

/// Per-channel batch normalization state. `mode` selects batch statistics
/// (training, mutates running stats) or running statistics (eval, pure).
struct BatchNormState {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  float momentum = 0.1f;
  float epsilon = 1e-5f;
  Mode mode = Mode::training;

  static BatchNormState make(int channels);
  int channels() const { return gamma.ndim() == 1 ? gamma.dim(0) : 0; }
};

/// Training mode normalizes with batch mean / biased batch variance, then
/// updates running stats as running <- (1-momentum)*running + momentum*batch,
/// storing the unbiased variance. Eval mode uses running stats only.
Tensor batchnorm(const Tensor& input, BatchNormState& state);

struct BatchNormGrads {
  Tensor grad_input;
  Tensor grad_gamma;
  Tensor grad_beta;
};
/// Adjoint of the training-mode forward, through the batch statistics
/// (recomputed from `input`).
BatchNormGrads batchnorm_backward(const Tensor& grad_out, const Tensor& input,
                                  const BatchNormState& state);

Tensor relu(const Tensor& input);
/// Gradient at exactly 0 is 0.
Tensor relu_backward(const Tensor& grad_out, const Tensor& input);

struct MaxPoolOut {
  Tensor output;
  std::vector<std::int64_t> argmax;  // flat input index per output element
};
/// Padding has -inf semantics: padded cells never win. Ties break to the
/// lowest flat input index.
MaxPoolOut maxpool2d(const Tensor& input, int kernel = 3, int stride = 2, int padding = 1);
Tensor maxpool2d_backward(const Tensor& grad_out, const std::vector<std::int64_t>& argmax,
                          const std::vector<int>& input_shape);

/// Global spatial mean per channel: N x C x H x W -> N x C x 1 x 1.
Tensor adaptive_avgpool_1x1(const Tensor& input);
Tensor adaptive_avgpool_1x1_backward(const Tensor& grad_out, const std::vector<int>& input_shape);

/// out = input * weight^T + bias. input N x F, weight K x F, bias K.
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

struct LinearGrads {
  Tensor grad_input;
  Tensor grad_weight;
  Tensor grad_bias;
};
LinearGrads linear_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight);

struct XentOut {
  double loss = 0.0;              // mean over the batch
  Tensor grad_logits;             // (softmax - onehot) / N
};
/// Cross-entropy over softmax with max-subtraction stabilization.
XentOut softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

/// Row-wise softmax of an N x K matrix.
Tensor softmax_rows(const Tensor& logits);

}  // namespace bsca
