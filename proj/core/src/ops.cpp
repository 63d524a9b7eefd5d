#include "bsca/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bsca/gemm.hpp"
#include "bsca/parallel.hpp"

namespace bsca {

namespace {

void require_4d(const Tensor& t, const char* what) {
  if (t.ndim() != 4) {
    throw ShapeError(std::string(what) + ": expected a 4-D tensor, got " + shape_str(t.shape()));
  }
}

// Standard im2col: cols[(ci*k + kh)*k + kw][ho*out_w + wo], zero padded.
void im2col(const float* x, int channels, int h, int w, int kernel, int stride, int padding,
            int out_h, int out_w, float* cols) {
  const std::int64_t sites = static_cast<std::int64_t>(out_h) * out_w;
  for (int ci = 0; ci < channels; ++ci) {
    for (int kh = 0; kh < kernel; ++kh) {
      for (int kw = 0; kw < kernel; ++kw) {
        float* row = cols + (static_cast<std::int64_t>(ci) * kernel * kernel + kh * kernel + kw) * sites;
        for (int ho = 0; ho < out_h; ++ho) {
          const int ih = ho * stride - padding + kh;
          float* dst = row + static_cast<std::int64_t>(ho) * out_w;
          if (ih < 0 || ih >= h) {
            std::fill(dst, dst + out_w, 0.0f);
            continue;
          }
          const float* src = x + (static_cast<std::int64_t>(ci) * h + ih) * w;
          for (int wo = 0; wo < out_w; ++wo) {
            const int iw = wo * stride - padding + kw;
            dst[wo] = (iw >= 0 && iw < w) ? src[iw] : 0.0f;
          }
        }
      }
    }
  }
}

// Transposed layout used by the backward pass: colsT[site][patch element].
void im2col_t(const float* x, int channels, int h, int w, int kernel, int stride, int padding,
              int out_h, int out_w, float* cols_t) {
  const int patch = channels * kernel * kernel;
  for (int ho = 0; ho < out_h; ++ho) {
    for (int wo = 0; wo < out_w; ++wo) {
      float* dst = cols_t + (static_cast<std::int64_t>(ho) * out_w + wo) * patch;
      for (int ci = 0; ci < channels; ++ci) {
        const float* plane = x + static_cast<std::int64_t>(ci) * h * w;
        for (int kh = 0; kh < kernel; ++kh) {
          const int ih = ho * stride - padding + kh;
          for (int kw = 0; kw < kernel; ++kw) {
            const int iw = wo * stride - padding + kw;
            *dst++ = (ih >= 0 && ih < h && iw >= 0 && iw < w)
                         ? plane[static_cast<std::int64_t>(ih) * w + iw]
                         : 0.0f;
          }
        }
      }
    }
  }
}

// Scatter-add of the transposed column layout back into an image.
void col2im_t(const float* cols_t, int channels, int h, int w, int kernel, int stride,
              int padding, int out_h, int out_w, float* grad_x) {
  const int patch = channels * kernel * kernel;
  for (int ho = 0; ho < out_h; ++ho) {
    for (int wo = 0; wo < out_w; ++wo) {
      const float* src = cols_t + (static_cast<std::int64_t>(ho) * out_w + wo) * patch;
      for (int ci = 0; ci < channels; ++ci) {
        float* plane = grad_x + static_cast<std::int64_t>(ci) * h * w;
        for (int kh = 0; kh < kernel; ++kh) {
          const int ih = ho * stride - padding + kh;
          for (int kw = 0; kw < kernel; ++kw, ++src) {
            const int iw = wo * stride - padding + kw;
            if (ih >= 0 && ih < h && iw >= 0 && iw < w) {
              plane[static_cast<std::int64_t>(ih) * w + iw] += *src;
            }
          }
        }
      }
    }
  }
}

void check_conv_args(const Tensor& input, const Tensor& weight, const ConvSpec& spec) {
  require_4d(input, "conv2d input");
  require_4d(weight, "conv2d weight");
  if (input.dim(1) != spec.in_channels) {
    throw ShapeError("conv2d: input channel count " + std::to_string(input.dim(1)) +
                     " != spec.in_channels " + std::to_string(spec.in_channels));
  }
  const std::vector<int> wshape{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel};
  require_shape(weight, wshape, "conv2d weight");
  if (spec.stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (spec.padding < 0) throw ShapeError("conv2d: padding must be >= 0");
}

}  // namespace

int conv_out_extent(int extent, int kernel, int stride, int padding) {
  const int out = (extent + 2 * padding - kernel) / stride + 1;
  if (extent + 2 * padding < kernel || out < 1) {
    throw ShapeError("spatial extent " + std::to_string(extent) + " too small for kernel " +
                     std::to_string(kernel) + " stride " + std::to_string(stride) +
                     " padding " + std::to_string(padding));
  }
  return out;
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const ConvSpec& spec) {
  check_conv_args(input, weight, spec);
  const int n = input.dim(0), cin = spec.in_channels, h = input.dim(2), w = input.dim(3);
  const int cout = spec.out_channels, k = spec.kernel;
  const int out_h = conv_out_extent(h, k, spec.stride, spec.padding);
  const int out_w = conv_out_extent(w, k, spec.stride, spec.padding);
  const int patch = cin * k * k;
  const std::int64_t sites = static_cast<std::int64_t>(out_h) * out_w;

  Tensor out({n, cout, out_h, out_w});
  std::vector<float> cols(static_cast<std::size_t>(patch) * sites);
  for (int i = 0; i < n; ++i) {
    const float* x = input.data() + static_cast<std::int64_t>(i) * cin * h * w;
    im2col(x, cin, h, w, k, spec.stride, spec.padding, out_h, out_w, cols.data());
    float* y = out.data() + static_cast<std::int64_t>(i) * cout * sites;
    gemm_nn(cout, static_cast<int>(sites), patch, weight.data(), cols.data(), y);
  }
  require_finite(out, "conv2d");
  return out;
}

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight,
                          const ConvSpec& spec) {
  check_conv_args(input, weight, spec);
  const int n = input.dim(0), cin = spec.in_channels, h = input.dim(2), w = input.dim(3);
  const int cout = spec.out_channels, k = spec.kernel;
  const int out_h = conv_out_extent(h, k, spec.stride, spec.padding);
  const int out_w = conv_out_extent(w, k, spec.stride, spec.padding);
  require_shape(grad_out, {n, cout, out_h, out_w}, "conv2d_backward grad_out");

  const int patch = cin * k * k;
  const std::int64_t sites = static_cast<std::int64_t>(out_h) * out_w;

  ConvGrads grads;
  grads.grad_input = Tensor(input.shape());
  grads.grad_weight = Tensor(weight.shape());

  std::vector<float> cols_t(static_cast<std::size_t>(sites) * patch);
  std::vector<float> g_t(static_cast<std::size_t>(sites) * cout);
  for (int i = 0; i < n; ++i) {
    const float* x = input.data() + static_cast<std::int64_t>(i) * cin * h * w;
    const float* g = grad_out.data() + static_cast<std::int64_t>(i) * cout * sites;

    // grad_weight += g[cout x sites] * cols[patch x sites]^T
    im2col_t(x, cin, h, w, k, spec.stride, spec.padding, out_h, out_w, cols_t.data());
    gemm_nn(cout, patch, static_cast<int>(sites), g, cols_t.data(), grads.grad_weight.data(),
            /*accumulate=*/true);

    // grad_cols[sites x patch] = g^T[sites x cout] * weight[cout x patch]
    transpose(cout, static_cast<int>(sites), g, g_t.data());
    gemm_nn(static_cast<int>(sites), patch, cout, g_t.data(), weight.data(), cols_t.data());
    float* gx = grads.grad_input.data() + static_cast<std::int64_t>(i) * cin * h * w;
    col2im_t(cols_t.data(), cin, h, w, k, spec.stride, spec.padding, out_h, out_w, gx);
  }
  return grads;
}

BatchNormState BatchNormState::make(int channels) {
  BatchNormState s;
  s.gamma = Tensor::full({channels}, 1.0f);
  s.beta = Tensor({channels});
  s.running_mean = Tensor({channels});
  s.running_var = Tensor::full({channels}, 1.0f);
  return s;
}

Tensor batchnorm(const Tensor& input, BatchNormState& state) {
  require_4d(input, "batchnorm input");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (c != state.channels()) {
    throw ShapeError("batchnorm: input channel count " + std::to_string(c) +
                     " != state channel count " + std::to_string(state.channels()));
  }
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  const std::int64_t m = static_cast<std::int64_t>(n) * plane;
  const bool training = state.mode == Mode::training;
  if (training && m < 2) {
    throw ShapeError("batchnorm: training mode needs N*H*W >= 2, got " + std::to_string(m));
  }

  Tensor out(input.shape());
  parallel_for(c, [&](std::int64_t c0, std::int64_t c1) {
    for (std::int64_t ch = c0; ch < c1; ++ch) {
      double mean, var;
      if (training) {
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < n; ++i) {
          const float* src = input.data() + (static_cast<std::int64_t>(i) * c + ch) * plane;
          for (std::int64_t j = 0; j < plane; ++j) {
            const double v = src[j];
            sum += v;
            sumsq += v * v;
          }
        }
        mean = sum / static_cast<double>(m);
        var = sumsq / static_cast<double>(m) - mean * mean;
        if (var < 0.0) var = 0.0;  // guard tiny negative from cancellation
      } else {
        mean = state.running_mean[ch];
        var = state.running_var[ch];
      }
      const float inv_std = static_cast<float>(1.0 / std::sqrt(var + state.epsilon));
      const float g = state.gamma[ch];
      const float b = state.beta[ch];
      const float mu = static_cast<float>(mean);
      for (int i = 0; i < n; ++i) {
        const float* src = input.data() + (static_cast<std::int64_t>(i) * c + ch) * plane;
        float* dst = out.data() + (static_cast<std::int64_t>(i) * c + ch) * plane;
        for (std::int64_t j = 0; j < plane; ++j) {
          dst[j] = (src[j] - mu) * inv_std * g + b;
        }
      }
      if (training) {
        const double unbiased = var * static_cast<double>(m) / static_cast<double>(m - 1);
        state.running_mean[ch] = static_cast<float>((1.0 - state.momentum) * state.running_mean[ch] +
                                                    state.momentum * mean);
        state.running_var[ch] = static_cast<float>((1.0 - state.momentum) * state.running_var[ch] +
                                                   state.momentum * unbiased);
      }
    }
  });
  require_finite(out, "batchnorm");
  return out;
}

BatchNormGrads batchnorm_backward(const Tensor& grad_out, const Tensor& input,
                                  const BatchNormState& state) {
  require_4d(input, "batchnorm_backward input");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (c != state.channels()) {
    throw ShapeError("batchnorm_backward: input channel count " + std::to_string(c) +
                     " != state channel count " + std::to_string(state.channels()));
  }
  require_shape(grad_out, input.shape(), "batchnorm_backward grad_out");
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  const std::int64_t m = static_cast<std::int64_t>(n) * plane;
  if (m < 2) {
    throw ShapeError("batchnorm_backward: needs N*H*W >= 2, got " + std::to_string(m));
  }

  BatchNormGrads grads;
  grads.grad_input = Tensor(input.shape());
  grads.grad_gamma = Tensor({c});
  grads.grad_beta = Tensor({c});

  parallel_for(c, [&](std::int64_t c0, std::int64_t c1) {
    for (std::int64_t ch = c0; ch < c1; ++ch) {
      double sum = 0.0, sumsq = 0.0;
      for (int i = 0; i < n; ++i) {
        const float* src = input.data() + (static_cast<std::int64_t>(i) * c + ch) * plane;
        for (std::int64_t j = 0; j < plane; ++j) {
          const double v = src[j];
          sum += v;
          sumsq += v * v;
        }
      }
      const double mean = sum / static_cast<double>(m);
      double var = sumsq / static_cast<double>(m) - mean * mean;
      if (var < 0.0) var = 0.0;
      const double inv_std = 1.0 / std::sqrt(var + state.epsilon);

      // sum_dy and sum_dy_xhat over the channel
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int i = 0; i < n; ++i) {
        const std::int64_t base = (static_cast<std::int64_t>(i) * c + ch) * plane;
        const float* gy = grad_out.data() + base;
        const float* x = input.data() + base;
        for (std::int64_t j = 0; j < plane; ++j) {
          const double dy = gy[j];
          sum_dy += dy;
          sum_dy_xhat += dy * (x[j] - mean) * inv_std;
        }
      }
      grads.grad_beta[ch] = static_cast<float>(sum_dy);
      grads.grad_gamma[ch] = static_cast<float>(sum_dy_xhat);

      const double g = state.gamma[ch];
      const double scale = g * inv_std / static_cast<double>(m);
      for (int i = 0; i < n; ++i) {
        const std::int64_t base = (static_cast<std::int64_t>(i) * c + ch) * plane;
        const float* gy = grad_out.data() + base;
        const float* x = input.data() + base;
        float* gx = grads.grad_input.data() + base;
        for (std::int64_t j = 0; j < plane; ++j) {
          const double xhat = (x[j] - mean) * inv_std;
          gx[j] = static_cast<float>(scale * (static_cast<double>(m) * gy[j] - sum_dy - xhat * sum_dy_xhat));
        }
      }
    }
  });
  return grads;
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape());
  const float* x = input.data();
  float* y = out.data();
  const std::int64_t n = input.numel();
  for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
  return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& input) {
  require_shape(grad_out, input.shape(), "relu_backward grad_out");
  Tensor out(input.shape());
  const float* g = grad_out.data();
  const float* x = input.data();
  float* y = out.data();
  const std::int64_t n = input.numel();
  for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? g[i] : 0.0f;
  return out;
}

MaxPoolOut maxpool2d(const Tensor& input, int kernel, int stride, int padding) {
  require_4d(input, "maxpool2d input");
  if (padding >= kernel) {
    throw ShapeError("maxpool2d: padding must be < kernel so every window sees the input");
  }
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int out_h = conv_out_extent(h, kernel, stride, padding);
  const int out_w = conv_out_extent(w, kernel, stride, padding);

  MaxPoolOut res;
  res.output = Tensor({n, c, out_h, out_w});
  res.argmax.assign(static_cast<std::size_t>(res.output.numel()), -1);

  const std::int64_t planes = static_cast<std::int64_t>(n) * c;
  parallel_for(planes, [&](std::int64_t p0, std::int64_t p1) {
    for (std::int64_t p = p0; p < p1; ++p) {
      const float* src = input.data() + p * h * w;
      float* dst = res.output.data() + p * out_h * out_w;
      std::int64_t* arg = res.argmax.data() + p * out_h * out_w;
      for (int ho = 0; ho < out_h; ++ho) {
        for (int wo = 0; wo < out_w; ++wo) {
          float best = -std::numeric_limits<float>::infinity();
          std::int64_t best_idx = -1;
          for (int kh = 0; kh < kernel; ++kh) {
            const int ih = ho * stride - padding + kh;
            if (ih < 0 || ih >= h) continue;
            for (int kw = 0; kw < kernel; ++kw) {
              const int iw = wo * stride - padding + kw;
              if (iw < 0 || iw >= w) continue;
              const std::int64_t idx = static_cast<std::int64_t>(ih) * w + iw;
              if (src[idx] > best) {  // strict: ties keep the lowest flat index
                best = src[idx];
                best_idx = idx;
              }
            }
          }
          dst[static_cast<std::int64_t>(ho) * out_w + wo] = best;
          arg[static_cast<std::int64_t>(ho) * out_w + wo] = p * h * w + best_idx;
        }
      }
    }
  });
  return res;
}

Tensor maxpool2d_backward(const Tensor& grad_out, const std::vector<std::int64_t>& argmax,
                          const std::vector<int>& input_shape) {
  if (argmax.size() != static_cast<std::size_t>(grad_out.numel())) {
    throw ShapeError("maxpool2d_backward: argmax length " + std::to_string(argmax.size()) +
                     " != grad_out element count " + std::to_string(grad_out.numel()));
  }
  Tensor grad_input(input_shape);
  const float* g = grad_out.data();
  float* gx = grad_input.data();
  const std::int64_t n = grad_out.numel();
  const std::int64_t in_numel = grad_input.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t idx = argmax[static_cast<std::size_t>(i)];
    if (idx < 0 || idx >= in_numel) {
      throw ShapeError("maxpool2d_backward: argmax index " + std::to_string(idx) +
                       " outside input of " + std::to_string(in_numel) + " elements");
    }
    gx[idx] += g[i];  // windows overlap, gradients accumulate
  }
  return grad_input;
}

Tensor adaptive_avgpool_1x1(const Tensor& input) {
  require_4d(input, "adaptive_avgpool input");
  const int n = input.dim(0), c = input.dim(1);
  const std::int64_t plane = static_cast<std::int64_t>(input.dim(2)) * input.dim(3);
  Tensor out({n, c, 1, 1});
  for (std::int64_t p = 0; p < static_cast<std::int64_t>(n) * c; ++p) {
    const float* src = input.data() + p * plane;
    double sum = 0.0;
    for (std::int64_t j = 0; j < plane; ++j) sum += src[j];
    out[p] = static_cast<float>(sum / static_cast<double>(plane));
  }
  return out;
}

Tensor adaptive_avgpool_1x1_backward(const Tensor& grad_out, const std::vector<int>& input_shape) {
  if (input_shape.size() != 4) {
    throw ShapeError("adaptive_avgpool_backward: input shape must be 4-D");
  }
  const int n = input_shape[0], c = input_shape[1];
  require_shape(grad_out, {n, c, 1, 1}, "adaptive_avgpool_backward grad_out");
  const std::int64_t plane = static_cast<std::int64_t>(input_shape[2]) * input_shape[3];
  Tensor grad_input(input_shape);
  for (std::int64_t p = 0; p < static_cast<std::int64_t>(n) * c; ++p) {
    const float v = grad_out[p] / static_cast<float>(plane);
    float* dst = grad_input.data() + p * plane;
    std::fill(dst, dst + plane, v);
  }
  return grad_input;
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.ndim() != 2 || weight.ndim() != 2 || bias.ndim() != 1) {
    throw ShapeError("linear: expected input N x F, weight K x F, bias K");
  }
  const int n = input.dim(0), f = input.dim(1);
  const int k = weight.dim(0);
  if (weight.dim(1) != f) {
    throw ShapeError("linear: weight feature count " + std::to_string(weight.dim(1)) +
                     " != input feature count " + std::to_string(f));
  }
  if (bias.dim(0) != k) {
    throw ShapeError("linear: bias length " + std::to_string(bias.dim(0)) +
                     " != output count " + std::to_string(k));
  }
  std::vector<float> wt(static_cast<std::size_t>(f) * k);
  transpose(k, f, weight.data(), wt.data());
  Tensor out({n, k});
  gemm_nn(n, k, f, input.data(), wt.data(), out.data());
  for (int i = 0; i < n; ++i) {
    float* row = out.data() + static_cast<std::int64_t>(i) * k;
    for (int j = 0; j < k; ++j) row[j] += bias[j];
  }
  require_finite(out, "linear");
  return out;
}

LinearGrads linear_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight) {
  const int n = input.dim(0), f = input.dim(1), k = weight.dim(0);
  require_shape(grad_out, {n, k}, "linear_backward grad_out");

  LinearGrads grads;
  grads.grad_input = Tensor({n, f});
  gemm_nn(n, f, k, grad_out.data(), weight.data(), grads.grad_input.data());

  std::vector<float> gt(static_cast<std::size_t>(k) * n);
  transpose(n, k, grad_out.data(), gt.data());
  grads.grad_weight = Tensor({k, f});
  gemm_nn(k, f, n, gt.data(), input.data(), grads.grad_weight.data());

  grads.grad_bias = Tensor({k});
  for (int i = 0; i < n; ++i) {
    const float* row = grad_out.data() + static_cast<std::int64_t>(i) * k;
    for (int j = 0; j < k; ++j) grads.grad_bias[j] += row[j];
  }
  return grads;
}

XentOut softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.ndim() != 2) {
    throw ShapeError("softmax_cross_entropy: logits must be N x K, got " + shape_str(logits.shape()));
  }
  const int n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != n) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " rows");
  }

  XentOut res;
  res.grad_logits = Tensor({n, k});
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= k) {
      throw DataError("softmax_cross_entropy: label " + std::to_string(label) +
                      " out of range [0, " + std::to_string(k) + ")");
    }
    const float* row = logits.data() + static_cast<std::int64_t>(i) * k;
    double mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double denom = 0.0;
    for (int j = 0; j < k; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
    const double log_denom = std::log(denom);
    total += log_denom - (static_cast<double>(row[label]) - mx);

    float* grow = res.grad_logits.data() + static_cast<std::int64_t>(i) * k;
    for (int j = 0; j < k; ++j) {
      const double p = std::exp(static_cast<double>(row[j]) - mx) / denom;
      grow[j] = static_cast<float>((p - (j == label ? 1.0 : 0.0)) / n);
    }
  }
  res.loss = total / n;
  if (!std::isfinite(res.loss)) throw NumericError("softmax_cross_entropy produced a non-finite loss");
  require_finite(res.grad_logits, "softmax_cross_entropy");
  return res;
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.ndim() != 2) {
    throw ShapeError("softmax_rows: logits must be N x K, got " + shape_str(logits.shape()));
  }
  const int n = logits.dim(0), k = logits.dim(1);
  Tensor out({n, k});
  for (int i = 0; i < n; ++i) {
    const float* row = logits.data() + static_cast<std::int64_t>(i) * k;
    float* dst = out.data() + static_cast<std::int64_t>(i) * k;
    double mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double denom = 0.0;
    for (int j = 0; j < k; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
    for (int j = 0; j < k; ++j) {
      dst[j] = static_cast<float>(std::exp(static_cast<double>(row[j]) - mx) / denom);
    }
  }
  return out;
}

}  // namespace bsca
