#pragma once

#include "bsca/resnet.hpp"

namespace bsca {

struct AdamConfig {
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Element-wise Adam update with bias correction for step number `step`
/// (1-based):
///   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2,
///   theta <- theta - lr * mhat / (sqrt(vhat) + eps).
/// Arithmetic runs in double; values and moments stay in 32-bit storage.
void adam_update(float* value, float* m, float* v, const float* grad, std::int64_t n,
                 const AdamConfig& cfg, std::uint64_t step);

/// Applies adam_update to every trainable parameter and increments the
/// network step counter once. Non-finite gradients raise NumericError naming
/// the parameter.
void adam_step(Network& net, const Gradients& grads, const AdamConfig& cfg);

}  // namespace bsca
