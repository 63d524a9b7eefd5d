#include "bsca/adam.hpp"

#include <cmath>

namespace bsca {

void adam_update(float* value, float* m, float* v, const float* grad, std::int64_t n,
                 const AdamConfig& cfg, std::uint64_t step) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::int64_t i = 0; i < n; ++i) {
    const double g = grad[i];
    const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    m[i] = static_cast<float>(mi);
    v[i] = static_cast<float>(vi);
    const double update = cfg.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.epsilon);
    value[i] = static_cast<float>(value[i] - update);
  }
}

void adam_step(Network& net, const Gradients& grads, const AdamConfig& cfg) {
  if (cfg.lr <= 0.0) throw Error("adam_step: learning rate must be positive");
  const std::uint64_t step = net.step_count + 1;

  for_each_param(net, &grads,
                 [&](const std::string& name, Tensor& value, Tensor& m, Tensor& v,
                     const Tensor* grad) {
                   if (!grad->same_shape(value)) {
                     throw ShapeError("adam_step: gradient for " + name + " has shape " +
                                      shape_str(grad->shape()) + ", parameter has " +
                                      shape_str(value.shape()));
                   }
                   if (!grad->all_finite()) {
                     throw NumericError("adam_step: non-finite gradient for " + name);
                   }
                   adam_update(value.data(), m.data(), v.data(), grad->data(), value.numel(), cfg,
                               step);
                 });
  ++net.step_count;
}

}  // namespace bsca
