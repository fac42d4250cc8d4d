#include "toolnet/optim.hpp"

namespace toolnet {

void sgd_momentum_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum,
                       double l2) {
  if (!param.same_shape(grad) || !param.same_shape(velocity)) {
    throw std::invalid_argument("sgd_momentum_step: shape mismatch between param " +
                                shape_string(param.shape()) + ", grad " + shape_string(grad.shape()) +
                                " and velocity " + shape_string(velocity.shape()));
  }
  for (std::size_t i = 0; i < param.numel(); ++i) {
    double g = grad[i] + l2 * param[i];
    velocity[i] = momentum * velocity[i] + g;
    param[i] -= lr * velocity[i];
  }
}

}  // namespace toolnet
