#pragma once

#include <cstdint>
#include <stdexcept>

#include "toolnet/tensor.hpp"

namespace toolnet {

/// Optimization settings for one training run.
struct TrainConfig {
  double lr0 = 0.05;
  double decay = 0.001;
  double momentum = 0.9;
  std::size_t batch_size = 8;
  std::size_t iterations = 2000;
  double l2 = 0.0;
  bool weighted = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (lr0 <= 0.0) throw std::invalid_argument("TrainConfig: lr0 must be positive");
    if (decay < 0.0) throw std::invalid_argument("TrainConfig: decay must be non-negative");
    if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("TrainConfig: momentum must be in [0,1)");
    if (l2 < 0.0) throw std::invalid_argument("TrainConfig: l2 must be non-negative");
    if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
  }
};

/// Learning rate for batch n (counted from 0): lr0 / (1 + d*n).
inline double lr_at(std::size_t n, const TrainConfig& cfg) {
  return cfg.lr0 / (1.0 + cfg.decay * static_cast<double>(n));
}

/// Classic heavy-ball momentum with optional L2 term:
///   g' = g + l2*theta;  v = momentum*v + g';  theta = theta - lr*v.
void sgd_momentum_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum,
                       double l2);

}  // namespace toolnet
