#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "toolnet/tensor.hpp"

namespace toolnet {

class Node;
using Var = std::shared_ptr<Node>;

/// One value in a recorded op graph (define-by-run reverse mode).
/// Parameters are long-lived leaf nodes; intermediate nodes live for
/// one forward/backward pass.
class Node {
 public:
  Tensor value;
  Tensor grad;  // allocated iff requires_grad
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backprop;

  explicit Node(Tensor v, bool rg) : value(std::move(v)), requires_grad(rg) {
    if (rg) grad = Tensor::zeros(value.shape());
  }

  void zero_grad() {
    std::fill(grad.vec().begin(), grad.vec().end(), 0.0);
  }
};

inline Var make_const(Tensor t) { return std::make_shared<Node>(std::move(t), false); }
inline Var make_param(Tensor t) { return std::make_shared<Node>(std::move(t), true); }

/// Creates a result node wired to its parents; requires_grad is inherited.
Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop);

/// Runs reverse-mode accumulation from a scalar root through the recorded
/// graph. Throws std::logic_error if the root has no recorded forward pass
/// or is not scalar.
void backward(const Var& root);

/// Mutable batch-norm statistics owned by a layer, not by the op graph.
struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;

  explicit BatchNormState(std::size_t channels)
      : running_mean(Tensor::zeros({channels})), running_var(Tensor::full({channels}, 1.0)) {}
};

// Forward + backward kernels. All expect finite inputs and verify finite
// outputs (NaN surfaces as std::runtime_error, never propagates silently).

Var conv2d(const Var& input, const Var& kernel, const Var& bias, std::size_t stride, std::size_t padding);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var add(const Var& a, const Var& b);
Var global_avg_pool(const Var& x);
Var global_max_pool(const Var& x);
Var max_pool(const Var& x, std::size_t k, std::size_t stride);
Var fully_connected(const Var& x, const Var& weight, const Var& bias);
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, bool train,
               double momentum = 0.9, double epsilon = 1e-5);

}  // namespace toolnet
