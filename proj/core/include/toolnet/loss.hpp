#pragma once

#include <optional>
#include <vector>

#include "toolnet/autograd.hpp"
#include "toolnet/labels.hpp"

namespace toolnet {

/// Per-class loss weights derived from class frequencies:
/// w_i = sqrt(max_j f_j / f_i). The most frequent class gets weight 1.
struct ClassWeights {
  std::vector<double> w;
};

ClassWeights class_weights(const std::vector<double>& frequencies);

/// Binary cross-entropy for one output. q is clamped to [1e-12, 1 - 1e-12]
/// before the logs; values outside [0,1] pre-clamp are rejected.
double bce(int label, double q);

/// Multi-label binary-relevance loss over a batch of sigmoid outputs
/// [N, c]: per example the masked, optionally class-weighted BCE terms are
/// summed over classes; the batch is averaged. Returns a scalar graph node.
Var multilabel_loss(const Var& probs, const std::vector<LabelVector>& labels,
                    const ClassWeights* weights = nullptr);

}  // namespace toolnet
