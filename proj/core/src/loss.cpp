#include "toolnet/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace toolnet {

namespace {
constexpr double kClamp = 1e-12;
}

ClassWeights class_weights(const std::vector<double>& frequencies) {
  if (frequencies.empty()) throw std::invalid_argument("class_weights: empty frequency vector");
  double fmax = 0.0;
  for (std::size_t i = 0; i < frequencies.size(); ++i) {
    if (frequencies[i] <= 0.0) {
      throw std::invalid_argument("class_weights: frequency of class " + std::to_string(i) +
                                  " is not positive; exclude the class instead");
    }
    fmax = std::max(fmax, frequencies[i]);
  }
  ClassWeights cw;
  cw.w.reserve(frequencies.size());
  for (double f : frequencies) cw.w.push_back(std::sqrt(fmax / f));
  return cw;
}

double bce(int label, double q) {
  if (label != 0 && label != 1) throw std::invalid_argument("bce: label must be 0 or 1");
  if (q < 0.0 || q > 1.0) {
    throw std::invalid_argument("bce: probability " + std::to_string(q) + " outside [0,1]");
  }
  double qc = std::clamp(q, kClamp, 1.0 - kClamp);
  return -(1.0 - label) * std::log(1.0 - qc) - label * std::log(qc);
}

Var multilabel_loss(const Var& probs, const std::vector<LabelVector>& labels, const ClassWeights* weights) {
  if (probs->value.ndim() != 2) {
    throw std::invalid_argument("multilabel_loss: expected [N,c] outputs, got " +
                                shape_string(probs->value.shape()));
  }
  std::size_t n = probs->value.shape()[0];
  std::size_t c = probs->value.shape()[1];
  if (labels.size() != n) {
    throw std::invalid_argument("multilabel_loss: batch size " + std::to_string(n) + " vs " +
                                std::to_string(labels.size()) + " label vectors");
  }
  for (const auto& lv : labels) {
    if (lv.size() != c || lv.evaluate.size() != c) {
      throw std::invalid_argument("multilabel_loss: label vector length does not match " + std::to_string(c) +
                                  " outputs");
    }
  }
  if (weights && weights->w.size() != c) {
    throw std::invalid_argument("multilabel_loss: weight vector length does not match outputs");
  }

  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < c; ++i) {
      if (!labels[s].evaluate[i]) continue;
      double w = weights ? weights->w[i] : 1.0;
      total += w * bce(labels[s].present[i], probs->value[s * c + i]);
    }
  }
  total /= static_cast<double>(n);

  // Copies so the closure does not dangle on caller-owned label storage.
  auto labels_keep = std::make_shared<std::vector<LabelVector>>(labels);
  auto w_keep = std::make_shared<std::vector<double>>(weights ? weights->w : std::vector<double>{});
  return make_result(Tensor::scalar(total), {probs}, [labels_keep, w_keep, n, c](Node& self) {
    const Var& p = self.parents[0];
    if (!p->requires_grad) return;
    double upstream = self.grad[0];
    double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t s = 0; s < n; ++s) {
      const LabelVector& lv = (*labels_keep)[s];
      for (std::size_t i = 0; i < c; ++i) {
        if (!lv.evaluate[i]) continue;
        double w = w_keep->empty() ? 1.0 : (*w_keep)[i];
        double q = std::clamp(p->value[s * c + i], kClamp, 1.0 - kClamp);
        double dh = lv.present[i] ? -1.0 / q : 1.0 / (1.0 - q);
        p->grad[s * c + i] += upstream * inv_n * w * dh;
      }
    }
  });
}

}  // namespace toolnet
