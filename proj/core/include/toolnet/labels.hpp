#pragma once

#include <cstdint>
#include <vector>

namespace toolnet {

/// Per-frame binary tool-presence labels plus a per-class evaluation mask.
/// A mask bit of 0 means the class is ignored for this frame (annotator
/// disagreement); it then contributes nothing to loss or AUC.
struct LabelVector {
  std::vector<std::uint8_t> present;
  std::vector<std::uint8_t> evaluate;

  LabelVector() = default;
  explicit LabelVector(std::size_t num_classes)
      : present(num_classes, 0), evaluate(num_classes, 1) {}

  std::size_t size() const { return present.size(); }
  bool any_present() const {
    for (auto b : present)
      if (b) return true;
    return false;
  }
};

}  // namespace toolnet
