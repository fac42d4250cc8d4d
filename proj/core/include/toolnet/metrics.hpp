#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "toolnet/labels.hpp"
#include "toolnet/tensor.hpp"

namespace toolnet {

/// ROC curve points in sweep order, starting at (0,0) and ending at (1,1).
struct RocCurve {
  std::vector<double> fpr;
  std::vector<double> tpr;
  std::vector<double> thresholds;  // one per interior point
};

struct ClassAuc {
  std::string name;
  std::optional<double> auc;  // empty => skipped
  std::string skip_reason;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

struct AucReport {
  std::vector<ClassAuc> per_class;
  double macro_auc = 0.0;  // mean over non-skipped classes

  std::string to_table() const;  // human-readable, average row + per-tool rows
  std::string to_csv() const;    // header "tool,auc"
};

/// Mann-Whitney AUC with midrank tie handling. Entries with mask 0 are
/// dropped first. Returns empty if the masked sample has no positives or
/// no negatives.
std::optional<double> auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels,
                          const std::vector<std::uint8_t>& mask);

/// Threshold sweep over distinct scores, descending. The trapezoidal area
/// under the returned curve equals auc() to within 1e-12.
RocCurve roc_curve(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels,
                   const std::vector<std::uint8_t>& mask);

double trapezoid_area(const RocCurve& curve);

/// Per-class AUC over frame outputs [N, c] with per-class masks; classes
/// without both positives and negatives are reported as skipped. Throws
/// std::runtime_error if every class is skipped.
AucReport macro_auc(const Tensor& outputs, const std::vector<LabelVector>& labels,
                    const std::vector<std::string>& class_names);

}  // namespace toolnet
