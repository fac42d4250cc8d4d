#include "toolnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace toolnet {

namespace {

void apply_mask(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels,
                const std::vector<std::uint8_t>& mask, std::vector<double>& s_out,
                std::vector<std::uint8_t>& l_out) {
  if (scores.size() != labels.size() || (!mask.empty() && mask.size() != scores.size())) {
    throw std::invalid_argument("auc: scores, labels and mask lengths differ");
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    s_out.push_back(scores[i]);
    l_out.push_back(labels[i] ? 1 : 0);
  }
}

}  // namespace

std::optional<double> auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels,
                          const std::vector<std::uint8_t>& mask) {
  std::vector<double> s;
  std::vector<std::uint8_t> l;
  apply_mask(scores, labels, mask, s, l);

  std::size_t pos = std::accumulate(l.begin(), l.end(), std::size_t{0});
  std::size_t neg = l.size() - pos;
  if (pos == 0 || neg == 0) return std::nullopt;

  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });

  // Midranks, then the Mann-Whitney U statistic from the positive rank sum.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && s[order[j]] == s[order[i]]) ++j;
    double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t t = i; t < j; ++t) {
      if (l[order[t]]) rank_sum_pos += midrank;
    }
    i = j;
  }
  double u = rank_sum_pos - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels,
                   const std::vector<std::uint8_t>& mask) {
  std::vector<double> s;
  std::vector<std::uint8_t> l;
  apply_mask(scores, labels, mask, s, l);

  std::size_t pos = std::accumulate(l.begin(), l.end(), std::size_t{0});
  std::size_t neg = l.size() - pos;
  if (pos == 0 || neg == 0) {
    throw std::invalid_argument("roc_curve: need at least one positive and one negative after masking");
  }

  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });

  RocCurve curve;
  curve.fpr.push_back(0.0);
  curve.tpr.push_back(0.0);
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    double thr = s[order[i]];
    std::size_t j = i;
    while (j < order.size() && s[order[j]] == thr) {
      if (l[order[j]]) ++tp;
      else ++fp;
      ++j;
    }
    curve.thresholds.push_back(thr);
    curve.fpr.push_back(static_cast<double>(fp) / static_cast<double>(neg));
    curve.tpr.push_back(static_cast<double>(tp) / static_cast<double>(pos));
    i = j;
  }
  return curve;
}

double trapezoid_area(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.fpr.size(); ++i) {
    area += 0.5 * (curve.fpr[i] - curve.fpr[i - 1]) * (curve.tpr[i] + curve.tpr[i - 1]);
  }
  return area;
}

AucReport macro_auc(const Tensor& outputs, const std::vector<LabelVector>& labels,
                    const std::vector<std::string>& class_names) {
  if (outputs.ndim() != 2) throw std::invalid_argument("macro_auc: expected [N,c] outputs");
  std::size_t n = outputs.shape()[0];
  std::size_t c = outputs.shape()[1];
  if (labels.size() != n) throw std::invalid_argument("macro_auc: label count does not match outputs");
  if (class_names.size() != c) throw std::invalid_argument("macro_auc: class name count does not match outputs");

  AucReport report;
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t cls = 0; cls < c; ++cls) {
    std::vector<double> scores(n);
    std::vector<std::uint8_t> lab(n), mask(n);
    std::size_t pos = 0, neg = 0;
    for (std::size_t f = 0; f < n; ++f) {
      scores[f] = outputs[f * c + cls];
      lab[f] = labels[f].present[cls];
      mask[f] = labels[f].evaluate[cls];
      if (mask[f]) {
        if (lab[f]) ++pos;
        else ++neg;
      }
    }
    ClassAuc ca;
    ca.name = class_names[cls];
    ca.positives = pos;
    ca.negatives = neg;
    ca.auc = auc(scores, lab, mask);
    if (ca.auc) {
      sum += *ca.auc;
      ++counted;
    } else {
      ca.skip_reason = pos == 0 ? "no positive examples" : "no negative examples";
    }
    report.per_class.push_back(std::move(ca));
  }
  if (counted == 0) throw std::runtime_error("macro_auc: every class was skipped");
  report.macro_auc = sum / static_cast<double>(counted);
  return report;
}

std::string AucReport::to_table() const {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  std::size_t width = 8;
  for (const auto& ca : per_class) width = std::max(width, ca.name.size());
  os << "Average";
  os << std::string(width - 7, ' ') << "  " << macro_auc << '\n';
  for (const auto& ca : per_class) {
    os << ca.name << std::string(width - ca.name.size(), ' ') << "  ";
    if (ca.auc) {
      os << *ca.auc;
    } else {
      os << "skipped (" << ca.skip_reason << ")";
    }
    os << '\n';
  }
  return os.str();
}

std::string AucReport::to_csv() const {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(6);
  os << "tool,auc\n";
  os << "average," << macro_auc << '\n';
  for (const auto& ca : per_class) {
    os << ca.name << ',';
    if (ca.auc) os << *ca.auc;
    else os << "skipped";
    os << '\n';
  }
  return os.str();
}

}  // namespace toolnet
