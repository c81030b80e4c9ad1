#include "facepsy/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "facepsy/common.hpp"

namespace facepsy {

std::optional<double> auroc(std::span<const int> y, std::span<const double> s) {
  if (y.size() != s.size()) throw InvariantError("auroc: length mismatch");
  const std::size_t n = y.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });
  // Ranks are kept doubled so tied averages stay integral.
  double pos_rank2 = 0.0;
  std::size_t npos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && s[order[j]] == s[order[i]]) ++j;
    const double avg2 = static_cast<double>(i + 1 + j);  // 2 × mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t)
      if (y[order[t]]) {
        pos_rank2 += avg2;
        ++npos;
      }
    i = j;
  }
  const std::size_t nneg = n - npos;
  if (npos == 0 || nneg == 0) return std::nullopt;
  const double u2 = pos_rank2 - static_cast<double>(npos) * static_cast<double>(npos + 1);
  return (u2 / 2.0) / (static_cast<double>(npos) * static_cast<double>(nneg));
}

std::vector<RocPoint> roc_curve(std::span<const int> y, std::span<const double> s) {
  if (y.size() != s.size()) throw InvariantError("roc_curve: length mismatch");
  const std::size_t n = y.size();
  const auto npos = static_cast<std::size_t>(std::count_if(y.begin(), y.end(), [](int v) { return v != 0; }));
  const std::size_t nneg = n - npos;
  if (npos == 0 || nneg == 0) throw DataError("roc_curve needs both classes");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  std::vector<RocPoint> out{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    for (; j < n && s[order[j]] == s[order[i]]; ++j) (y[order[j]] ? tp : fp) += 1;
    out.push_back({static_cast<double>(fp) / static_cast<double>(nneg), static_cast<double>(tp) / static_cast<double>(npos)});
    i = j;
  }
  return out;
}

ClassificationMetrics classification_metrics(std::span<const int> y, std::span<const double> s, double threshold) {
  if (y.size() != s.size()) throw InvariantError("classification_metrics: length mismatch");
  ClassificationMetrics m;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool pred = s[i] >= threshold;
    if (y[i]) pred ? ++m.tp : ++m.fn;
    else pred ? ++m.fp : ++m.tn;
  }
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  if (!y.empty()) m.accuracy = d(m.tp + m.tn) / d(y.size());
  if (m.tp + m.fp) m.precision = d(m.tp) / d(m.tp + m.fp);
  else m.precision_undefined = true;
  if (m.tp + m.fn) m.recall = d(m.tp) / d(m.tp + m.fn);
  else m.recall_undefined = true;
  if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  else m.f1_undefined = true;
  return m;
}

double mean_absolute_error(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size()) throw InvariantError("mae: length mismatch");
  if (truth.empty()) return kMissing;
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) s += std::fabs(truth[i] - pred[i]);
  return s / static_cast<double>(truth.size());
}

}  // namespace facepsy
