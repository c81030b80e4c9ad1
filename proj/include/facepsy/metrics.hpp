#pragma once

// Pooled evaluation metrics; the depressive class is the positive class.

#include <optional>
#include <span>
#include <vector>

namespace facepsy {

// Mann–Whitney U over average ranks, divided by n⁺·n⁻. Missing when only one
// class is present.
std::optional<double> auroc(std::span<const int> y, std::span<const double> s);

struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  // Zero denominators report 0 and raise the matching flag.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

// Predicted positive when s >= threshold.
ClassificationMetrics classification_metrics(std::span<const int> y, std::span<const double> s,
                                             double threshold = 0.5);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// Empirical ROC from (0,0) to (1,1), one vertex per distinct score.
std::vector<RocPoint> roc_curve(std::span<const int> y, std::span<const double> s);

double mean_absolute_error(std::span<const double> truth, std::span<const double> pred);

}  // namespace facepsy
