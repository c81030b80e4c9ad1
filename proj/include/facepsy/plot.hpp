#pragma once

// Small self-contained SVG renderings of ROC and minimum-days curves.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "facepsy/eval.hpp"
#include "facepsy/metrics.hpp"

namespace facepsy {

struct RocSeries {
  std::string label;
  std::vector<RocPoint> points;
  std::optional<double> auroc;
};

std::string roc_svg(std::span<const RocSeries> series, std::string_view title);

// Missing points break the line and are marked on the axis.
std::string min_days_svg(const MinDaysCurve& curve, std::string_view title);

}  // namespace facepsy
