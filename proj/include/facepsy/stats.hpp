#pragma once

// Correlation screening of day features against the episode label.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "facepsy/geometry.hpp"

namespace facepsy {

enum class Execution { serial, parallel };

// Regularised incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

// Student-t cumulative distribution.
double t_cdf(double t, double dof);

struct Correlation {
  bool defined = false;  // false for n < 3 or a constant column
  double r = 0.0;
  double p = 1.0;  // two-sided
  std::size_t n = 0;  // pairwise-complete count
};

// Product-moment r over pairwise-complete entries (NaN = missing) with a
// two-sided p-value from Student-t on n−2 degrees of freedom.
Correlation pearson(std::span<const double> x, std::span<const double> y);

struct FeatureScreenRow {
  std::string feature;
  std::size_t column = 0;
  double r = 0.0;
  double p = 1.0;
  std::size_t n = 0;
  double dep_mean = 0.0, dep_sd = 0.0;  // population SD
  double non_mean = 0.0, non_sd = 0.0;
};

struct ScreenResult {
  std::vector<FeatureScreenRow> rows;  // p < alpha and |r| >= r_min, by |r| desc then name
  std::size_t total_significant = 0;  // p < alpha before the |r| cut
  std::size_t undefined = 0;
};

struct ScreenOptions {
  double alpha = 0.05;
  double r_min = 0.20;
  Execution exec = Execution::parallel;
};

ScreenResult screen_features(const RowMatrix& x, std::span<const int> labels, std::span<const std::string> names,
                             const ScreenOptions& opt = {});

// "ear_right_sum_morning, r 0.35, dep 23.34 (28.87), non-dep 8.26 (11.1)"
std::string format_screen_row(const FeatureScreenRow& row);

// feature,p_value,r_value,depressive_mean,depressive_sd,non_depressive_mean,non_depressive_sd,n
void write_screen_csv(const std::filesystem::path& path, const ScreenResult& res);

}  // namespace facepsy
