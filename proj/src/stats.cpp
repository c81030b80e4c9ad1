#include "facepsy/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace facepsy {

namespace {

// std::lgamma may write the global signgam; the reentrant variant is used
// where available because screening runs column-parallel.
double log_gamma(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw InvariantError("incomplete_beta requires a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front =
      std::exp(log_gamma(a + b) - log_gamma(a) - log_gamma(b) + a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double t_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw InvariantError("t_cdf requires dof > 0");
  if (std::isnan(t)) return kMissing;
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
  return t >= 0.0 ? 1.0 - tail : tail;
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvariantError("pearson: length mismatch");
  Correlation c;
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (is_missing(x[i]) || is_missing(y[i])) continue;
    sx += x[i];
    sy += y[i];
    ++n;
  }
  c.n = n;
  if (n < 3) return c;
  const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (is_missing(x[i]) || is_missing(y[i])) continue;
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return c;
  c.defined = true;
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double dof = static_cast<double>(n - 2);
  const double r2 = c.r * c.r;
  if (r2 >= 1.0) {
    c.p = 0.0;
  } else {
    const double t2 = r2 * dof / (1.0 - r2);
    c.p = incomplete_beta(0.5 * dof, 0.5, dof / (dof + t2));
  }
  return c;
}

namespace {

void group_stats(std::span<const double> col, std::span<const int> labels, FeatureScreenRow& row) {
  double s[2] = {0, 0}, ss[2] = {0, 0};
  std::size_t n[2] = {0, 0};
  for (std::size_t i = 0; i < col.size(); ++i) {
    if (is_missing(col[i])) continue;
    const int g = labels[i] ? 1 : 0;
    s[g] += col[i];
    ++n[g];
  }
  double m[2];
  for (int g = 0; g < 2; ++g) m[g] = n[g] ? s[g] / static_cast<double>(n[g]) : kMissing;
  for (std::size_t i = 0; i < col.size(); ++i) {
    if (is_missing(col[i])) continue;
    const int g = labels[i] ? 1 : 0;
    ss[g] += (col[i] - m[g]) * (col[i] - m[g]);
  }
  row.dep_mean = m[1];
  row.non_mean = m[0];
  row.dep_sd = n[1] ? std::sqrt(ss[1] / static_cast<double>(n[1])) : kMissing;
  row.non_sd = n[0] ? std::sqrt(ss[0] / static_cast<double>(n[0])) : kMissing;
}

}  // namespace

ScreenResult screen_features(const RowMatrix& x, std::span<const int> labels, std::span<const std::string> names,
                             const ScreenOptions& opt) {
  const auto cols = static_cast<std::size_t>(x.cols());
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw InvariantError("screen: label count mismatch");
  if (names.size() != cols) throw InvariantError("screen: name count mismatch");
  std::vector<double> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] ? 1.0 : 0.0;

  std::vector<Correlation> corr(cols);
  std::vector<FeatureScreenRow> rows(cols);
  auto one = [&](std::size_t j) {
    std::vector<double> col(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) col[i] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    corr[j] = pearson(col, y);
    auto& row = rows[j];
    row.feature = names[j];
    row.column = j;
    row.r = corr[j].r;
    row.p = corr[j].p;
    row.n = corr[j].n;
    group_stats(col, labels, row);
  };
  if (opt.exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (std::size_t j = 0; j < cols; ++j) one(j);
  } else {
    for (std::size_t j = 0; j < cols; ++j) one(j);
  }

  ScreenResult res;
  for (std::size_t j = 0; j < cols; ++j) {
    if (!corr[j].defined) {
      ++res.undefined;
      continue;
    }
    if (corr[j].p >= opt.alpha) continue;
    ++res.total_significant;
    if (std::fabs(corr[j].r) >= opt.r_min) res.rows.push_back(std::move(rows[j]));
  }
  std::sort(res.rows.begin(), res.rows.end(), [](const auto& a, const auto& b) {
    const double ra = std::fabs(a.r), rb = std::fabs(b.r);
    if (ra != rb) return ra > rb;
    return a.feature < b.feature;
  });
  return res;
}

namespace {

std::string trimmed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

}  // namespace

std::string format_screen_row(const FeatureScreenRow& row) {
  char r[32];
  std::snprintf(r, sizeof r, "%.2f", row.r);
  return row.feature + ", r " + r + ", dep " + trimmed(row.dep_mean) + " (" + trimmed(row.dep_sd) + "), non-dep " +
         trimmed(row.non_mean) + " (" + trimmed(row.non_sd) + ")";
}

void write_screen_csv(const std::filesystem::path& path, const ScreenResult& res) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "feature,p_value,r_value,depressive_mean,depressive_sd,non_depressive_mean,non_depressive_sd,n\n";
  for (const auto& r : res.rows)
    out << r.feature << ',' << format_double(r.p) << ',' << format_double(r.r) << ',' << format_double(r.dep_mean)
        << ',' << format_double(r.dep_sd) << ',' << format_double(r.non_mean) << ',' << format_double(r.non_sd)
        << ',' << r.n << '\n';
}

}  // namespace facepsy
