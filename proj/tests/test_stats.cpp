#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "facepsy/stats.hpp"
#include "support.hpp"

using namespace facepsy;
using namespace facepsy::testing;

namespace {

// Composite Simpson on the Student-t density, from 0 to t.
double t_cdf_quadrature(double t, double dof) {
  const double c = std::exp(std::lgamma(0.5 * (dof + 1)) - std::lgamma(0.5 * dof)) / std::sqrt(dof * std::numbers::pi);
  const auto f = [&](double x) { return c * std::pow(1.0 + x * x / dof, -0.5 * (dof + 1)); };
  const int n = 20000;
  const double h = t / n;
  double s = f(0) + f(t);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return 0.5 + s * h / 3.0;
}

std::vector<std::string> column_names(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back("c" + std::to_string(1000 + i));
  return v;
}

RowMatrix noise_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  RowMatrix x(rows, cols);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = normal(rng);
  return x;
}

}  // namespace

TEST_CASE("pearson oracles") {
  const std::vector<double> y01 = {0, 1, 1, 0, 1, 0, 0, 1};
  const auto same = pearson(y01, y01);
  CHECK(same.defined);
  CHECK(same.r == doctest::Approx(1.0));
  CHECK(same.p < 1e-12);

  const std::vector<double> xo = {1, -1, 1, -1}, yo = {1, 1, 0, 0};
  CHECK(pearson(xo, yo).r == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(pearson(xo, yo).p == doctest::Approx(1.0));

  const std::vector<double> x = {1, 2, 3, 4, 5, 6}, y = {0, 0, 0, 1, 1, 1};
  const auto c = pearson(x, y);
  // cov 4.5 / sqrt(17.5 * 1.5)
  CHECK(c.r == doctest::Approx(4.5 / std::sqrt(26.25)).epsilon(1e-12));
  CHECK(c.r == doctest::Approx(0.87831).epsilon(1e-5));
  CHECK(c.n == 6);

  const std::vector<double> k = {2, 2, 2, 2, 2, 2};
  CHECK_FALSE(pearson(k, y).defined);
  CHECK_FALSE(pearson(std::vector<double>{1, 2}, std::vector<double>{0, 1}).defined);
}

TEST_CASE("pearson uses pairwise-complete entries") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> x = {1, nan, 2, 3, 4, 5, 6}, y = {0, 1, 0, 0, 1, 1, 1};
  const auto c = pearson(x, y);
  CHECK(c.n == 6);
  CHECK(c.r == doctest::Approx(0.87831).epsilon(1e-5));
}

TEST_CASE("t_cdf") {
  for (double dof : {1.0, 2.0, 7.0, 30.0}) CHECK(t_cdf(0.0, dof) == 0.5);
  CHECK(t_cdf(1.0, 10.0) == doctest::Approx(0.82955).epsilon(1e-5));
  CHECK(t_cdf(1e300, 5.0) == doctest::Approx(1.0));
  CHECK(t_cdf(std::numeric_limits<double>::infinity(), 5.0) == 1.0);
  CHECK(t_cdf(-1.0, 10.0) == doctest::Approx(1.0 - 0.82955).epsilon(1e-5));
  CHECK(t_cdf(1.0, 1.0) == doctest::Approx(0.75));
}

TEST_CASE("t_cdf against numeric integration") {
  Rng rng(3);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double dof = uniform_int(rng, 1, 60);
    const double t = uniform(rng, -6.0, 6.0);
    worst = std::max(worst, std::fabs(t_cdf(t, dof) - t_cdf_quadrature(t, dof)));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("property: pearson is affine invariant up to sign") {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const int n = uniform_int(rng, 5, 40);
    std::vector<double> x(n), y(n), z(n);
    for (int i = 0; i < n; ++i) {
      x[i] = normal(rng);
      y[i] = 0.5 * x[i] + normal(rng);
    }
    const double a = uniform(rng, 0.1, 10.0) * (t % 2 ? -1.0 : 1.0), b = uniform(rng, -50, 50);
    for (int i = 0; i < n; ++i) z[i] = a * x[i] + b;
    const auto c0 = pearson(x, y), c1 = pearson(z, y);
    CHECK(c1.r == doctest::Approx(a > 0 ? c0.r : -c0.r).epsilon(1e-10));
    CHECK(c1.p == doctest::Approx(c0.p).epsilon(1e-8));
  }
}

TEST_CASE("property: p decreases with |r| at fixed n") {
  const int n = 30;
  std::vector<double> x(n), y(n);
  Rng rng(9);
  for (int i = 0; i < n; ++i) x[i] = normal(rng);
  std::vector<std::pair<double, double>> rp;
  for (double w = 0.0; w <= 3.0; w += 0.1) {
    Rng noise(17);
    for (int i = 0; i < n; ++i) y[i] = w * x[i] + normal(noise);
    const auto c = pearson(x, y);
    rp.emplace_back(std::fabs(c.r), c.p);
  }
  std::sort(rp.begin(), rp.end());
  for (std::size_t i = 1; i < rp.size(); ++i)
    if (rp[i].first > rp[i - 1].first) CHECK(rp[i].second <= rp[i - 1].second);
}

TEST_CASE("screening on noise: binomial count and determinism") {
  Rng rng(2024);
  const std::size_t n = 200, f = kDayFeatureCount;
  const RowMatrix x = noise_matrix(rng, n, f);
  std::vector<int> y(n);
  for (auto& v : y) v = uniform(rng) < 0.35;
  const auto names = column_names(f);

  const auto par = screen_features(x, y, names, {.alpha = 0.05, .r_min = 0.2, .exec = Execution::parallel});
  const auto ser = screen_features(x, y, names, {.alpha = 0.05, .r_min = 0.2, .exec = Execution::serial});
  const double mu = 0.05 * f, sigma = std::sqrt(f * 0.05 * 0.95);
  CHECK(std::fabs(static_cast<double>(par.total_significant) - mu) <= 3 * sigma);
  CHECK(par.undefined == 0);

  REQUIRE(par.rows.size() == ser.rows.size());
  CHECK(par.total_significant == ser.total_significant);
  for (std::size_t i = 0; i < par.rows.size(); ++i) {
    CHECK(par.rows[i].feature == ser.rows[i].feature);
    CHECK(par.rows[i].r == ser.rows[i].r);
    CHECK(par.rows[i].p == ser.rows[i].p);
  }

  // Row shuffle leaves the screen unchanged.
  std::vector<Eigen::Index> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  RowMatrix xs(n, f);
  std::vector<int> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs.row(i) = x.row(perm[i]);
    ys[i] = y[perm[i]];
  }
  const auto shuf = screen_features(xs, ys, names, {.alpha = 0.05, .r_min = 0.2, .exec = Execution::parallel});
  REQUIRE(shuf.rows.size() == par.rows.size());
  CHECK(shuf.total_significant == par.total_significant);
  for (std::size_t i = 0; i < par.rows.size(); ++i) {
    CHECK(shuf.rows[i].feature == par.rows[i].feature);
    CHECK(shuf.rows[i].r == doctest::Approx(par.rows[i].r).epsilon(1e-12));
  }
}

TEST_CASE("screen rows: filter, order and group statistics") {
  // Column 0 tracks the label; column 1 tracks it with opposite sign and
  // equal strength; column 2 is weak; column 3 is constant.
  const std::vector<int> y = {1, 1, 1, 1, 0, 0, 0, 0, 0, 0};
  RowMatrix x(10, 4);
  for (int i = 0; i < 10; ++i) {
    x(i, 0) = y[i] * 2.0 + (i % 3) * 0.1;
    x(i, 1) = -x(i, 0);
    x(i, 2) = (i % 2);
    x(i, 3) = 4.0;
  }
  const std::vector<std::string> names = {"b_feature", "a_feature", "c", "d"};
  const auto s = screen_features(x, y, names);
  REQUIRE(s.rows.size() == 2);
  CHECK(s.rows[0].feature == "a_feature");
  CHECK(s.rows[1].feature == "b_feature");
  CHECK(s.rows[0].r == doctest::Approx(-s.rows[1].r));
  CHECK(s.undefined == 1);
  const auto& b = s.rows[1];
  CHECK(b.column == 0);
  CHECK(b.n == 10);
  CHECK(b.dep_mean == doctest::Approx((2.0 + 2.1 + 2.2 + 2.0) / 4));
  CHECK(b.non_mean == doctest::Approx((0.1 + 0.2 + 0.0 + 0.1 + 0.2 + 0.0) / 6));
  const double m = b.dep_mean;
  const double var = (std::pow(2.0 - m, 2) * 2 + std::pow(2.1 - m, 2) + std::pow(2.2 - m, 2)) / 4;
  CHECK(b.dep_sd == doctest::Approx(std::sqrt(var)));
}

TEST_CASE("screen row formatting") {
  FeatureScreenRow r;
  r.feature = "ear_right_sum_morning";
  r.r = 0.35;
  r.dep_mean = 23.34;
  r.dep_sd = 28.87;
  r.non_mean = 8.26;
  r.non_sd = 11.1;
  CHECK(format_screen_row(r) == "ear_right_sum_morning, r 0.35, dep 23.34 (28.87), non-dep 8.26 (11.1)");
  r.r = -0.2049;
  r.dep_mean = 3;
  r.non_sd = 0.001;
  CHECK(format_screen_row(r) == "ear_right_sum_morning, r -0.20, dep 3 (28.87), non-dep 8.26 (0)");
}

TEST_CASE("one planted channel: its morning sum ranks first") {
  // The smile channel is reported on every morning frame of a depressive day
  // but only on every other frame otherwise; every other channel is always
  // present with label-independent values.
  Rng rng(77);
  const std::size_t smile = kAuCount;
  const LocalDate d0 = LocalDate::parse("2024-02-05");
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int p = 0; p < 6; ++p) {
    std::vector<FrameRecord> frames;
    std::vector<int> day_label;
    const std::string pid = "P" + std::to_string(p);
    for (int d = 0; d < 20; ++d) {
      const int label = uniform(rng) < 0.4;
      day_label.push_back(label);
      for (int s = 0; s < 2; ++s) {
        const auto sid = pid + "-" + std::to_string(d) + "-" + std::to_string(s);
        const std::int64_t t0 = at(d0 + d, 8 + 2 * s, uniform_int(rng, 0, 59));
        for (int k = 0; k < 10; ++k) {
          auto f = make_frame(rng, pid, sid, t0 + 400 * k);
          if (!label && k % 2) f.smile_prob.reset();
          frames.push_back(std::move(f));
        }
        auto g = make_frame(rng, pid, sid + "e", at(d0 + d, 19, 0));
        frames.push_back(std::move(g));
      }
    }
    const auto t = prepare_frames(frames);
    REQUIRE(t.days.size() == 20);
    for (std::size_t d = 0; d < t.days.size(); ++d) {
      rows.push_back(static_day_features(t, d));
      y.push_back(day_label[d]);
    }
  }
  RowMatrix x(rows.size(), kDayFeatureCount);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < kDayFeatureCount; ++j) x(i, j) = rows[i][j];
  const auto s = screen_features(x, y, feature_names());
  REQUIRE_FALSE(s.rows.empty());
  CHECK(s.rows[0].feature == feature_names()[feature_index(Epoch::morning, smile, Stat::sum)]);
  CHECK(s.rows[0].r > 0.8);
  // IVA columns are NaN in static rows and count as undefined.
  CHECK(s.undefined >= 640);
}

TEST_CASE("screen CSV header") {
  TempDir dir("screen");
  ScreenResult res;
  FeatureScreenRow r;
  r.feature = "x";
  r.n = 3;
  res.rows.push_back(r);
  write_screen_csv(dir.path / "s.csv", res);
  std::ifstream in(dir.path / "s.csv");
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  CHECK(header == "feature,p_value,r_value,depressive_mean,depressive_sd,non_depressive_mean,non_depressive_sd,n");
  CHECK(line.rfind("x,", 0) == 0);
  CHECK(line.substr(line.size() - 2) == ",3");
}
