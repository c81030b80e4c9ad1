#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "facepsy/learn.hpp"
#include "facepsy/metrics.hpp"
#include "support.hpp"

using namespace facepsy;
using namespace facepsy::testing;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

RowMatrix matrix(std::initializer_list<std::initializer_list<double>> rows) {
  RowMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

RowMatrix random_matrix(Rng& rng, std::size_t n, std::size_t p) {
  RowMatrix x(n, p);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = normal(rng);
  return x;
}

// Labels from a noisy linear rule on the first two columns.
std::vector<int> linear_labels(Rng& rng, const RowMatrix& x, double noise = 0.5) {
  std::vector<int> y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) y[i] = x(i, 0) - 0.5 * x(i, 1) + noise * normal(rng) > 0;
  return y;
}

std::vector<double> as_double(std::span<const int> y) { return {y.begin(), y.end()}; }

}  // namespace

TEST_CASE("preprocessor: impute then scale") {
  const auto x = matrix({{1, 5}, {kNaN, 5}, {3, 5}});
  const auto pre = fit_preprocessor(x);
  CHECK(pre.fitted_rows == 3);
  CHECK(pre.mean[0] == doctest::Approx(2.0));
  CHECK(pre.stddev[0] == doctest::Approx(std::sqrt(2.0 / 3.0)));
  const auto z = pre.apply(x);
  CHECK(z(0, 0) == doctest::Approx(-1.2247).epsilon(1e-4));
  CHECK(z(1, 0) == doctest::Approx(0.0));
  CHECK(z(2, 0) == doctest::Approx(1.2247).epsilon(1e-4));
  for (int i = 0; i < 3; ++i) CHECK(z(i, 1) == 0.0);

  const auto all_missing = matrix({{kNaN}, {kNaN}});
  const auto zm = fit_preprocessor(all_missing).apply(all_missing);
  CHECK(zm(0, 0) == 0.0);
  CHECK(zm(1, 0) == 0.0);

  CHECK_THROWS(fit_preprocessor(RowMatrix(0, 3)));
}

TEST_CASE("property: scaled training matrix has zero mean and unit std") {
  Rng rng(12);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = uniform_int(rng, 5, 60), p = uniform_int(rng, 1, 8);
    RowMatrix x = random_matrix(rng, n, p);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        x(i, j) = x(i, j) * (j + 1) * 10 + 100 * j;
        if (uniform(rng) < 0.2 && i > 0) x(i, j) = kNaN;
      }
    const auto z = fit_preprocessor(x).apply(x);
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      const double m = z.col(j).mean();
      const double sd = std::sqrt((z.col(j).array() - m).square().mean());
      CHECK(std::fabs(m) <= 1e-9);
      CHECK(sd == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("smote: segment example and parity") {
  const auto x = matrix({{0, 0}, {1, 1}, {5, 5}, {6, 5}, {5, 6}, {7, 7}});
  const std::vector<int> y = {1, 1, 0, 0, 0, 0};
  const auto r = smote(x, y, 5, 99);
  CHECK(r.synthetic == 2);
  REQUIRE(r.x.rows() == 8);
  CHECK(r.x.topRows(6) == x);
  for (int i = 6; i < 8; ++i) {
    CHECK(r.y[i] == 1);
    CHECK(r.x(i, 0) == doctest::Approx(r.x(i, 1)));
    CHECK(r.x(i, 0) >= 0.0);
    CHECK(r.x(i, 0) < 1.0);
  }
  CHECK(smote(x, y, 5, 99).x == r.x);

  const std::vector<int> bal = {1, 1, 1, 0, 0, 0};
  const auto b = smote(x, bal, 5, 1);
  CHECK(b.synthetic == 0);
  CHECK(b.x == x);
  CHECK(b.y == bal);

  const std::vector<int> one = {1, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(smote(x, one, 5, 1), DataError);
}

TEST_CASE("smote: 14 minority against 30 majority") {
  Rng rng(4);
  const auto x = random_matrix(rng, 44, 6);
  std::vector<int> y(44, 0);
  std::fill(y.begin(), y.begin() + 14, 1);
  const auto r = smote(x, y, 5, 8);
  CHECK(std::count(r.y.begin(), r.y.end(), 1) == 30);
  CHECK(std::count(r.y.begin(), r.y.end(), 0) == 30);
  CHECK(r.synthetic == 16);
}

TEST_CASE("property: every synthetic row lies on a segment between minority rows") {
  Rng rng(31);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = uniform_int(rng, 6, 30), p = uniform_int(rng, 1, 5);
    const auto x = random_matrix(rng, n, p);
    std::vector<int> y(n);
    const std::size_t minority = uniform_int(rng, 2, static_cast<int>(n / 2) - 1);
    for (std::size_t i = 0; i < n; ++i) y[i] = i < minority;
    const auto r = smote(x, y, uniform_int(rng, 1, 7), rng());
    for (Eigen::Index s = n; s < r.x.rows(); ++s) {
      double best = 1e300;
      for (std::size_t a = 0; a < minority; ++a)
        for (std::size_t b = 0; b < minority; ++b) {
          if (a == b) continue;
          const Eigen::VectorXd d = (x.row(b) - x.row(a)).transpose();
          const Eigen::VectorXd v = (r.x.row(s) - x.row(a)).transpose();
          const double l = std::clamp(v.dot(d) / d.squaredNorm(), 0.0, 1.0);
          best = std::min(best, (v - l * d).norm());
        }
      CHECK(best <= 1e-9);
    }
  }
}

TEST_CASE("gini selection: threshold and separating feature") {
  Rng rng(6);
  RowMatrix wide = random_matrix(rng, 40, kDayFeatureCount);
  std::vector<int> y(40);
  for (int i = 0; i < 40; ++i) y[i] = i % 2;
  const auto g = gini_select(wide, y);
  CHECK(g.threshold == 0.00078125);
  CHECK(g.importances.size() == kDayFeatureCount);

  // 20 x 5 toy: column 3 separates the classes, the rest is noise.
  RowMatrix toy = random_matrix(rng, 20, 5);
  std::vector<int> ty(20);
  for (int i = 0; i < 20; ++i) {
    ty[i] = i < 10;
    toy(i, 3) = ty[i] ? 2.0 + uniform(rng) : -2.0 - uniform(rng);
  }
  const auto s = gini_select(toy, ty);
  CHECK(s.importances[3] == doctest::Approx(1.0));
  CHECK(s.selected == std::vector<std::size_t>{3});

  std::vector<int> single(20, 1);
  CHECK_THROWS(gini_select(toy, single));
}

TEST_CASE("gini selection: identical copies pick the lowest index") {
  Rng rng(8);
  RowMatrix x(30, 4);
  std::vector<int> y(30);
  for (int i = 0; i < 30; ++i) {
    const double v = normal(rng);
    x.row(i).setConstant(v);
    y[i] = v + 0.3 * normal(rng) > 0;
  }
  const auto s = gini_select(x, y);
  CHECK(s.selected == std::vector<std::size_t>{0});
  CHECK(s.importances[0] == doctest::Approx(1.0));
}

TEST_CASE("property: importances are non-negative and sum to one") {
  Rng rng(10);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = uniform_int(rng, 10, 80), p = uniform_int(rng, 2, 20);
    const auto x = random_matrix(rng, n, p);
    auto y = linear_labels(rng, x, 1.0);
    y[0] = 0;
    y[1] = 1;
    const auto imp = cart_importances(x, y);
    double sum = 0.0;
    for (double v : imp) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("gbdt: XOR is learned") {
  const auto x = matrix({{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  const std::vector<double> y = {0, 1, 1, 0};
  const Hyperparameters hp{.learning_rate = 0.1, .trees = 50, .max_leaves = 4, .min_samples_leaf = 1};
  const auto m = fit_gbdt(x, y, Task::binary_logistic, hp);
  CHECK(m.initial_score() == 0.0);
  CHECK(m.trees().size() == 50);
  const auto p = m.predict(x);
  for (int i = 0; i < 4; ++i) CHECK((p[i] >= 0.5) == (y[i] == 1.0));
}

TEST_CASE("gbdt: constant regression target") {
  Rng rng(1);
  const auto x = random_matrix(rng, 30, 3);
  const std::vector<double> y(30, 7.5);
  const auto m = fit_gbdt(x, y, Task::l2_regression, {});
  CHECK(m.initial_score() == 7.5);
  const auto p = m.predict(x);
  CHECK(mean_absolute_error(y, p) == 0.0);
}

TEST_CASE("gbdt: single-class logistic target is an error") {
  Rng rng(1);
  const auto x = random_matrix(rng, 10, 2);
  CHECK_THROWS(fit_gbdt(x, std::vector<double>(10, 1.0), Task::binary_logistic, {}));
}

TEST_CASE("gbdt: leaves respect min_samples_leaf and the leaf budget") {
  Rng rng(2);
  const auto x = random_matrix(rng, 200, 5);
  const auto y = as_double(linear_labels(rng, x));
  const Hyperparameters hp{.learning_rate = 0.1, .trees = 20, .max_leaves = 7, .min_samples_leaf = 9};
  const auto m = fit_gbdt(x, y, Task::binary_logistic, hp);
  CHECK(m.trees().size() == 20);
  for (const auto& t : m.trees()) {
    CHECK(t.leaf_count() <= 7);
    for (const auto& nd : t.nodes)
      if (nd.feature < 0) CHECK(nd.samples >= 9);
  }
}

TEST_CASE("property: logistic gradient matches finite differences") {
  Rng rng(13);
  const double h = 1e-5;
  for (int i = 0; i < 500; ++i) {
    const double y = uniform_int(rng, 0, 1);
    const double f = uniform(rng, -8, 8);
    const double fd = (logistic_loss(y, f + h) - logistic_loss(y, f - h)) / (2 * h);
    const double g = logistic_gradient(y, f);
    CHECK(std::fabs(fd - g) <= 1e-6 * std::max(1.0, std::fabs(g)));
  }
}

TEST_CASE("gbdt: staged predictions equal shorter fits") {
  Rng rng(14);
  const auto x = random_matrix(rng, 120, 4);
  const auto y = as_double(linear_labels(rng, x));
  Hyperparameters hp{.learning_rate = 0.1, .trees = 40, .max_leaves = 5, .min_samples_leaf = 5};
  const auto full = fit_gbdt(x, y, Task::binary_logistic, hp);
  const std::vector<std::size_t> stages = {10, 25, 40};
  const auto staged = full.staged_predict(x, stages);
  for (std::size_t s = 0; s < stages.size(); ++s) {
    hp.trees = static_cast<int>(stages[s]);
    const auto shorter = fit_gbdt(x, y, Task::binary_logistic, hp);
    CHECK(shorter.predict(x) == staged[s]);
    CHECK(full.predict(x, stages[s]) == staged[s]);
  }
}

TEST_CASE("gbdt: save and load round-trip") {
  Rng rng(15);
  const auto x = random_matrix(rng, 80, 3);
  const auto y = as_double(linear_labels(rng, x));
  for (Task task : {Task::binary_logistic, Task::l2_regression}) {
    const auto m = fit_gbdt(x, y, task, {.learning_rate = 0.05, .trees = 15, .max_leaves = 6, .min_samples_leaf = 4});
    std::stringstream ss;
    m.save(ss);
    const auto back = GbdtModel::load(ss);
    CHECK(back == m);
    CHECK(back.predict(x) == m.predict(x));
  }
  std::stringstream bad("not a model\n");
  CHECK_THROWS(GbdtModel::load(bad));
}

TEST_CASE("property: fused grower matches the reference grower") {
  Rng rng(16);
  for (int t = 0; t < 60; ++t) {
    const std::size_t n = uniform_int(rng, 10, 150), p = uniform_int(rng, 2, 6);
    RowMatrix x = random_matrix(rng, n, p);
    // Coarse values force ties in the split search.
    if (t % 3 == 0) x = x.array().round();
    const auto y = linear_labels(rng, x);
    const Hyperparameters hp{.learning_rate = uniform(rng, 0.05, 0.3),
                             .trees = uniform_int(rng, 1, 15),
                             .max_leaves = uniform_int(rng, 2, 12),
                             .min_samples_leaf = uniform_int(rng, 1, 6)};
    for (Task task : {Task::binary_logistic, Task::l2_regression}) {
      if (task == Task::binary_logistic && std::set<int>(y.begin(), y.end()).size() < 2) continue;
      CHECK(fit_gbdt(x, as_double(y), task, hp) == fit_gbdt_reference(x, as_double(y), task, hp));
    }
  }
}

TEST_CASE("fused grower matches the reference on a wide row count") {
  Rng rng(17);
  const std::size_t n = 70000;
  const auto x = random_matrix(rng, n, 2);
  const auto y = as_double(linear_labels(rng, x));
  const Hyperparameters hp{.learning_rate = 0.1, .trees = 3, .max_leaves = 8, .min_samples_leaf = 50};
  CHECK(fit_gbdt(x, y, Task::binary_logistic, hp) == fit_gbdt_reference(x, y, Task::binary_logistic, hp));
}

TEST_CASE("stratified folds keep class proportions") {
  Rng rng(18);
  for (int t = 0; t < 20; ++t) {
    const int n = uniform_int(rng, 9, 80);
    std::vector<int> y(n);
    for (auto& v : y) v = uniform(rng) < 0.3;
    const auto f = stratified_folds(y, 3, rng());
    for (int cls = 0; cls < 2; ++cls) {
      std::array<int, 3> c{};
      for (int i = 0; i < n; ++i)
        if (y[i] == cls) ++c[f[i]];
      CHECK(*std::max_element(c.begin(), c.end()) - *std::min_element(c.begin(), c.end()) <= 1);
    }
  }
}

TEST_CASE("derive_seed separates streams") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t m = 0; m < 20; ++m)
    for (std::uint64_t s = 0; s < 50; ++s) seen.insert(derive_seed(m, s));
  CHECK(seen.size() == 1000);
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
}

TEST_CASE("grid: order, single candidate and tie-break") {
  Grid g;
  const auto c = g.candidates();
  REQUIRE(c.size() == 16);
  CHECK(c.front() == Hyperparameters{0.05, 100, 15, 5});
  CHECK(c[1] == Hyperparameters{0.05, 100, 15, 20});
  CHECK(c.back() == Hyperparameters{0.1, 200, 31, 20});

  Rng rng(19);
  RowMatrix x = random_matrix(rng, 60, 3);
  std::vector<int> y(60);
  for (int i = 0; i < 60; ++i) {
    y[i] = i % 2;
    x(i, 0) = y[i] ? 3.0 + uniform(rng) : -3.0 - uniform(rng);
  }
  const auto yd = as_double(y);
  const Hyperparameters only{0.1, 10, 4, 3};
  const auto single = grid_search(x, yd, y, Task::binary_logistic, Grid::single(only), {}, 1);
  CHECK(single.best == only);
  CHECK_FALSE(single.cross_validated);

  Grid tie;
  tie.learning_rate = {0.1};
  tie.trees = {10};
  tie.max_leaves = {2, 3};
  tie.min_samples_leaf = {3};
  const auto r = grid_search(x, yd, y, Task::binary_logistic, tie, {}, 1);
  CHECK(r.cross_validated);
  REQUIRE(r.candidates.size() == 2);
  CHECK(r.candidates[0].score == doctest::Approx(1.0));
  CHECK(r.candidates[1].score == doctest::Approx(1.0));
  CHECK(r.best.max_leaves == 2);

  Grid dup = tie;
  dup.max_leaves = {3, 3};
  CHECK(grid_search(x, yd, y, Task::binary_logistic, dup, {}, 1).best == Hyperparameters{0.1, 10, 3, 3});
}

TEST_CASE("grid: every candidate skipped is a data error") {
  Rng rng(20);
  const auto x = random_matrix(rng, 10, 2);
  std::vector<int> y(10, 0);
  y[0] = 1;
  Grid g;
  g.learning_rate = {0.1};
  g.trees = {5};
  g.max_leaves = {2, 3};
  g.min_samples_leaf = {1};
  CHECK_THROWS_AS(grid_search(x, as_double(y), y, Task::binary_logistic, g, {.enabled = false, .k = 5}, 1), DataError);
}

TEST_CASE("grid: planted cohort reaches inner AUROC of at least 0.7") {
  const auto& ds = small_dataset();
  std::vector<std::size_t> cols;
  for (std::size_t f = 0; f < kDayFeatureCount; ++f)
    if (channel_of_feature(f) < kStaticChannels) cols.push_back(f);
  RowMatrix x(ds.size(), cols.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) x(i, j) = ds.static_features(i, cols[j]);
  std::vector<int> y;
  for (const auto& in : ds.instances) y.push_back(in.label);
  Grid g;
  g.learning_rate = {0.1};
  g.trees = {50};
  g.max_leaves = {7, 15};
  g.min_samples_leaf = {5};
  const auto r = grid_search(x, as_double(y), y, Task::binary_logistic, g, {}, 5);
  CHECK(r.cross_validated);
  CHECK(r.best_score >= 0.7);
}

TEST_CASE("pipeline: fixed seed gives identical predictions") {
  Rng rng(21);
  auto x = random_matrix(rng, 50, 4);
  x(3, 2) = kNaN;
  auto y = linear_labels(rng, x);
  for (int i = 0; i < 15; ++i) y[i] = 1;
  for (int i = 15; i < 50; ++i) y[i] = i % 5 == 0;
  const auto yd = as_double(y);
  const Hyperparameters hp{0.1, 20, 5, 3};
  const auto a = fit_pipeline(x, yd, y, Task::binary_logistic, hp, {}, 42);
  const auto b = fit_pipeline(x, yd, y, Task::binary_logistic, hp, {}, 42);
  CHECK(a.smote_rows > 0);
  CHECK(a.model == b.model);
  CHECK(a.predict(x) == b.predict(x));
}
