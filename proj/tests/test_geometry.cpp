#include <doctest.h>

#include <numbers>
#include <sstream>

#include <Eigen/SVD>

#include "facepsy/geometry.hpp"
#include "support.hpp"

using namespace facepsy;
using namespace facepsy::testing;
using std::numbers::pi;

namespace {

std::vector<Point> circle16() {
  std::vector<Point> c;
  for (int k = 0; k < 16; ++k) c.push_back({std::cos(2 * pi * k / 16), std::sin(2 * pi * k / 16)});
  return c;
}

struct Similarity {
  double s, c, sn, tx, ty;
  Point operator()(Point p) const { return {s * (c * p.x - sn * p.y) + tx, s * (sn * p.x + c * p.y) + ty}; }
};

Similarity random_similarity(Rng& rng) {
  const double th = uniform(rng, -pi, pi);
  return {std::exp(uniform(rng, std::log(0.1), std::log(10.0))), std::cos(th), std::sin(th), uniform(rng, -500, 500),
          uniform(rng, -500, 500)};
}

// Landmarks parked away from the origin, nose_bottom on it.
std::vector<Point> centred_landmarks() {
  std::vector<Point> pts(kLandmarkCount, Point{7.0, 3.0});
  const auto& nb = LandmarkMap::standard().region("nose_bottom");
  for (std::size_t i = nb.begin; i < nb.end(); ++i) pts[i] = {0.0, 0.0};
  return pts;
}

double single_angle(Point a, Point b, bool raw) {
  auto pts = centred_landmarks();
  pts[0] = a;
  pts[50] = b;
  const std::vector<std::pair<int, int>> pair = {{0, 50}};
  const auto pl = build_pair_list(LandmarkMap::standard(), pair);
  return (raw ? compute_iva_raw(pts, pl) : compute_iva(pts, pl))[0];
}

RowMatrix random_matrix(Rng& rng, Eigen::Index n, Eigen::Index d) {
  RowMatrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = normal(rng);
  return x;
}

double residual(const PcaModel& m, const RowMatrix& x) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd c = x.row(i).transpose() - m.mean();
    const Eigen::VectorXd s = m.components() * c;
    total += (c - m.components().transpose() * s).squaredNorm();
  }
  return total;
}

}  // namespace

TEST_CASE("EAR oracles") {
  // closed eye: upper and lower arcs coincide on the x-axis
  std::vector<Point> flat;
  for (const auto& p : circle16()) flat.push_back({p.x, 0.0});
  for (int k = 9; k < 16; ++k) flat[k] = flat[16 - k];
  CHECK(*compute_ear(flat) == 0.0);
  CHECK(*compute_ear(circle16()) == doctest::Approx(0.92388).epsilon(1e-5));
  auto scaled = circle16();
  for (auto& p : scaled) p = {3 * p.x, 3 * p.y};
  CHECK(std::fabs(*compute_ear(scaled) - *compute_ear(circle16())) <= 1e-12);
  std::vector<Point> degenerate(16, Point{1.0, 1.0});
  CHECK_FALSE(compute_ear(degenerate).has_value());
}

TEST_CASE("default pair list matches a brute-force enumeration") {
  const auto& m = LandmarkMap::standard();
  const auto pl = build_pair_list(m);
  CHECK(pl.size() == 6464);
  std::size_t count = 0;
  for (std::size_t a = 0; a < 133; ++a)
    for (std::size_t b = a + 1; b < 133; ++b)
      if (m.macro_of(a) != MacroRegion::nose && m.macro_of(b) != MacroRegion::nose && m.macro_of(a) != m.macro_of(b))
        ++count;
  CHECK(count == pl.size());
  CHECK(std::is_sorted(pl.pairs.begin(), pl.pairs.end()));
  CHECK(std::adjacent_find(pl.pairs.begin(), pl.pairs.end()) == pl.pairs.end());
  for (auto [a, b] : pl.pairs) {
    CHECK(a < b);
    CHECK(m.macro_of(static_cast<std::size_t>(a)) != m.macro_of(static_cast<std::size_t>(b)));
  }
}

TEST_CASE("explicit pair lists pass through or are rejected") {
  const auto& m = LandmarkMap::standard();
  const std::vector<std::pair<int, int>> ok = {{0, 50}, {0, 60}};
  CHECK(build_pair_list(m, ok).pairs == ok);
  const auto nb = static_cast<int>(m.region("nose_bottom").begin);
  const std::vector<std::pair<int, int>> nose = {{nb, nb + 1}};
  CHECK_THROWS_AS(build_pair_list(m, nose), DataError);
  const std::vector<std::pair<int, int>> range = {{0, 133}};
  CHECK_THROWS_AS(build_pair_list(m, range), DataError);
}

TEST_CASE("IVA oracles, both kernels") {
  for (bool raw : {true, false}) {
    CHECK(single_angle({1, 0}, {0, 1}, raw) == doctest::Approx(pi / 2).epsilon(1e-12));
    CHECK(single_angle({2, 0}, {5, 0}, raw) == doctest::Approx(0.0));
    CHECK(single_angle({1, 0}, {-1, 1}, raw) == doctest::Approx(3 * pi / 4).epsilon(1e-12));
    CHECK(std::isnan(single_angle({0, 0}, {1, 1}, raw)));
  }
}

TEST_CASE("bearing kernel agrees with the arccos reference") {
  Rng rng(21);
  const auto pl = build_pair_list(LandmarkMap::standard());
  for (int t = 0; t < 20; ++t) {
    const auto pts = t % 2 ? random_face(rng) : random_points(rng);
    const auto a = compute_iva_raw(pts, pl);
    const auto b = compute_iva(pts, pl);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(b[i] >= 0.0);
      CHECK(b[i] <= pi);
      // arccos itself is only good to ~1e-8 near 0 and pi
      CHECK(std::fabs(a[i] - b[i]) <= 1e-7);
    }
  }
}

TEST_CASE("property: IVA and EAR are similarity invariant") {
  Rng rng(22);
  const auto pl = build_pair_list(LandmarkMap::standard());
  const auto& eye = LandmarkMap::standard().region("left_eye");
  double worst_iva = 0.0, worst_ear = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto pts = t % 2 ? random_face(rng, 4.0) : random_points(rng);
    const auto sim = random_similarity(rng);
    std::vector<Point> moved;
    for (auto p : pts) moved.push_back(sim(p));
    const auto a = compute_iva(pts, pl);
    const auto b = compute_iva(moved, pl);
    for (std::size_t i = 0; i < a.size(); ++i) worst_iva = std::max(worst_iva, std::fabs(a[i] - b[i]));
    const std::span<const Point> e0(pts.data() + eye.begin, 16), e1(moved.data() + eye.begin, 16);
    worst_ear = std::max(worst_ear, std::fabs(*compute_ear(e0) - *compute_ear(e1)));
  }
  CHECK(worst_iva <= 1e-9);
  CHECK(worst_ear <= 1e-9);
}

TEST_CASE("PCA of rank-one data explains everything with one component") {
  Rng rng(23);
  RowMatrix x(200, 3);
  for (Eigen::Index i = 0; i < 200; ++i) {
    const double t = normal(rng);
    x.row(i) << 1 + t, 2 + 2 * t, -1 + 3 * t;
  }
  const auto m = fit_pca(x, 1);
  CHECK(m.explained_variance_ratio()(0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("PCA of isotropic noise gives near-equal variances") {
  Rng rng(24);
  const auto m = fit_pca(random_matrix(rng, 10000, 4), 2);
  const auto& ev = m.explained_variance();
  CHECK(ev(0) == doctest::Approx(1.0).epsilon(0.1));
  CHECK(ev(1) == doctest::Approx(1.0).epsilon(0.1));
  CHECK(ev(0) / ev(1) <= 1.1);
}

TEST_CASE("PCA structure: orthonormal rows, ordering, sign convention, determinism") {
  Rng rng(25);
  RowMatrix x = random_matrix(rng, 300, 12);
  x.col(3) *= 5.0;
  x.col(7) = 0.5 * x.col(3) + 0.1 * x.col(7);
  x(5, 2) = kMissing;
  const auto m = fit_pca(x, 5);
  CHECK(m.fitted_rows() == 299);
  const RowMatrix gram = m.components() * m.components().transpose();
  CHECK((gram - RowMatrix::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-9);
  for (Eigen::Index i = 0; i < 5; ++i) {
    CHECK(m.explained_variance()(i) >= 0.0);
    if (i) CHECK(m.explained_variance()(i) <= m.explained_variance()(i - 1));
    Eigen::Index arg = 0;
    m.components().row(i).cwiseAbs().maxCoeff(&arg);
    CHECK(m.components()(i, arg) > 0.0);
  }
  CHECK(fit_pca(x, 5) == m);
}

TEST_CASE("PCA residual equals the truncated-SVD residual") {
  Rng rng(26);
  RowMatrix x = random_matrix(rng, 80, 9) * random_matrix(rng, 9, 9);
  const auto m = fit_pca(x, 3);
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const RowMatrix c = x.rowwise() - mu;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeThinV);
  const Eigen::MatrixXd v = svd.matrixV().leftCols(3);
  for (Eigen::Index i = 0; i < 10; ++i) {
    const Eigen::VectorXd r = c.row(i).transpose();
    const double oracle = (r - v * (v.transpose() * r)).norm();
    const auto s = m.apply(std::vector<double>(x.row(i).data(), x.row(i).data() + 9));
    const Eigen::VectorXd sv = Eigen::Map<const Eigen::VectorXd>(s.data(), 3);
    CHECK(std::fabs((r - m.components().transpose() * sv).norm() - oracle) <= 1e-9);
  }
}

TEST_CASE("PCA reconstruction improves with k and is exact on rank-k data") {
  Rng rng(27);
  const RowMatrix x = random_matrix(rng, 150, 8);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= 8; ++k) {
    const double r = residual(fit_pca(x, k), x);
    CHECK(r <= prev + 1e-12);
    prev = r;
  }
  const RowMatrix low = random_matrix(rng, 150, 3) * random_matrix(rng, 3, 8);
  const auto m = fit_pca(low, 3);
  CHECK(std::sqrt(residual(m, low) / (low.rowwise() - m.mean().transpose()).squaredNorm()) <= 1e-6);
}

TEST_CASE("PCA apply: mean and fully-missing inputs score zero; errors") {
  Rng rng(28);
  const auto m = fit_pca(random_matrix(rng, 40, 6), 2);
  const std::vector<double> mean(m.mean().data(), m.mean().data() + 6);
  for (double s : m.apply(mean)) CHECK(s == 0.0);
  for (double s : m.apply(std::vector<double>(6, kMissing))) CHECK(s == 0.0);
  CHECK_THROWS_AS(m.apply(std::vector<double>(5, 0.0)), DataError);
  CHECK_THROWS_AS(fit_pca(random_matrix(rng, 3, 6), 3), DataError);
  std::stringstream ss;
  m.save(ss);
  CHECK(PcaModel::load(ss) == m);
}

TEST_CASE("IVA velocity") {
  RowMatrix s(3, 2);
  s << 1, 4, 1, 4, 1, 4;
  const std::vector<std::int64_t> t = {0, 400, 810};
  const auto v = iva_dynamics(s, t);
  CHECK(std::isnan(v(0, 0)));
  CHECK(v(1, 0) == 0.0);
  CHECK(v(2, 1) == 0.0);
  RowMatrix two(2, 1);
  two << 0, 2;
  const std::vector<std::int64_t> t2 = {0, 400};
  CHECK(iva_dynamics(two, t2)(1, 0) == doctest::Approx(5.0));
  RowMatrix one(1, 1);
  one << 3;
  const std::vector<std::int64_t> t1 = {10};
  CHECK(std::isnan(iva_dynamics(one, t1)(0, 0)));
  const std::vector<std::int64_t> bad = {400, 400};
  CHECK_THROWS_AS(iva_dynamics(two, bad), DataError);
}
