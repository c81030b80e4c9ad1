#include "facepsy/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace facepsy {

namespace {

constexpr double kDegenerate = 1e-9;

double dist(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

std::optional<double> compute_ear(std::span<const Point> c) {
  if (c.size() != 16) throw DataError("eye contour must have 16 points");
  const double width = dist(c[0], c[8]);
  if (width < kDegenerate) return std::nullopt;
  return (dist(c[3], c[13]) + dist(c[5], c[11])) / (2.0 * width);
}

IvaPairList build_pair_list(const LandmarkMap& map) {
  IvaPairList out;
  const std::size_t n = map.point_count();
  std::vector<MacroRegion> macro(n);
  for (std::size_t i = 0; i < n; ++i) macro[i] = map.macro_of(i);
  for (std::size_t a = 0; a < n; ++a) {
    if (macro[a] == MacroRegion::nose) continue;
    for (std::size_t b = a + 1; b < n; ++b) {
      if (macro[b] == MacroRegion::nose || macro[b] == macro[a]) continue;
      out.pairs.emplace_back(static_cast<int>(a), static_cast<int>(b));
    }
  }
  return out;
}

IvaPairList build_pair_list(const LandmarkMap& map, std::span<const std::pair<int, int>> pairs) {
  const auto n = static_cast<int>(map.point_count());
  IvaPairList out;
  for (auto [a, b] : pairs) {
    if (a < 0 || b < 0 || a >= n || b >= n)
      throw DataError("IVA pair (" + std::to_string(a) + "," + std::to_string(b) + ") out of range");
    if (a == b) throw DataError("IVA pair endpoints must differ");
    if (map.macro_of(a) == MacroRegion::nose || map.macro_of(b) == MacroRegion::nose)
      throw DataError("IVA pair (" + std::to_string(a) + "," + std::to_string(b) +
                      ") references a nose landmark");
    out.pairs.emplace_back(a, b);
  }
  return out;
}

Point nose_centroid(std::span<const Point> landmarks, const LandmarkMap& map) {
  const auto& nose = map.region("nose_bottom");
  Point c;
  for (std::size_t i = nose.begin; i < nose.end(); ++i) {
    c.x += landmarks[i].x;
    c.y += landmarks[i].y;
  }
  c.x /= static_cast<double>(nose.size);
  c.y /= static_cast<double>(nose.size);
  return c;
}

std::vector<double> compute_iva_raw(std::span<const Point> landmarks, const IvaPairList& pairs,
                                    const LandmarkMap& map) {
  if (landmarks.size() != map.point_count()) throw DataError("landmark count mismatch");
  const Point c = nose_centroid(landmarks, map);
  std::vector<double> out(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Point& a = landmarks[pairs.pairs[i].first];
    const Point& b = landmarks[pairs.pairs[i].second];
    const double ux = a.x - c.x, uy = a.y - c.y, vx = b.x - c.x, vy = b.y - c.y;
    const double nu = std::hypot(ux, uy), nv = std::hypot(vx, vy);
    if (nu < kDegenerate || nv < kDegenerate) {
      out[i] = kMissing;
      continue;
    }
    const double cosang = std::clamp((ux * vx + uy * vy) / (nu * nv), -1.0, 1.0);
    out[i] = std::acos(cosang);
  }
  return out;
}

std::vector<double> landmark_bearings(std::span<const Point> landmarks, const LandmarkMap& map) {
  if (landmarks.size() != map.point_count()) throw DataError("landmark count mismatch");
  const Point c = nose_centroid(landmarks, map);
  std::vector<double> out(landmarks.size());
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    const double dx = landmarks[i].x - c.x, dy = landmarks[i].y - c.y;
    out[i] = std::hypot(dx, dy) < kDegenerate ? kMissing : std::atan2(dy, dx);
  }
  return out;
}

void iva_from_bearings(std::span<const double> bearings, const IvaPairList& pairs, std::span<double> out) {
  constexpr double pi = std::numbers::pi;
  const auto* p = pairs.pairs.data();
  const std::size_t n = pairs.size();
  for (std::size_t i = 0; i < n; ++i) {
    double d = std::fabs(bearings[p[i].first] - bearings[p[i].second]);
    out[i] = d > pi ? 2.0 * pi - d : d;
  }
}

std::vector<double> compute_iva(std::span<const Point> landmarks, const IvaPairList& pairs,
                                const LandmarkMap& map) {
  const auto b = landmark_bearings(landmarks, map);
  std::vector<double> out(pairs.size());
  iva_from_bearings(b, pairs, out);
  return out;
}

// --- PCA -------------------------------------------------------------------

PcaModel::PcaModel(Eigen::VectorXd mean, RowMatrix components, Eigen::VectorXd explained_variance,
                   double total_variance, std::size_t fitted_rows)
    : mean_(std::move(mean)),
      components_(std::move(components)),
      explained_variance_(std::move(explained_variance)),
      total_variance_(total_variance),
      fitted_rows_(fitted_rows) {}

Eigen::VectorXd PcaModel::explained_variance_ratio() const {
  if (total_variance_ <= 0.0) return Eigen::VectorXd::Zero(explained_variance_.size());
  return explained_variance_ / total_variance_;
}

std::vector<double> PcaModel::apply(std::span<const double> angles) const {
  if (angles.size() != dims())
    throw DataError("PCA input length " + std::to_string(angles.size()) + " does not match model dims " +
                    std::to_string(dims()));
  Eigen::VectorXd centered(dims());
  for (std::size_t i = 0; i < dims(); ++i)
    centered[i] = is_missing(angles[i]) ? 0.0 : angles[i] - mean_[i];
  Eigen::VectorXd s = components_ * centered;
  return {s.data(), s.data() + s.size()};
}

void PcaModel::apply_batch(const RowMatrix& angles, RowMatrix& scores) const {
  if (static_cast<std::size_t>(angles.cols()) != dims()) throw DataError("PCA batch width mismatch");
  RowMatrix centered(angles.rows(), angles.cols());
  for (Eigen::Index r = 0; r < angles.rows(); ++r) {
    const double* a = angles.row(r).data();
    double* c = centered.row(r).data();
    const double* m = mean_.data();
    for (Eigen::Index j = 0; j < angles.cols(); ++j) c[j] = std::isnan(a[j]) ? 0.0 : a[j] - m[j];
  }
  scores.noalias() = centered * components_.transpose();
}

namespace {

void write_row(std::ostream& out, const char* tag, const double* v, Eigen::Index n) {
  out << tag;
  for (Eigen::Index i = 0; i < n; ++i) out << ' ' << format_double(v[i]);
  out << '\n';
}

std::vector<double> read_row(std::istream& in, const std::string& tag, std::size_t n) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("PCA model truncated before '" + tag + "'");
  std::istringstream ss(line);
  std::string t;
  ss >> t;
  if (t != tag) throw DataError("PCA model: expected '" + tag + "' row, got '" + t + "'");
  std::vector<double> v;
  std::string tok;
  while (ss >> tok) v.push_back(parse_double(tok));
  if (v.size() != n) throw DataError("PCA model: '" + tag + "' row has wrong length");
  return v;
}

}  // namespace

void PcaModel::save(std::ostream& out) const {
  out << "facepsy-pca format_version 1\n";
  out << "dims " << dims() << " k " << k() << " fitted_rows " << fitted_rows_ << " total_variance "
      << format_double(total_variance_) << '\n';
  write_row(out, "mean", mean_.data(), mean_.size());
  write_row(out, "variance", explained_variance_.data(), explained_variance_.size());
  for (Eigen::Index r = 0; r < components_.rows(); ++r)
    write_row(out, "component", components_.row(r).data(), components_.cols());
}

PcaModel PcaModel::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "facepsy-pca format_version 1")
    throw DataError("not a PCA model file (format_version 1)");
  if (!std::getline(in, line)) throw DataError("PCA model truncated");
  std::istringstream ss(line);
  std::string t1, t2, t3, t4, tv;
  std::size_t dims = 0, k = 0, rows = 0;
  ss >> t1 >> dims >> t2 >> k >> t3 >> rows >> t4 >> tv;
  if (!ss || t1 != "dims" || t2 != "k" || t3 != "fitted_rows" || t4 != "total_variance")
    throw DataError("PCA model: malformed dimension line");
  auto mean = read_row(in, "mean", dims);
  auto var = read_row(in, "variance", k);
  RowMatrix comps(k, dims);
  for (std::size_t r = 0; r < k; ++r) {
    auto row = read_row(in, "component", dims);
    for (std::size_t j = 0; j < dims; ++j) comps(r, j) = row[j];
  }
  return PcaModel(Eigen::Map<Eigen::VectorXd>(mean.data(), mean.size()), std::move(comps),
                  Eigen::Map<Eigen::VectorXd>(var.data(), var.size()), parse_double(tv), rows);
}

PcaModel fit_pca(const RowMatrix& angles, std::size_t k) {
  const Eigen::Index p = angles.cols();
  if (k == 0 || static_cast<Eigen::Index>(k) > p) throw DataError("PCA k must be in 1..dims");

  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < angles.rows(); ++r)
    if (!angles.row(r).array().isNaN().any()) keep.push_back(r);
  const auto n = static_cast<Eigen::Index>(keep.size());
  if (n < static_cast<Eigen::Index>(k) + 1)
    throw DataError("PCA needs at least " + std::to_string(k + 1) + " complete rows, got " +
                    std::to_string(n) + "; reduce k");

  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = angles.row(keep[i]);
  const Eigen::VectorXd mean = x.colwise().mean().transpose();
  x.rowwise() -= mean.transpose();
  const double denom = static_cast<double>(n - 1);
  const double total = x.squaredNorm() / denom;

  RowMatrix comps(k, p);
  Eigen::VectorXd var(k);
  if (p <= n) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
    cov.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw InvariantError("PCA eigendecomposition failed");
    for (std::size_t i = 0; i < k; ++i) {
      const Eigen::Index col = p - 1 - static_cast<Eigen::Index>(i);
      comps.row(i) = es.eigenvectors().col(col).transpose();
      var[i] = std::max(0.0, es.eigenvalues()[col]) / denom;
    }
  } else {
    // Gram route: eigenvectors of X Xᵀ map to components through Xᵀ.
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    if (es.info() != Eigen::Success) throw InvariantError("PCA eigendecomposition failed");
    for (std::size_t i = 0; i < k; ++i) {
      const Eigen::Index col = n - 1 - static_cast<Eigen::Index>(i);
      const double lambda = std::max(0.0, es.eigenvalues()[col]);
      var[i] = lambda / denom;
      comps.row(i) = (x.transpose() * es.eigenvectors().col(col)).transpose();
    }
    // Re-orthonormalise; rank-deficient directions are completed from the
    // canonical basis.
    for (std::size_t i = 0; i < k; ++i) {
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t j = 0; j < i; ++j) comps.row(i) -= comps.row(i).dot(comps.row(j)) * comps.row(j);
      double nrm = comps.row(i).norm();
      for (Eigen::Index e = 0; nrm < 1e-10 && e < p; ++e) {
        comps.row(i).setZero();
        comps(i, e) = 1.0;
        for (int pass = 0; pass < 2; ++pass)
          for (std::size_t j = 0; j < i; ++j) comps.row(i) -= comps.row(i).dot(comps.row(j)) * comps.row(j);
        nrm = comps.row(i).norm();
      }
      comps.row(i) /= nrm;
    }
  }

  for (std::size_t i = 0; i < k; ++i) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double a = std::fabs(comps(i, j));
      if (a > best) {
        best = a;
        arg = j;
      }
    }
    if (comps(i, arg) < 0) comps.row(i) *= -1.0;
  }
  return PcaModel(mean, std::move(comps), std::move(var), total, static_cast<std::size_t>(n));
}

RowMatrix iva_dynamics(const RowMatrix& scores, std::span<const std::int64_t> ts) {
  if (static_cast<std::size_t>(scores.rows()) != ts.size()) throw DataError("timestamp count mismatch");
  for (std::size_t i = 1; i < ts.size(); ++i)
    if (ts[i] <= ts[i - 1]) throw DataError("frame timestamps not strictly increasing within session");
  RowMatrix vel = RowMatrix::Constant(scores.rows(), scores.cols(), kMissing);
  Eigen::Index prev = -1;
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    if (scores.row(r).array().isNaN().any()) continue;
    if (prev >= 0) {
      const double dt = static_cast<double>(ts[r] - ts[prev]) / 1000.0;
      vel.row(r) = (scores.row(r) - scores.row(prev)) / dt;
    }
    prev = r;
  }
  return vel;
}

}  // namespace facepsy
