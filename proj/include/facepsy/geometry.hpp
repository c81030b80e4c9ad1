#pragma once

// Per-frame geometric channels: eye-aspect ratio, inter-vector angles (IVA)
// around the nose centroid, their PCA reduction, and PCA-score velocities.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "facepsy/records.hpp"

namespace facepsy {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// (‖p3−p13‖ + ‖p5−p11‖) / (2‖p0−p8‖) over a 16-point contour starting at
// the inner corner, upper arc first. Missing when the width is < 1e-9 px.
std::optional<double> compute_ear(std::span<const Point> contour);

struct IvaPairList {
  std::vector<std::pair<int, int>> pairs;  // a < b, lexicographic
  std::size_t size() const { return pairs.size(); }
};

// All unordered pairs of non-nose landmarks lying in different macro regions.
IvaPairList build_pair_list(const LandmarkMap& map);
// Explicit list, validated: in range, a != b, no nose endpoint. Kept verbatim.
IvaPairList build_pair_list(const LandmarkMap& map, std::span<const std::pair<int, int>> pairs);

// Arithmetic mean of the nose_bottom points.
Point nose_centroid(std::span<const Point> landmarks, const LandmarkMap& map = LandmarkMap::standard());

// Reference kernel: angle_i = arccos(clamp(û·v̂)) for vectors from the
// centroid to each endpoint; NaN where an endpoint sits on the centroid.
std::vector<double> compute_iva_raw(std::span<const Point> landmarks, const IvaPairList& pairs,
                                    const LandmarkMap& map = LandmarkMap::standard());

// Production kernel. Each landmark's bearing around the centroid is computed
// once; a pair's angle is the wrapped bearing difference, which equals the
// arccos form but keeps full precision for near-parallel vectors.
std::vector<double> landmark_bearings(std::span<const Point> landmarks,
                                      const LandmarkMap& map = LandmarkMap::standard());
void iva_from_bearings(std::span<const double> bearings, const IvaPairList& pairs, std::span<double> out);
std::vector<double> compute_iva(std::span<const Point> landmarks, const IvaPairList& pairs,
                                const LandmarkMap& map = LandmarkMap::standard());

class PcaModel {
 public:
  PcaModel() = default;
  PcaModel(Eigen::VectorXd mean, RowMatrix components, Eigen::VectorXd explained_variance,
           double total_variance, std::size_t fitted_rows);

  std::size_t dims() const { return static_cast<std::size_t>(mean_.size()); }
  std::size_t k() const { return static_cast<std::size_t>(components_.rows()); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const RowMatrix& components() const { return components_; }
  const Eigen::VectorXd& explained_variance() const { return explained_variance_; }
  double total_variance() const { return total_variance_; }
  std::size_t fitted_rows() const { return fitted_rows_; }
  Eigen::VectorXd explained_variance_ratio() const;

  // Scores = components · (angles − mean); NaN angles take the mean entry.
  std::vector<double> apply(std::span<const double> angles) const;
  // Row-wise apply on a batch (rows × dims), writing rows × k scores.
  void apply_batch(const RowMatrix& angles, RowMatrix& scores) const;

  void save(std::ostream& out) const;
  static PcaModel load(std::istream& in);
  bool operator==(const PcaModel&) const = default;

 private:
  Eigen::VectorXd mean_;
  RowMatrix components_;
  Eigen::VectorXd explained_variance_;
  double total_variance_ = 0.0;
  std::size_t fitted_rows_ = 0;
};

// Rows containing any NaN are excluded. Needs at least k+1 complete rows.
// Components are sign-normalised so each row's largest-magnitude entry is
// positive.
PcaModel fit_pca(const RowMatrix& angles, std::size_t k = 10);

// Velocity of each score between consecutive frames of one session, in units
// per second. Rows are frames, columns score dimensions; NaN rows have no
// scores. The first frame (and any frame without a scored predecessor) gets
// NaN. Throws DataError when timestamps are not strictly increasing.
RowMatrix iva_dynamics(const RowMatrix& scores, std::span<const std::int64_t> timestamps_ms);

}  // namespace facepsy
