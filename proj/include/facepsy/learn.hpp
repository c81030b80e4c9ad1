#pragma once

// Training-fold preprocessing, SMOTE, CART importance selection and a
// gradient-boosted tree learner with grid search.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "facepsy/geometry.hpp"

namespace facepsy {

// splitmix64 finaliser over (master, stream); used for every per-fold and
// per-participant RNG stream.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

struct Preprocessor {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // population, after imputation, floored at 1e-9
  std::size_t fitted_rows = 0;

  RowMatrix apply(const RowMatrix& x) const;
  void apply_inplace(RowMatrix& x) const;
};

inline constexpr double kStdFloor = 1e-9;

// NaN = missing. All-missing columns impute to 0.
Preprocessor fit_preprocessor(const RowMatrix& train);

struct Resampled {
  RowMatrix x;
  std::vector<int> y;
  std::size_t synthetic = 0;  // appended after the original rows
};

// Oversamples the minority class to parity. k is clipped to minority−1.
// Throws DataError when the minority class has fewer than two rows.
Resampled smote(const RowMatrix& x, std::span<const int> y, std::size_t k, std::uint64_t seed);

struct GiniSelection {
  std::vector<double> importances;  // sums to 1 when the tree has a split
  double threshold = 0.0;  // 1 / feature count
  std::vector<std::size_t> selected;  // importance > threshold, ascending
};

// Single CART classification tree, Gini impurity, exact best split, grown
// until pure or no split leaves min_samples_leaf rows on each side.
std::vector<double> cart_importances(const RowMatrix& x, std::span<const int> y, std::size_t min_samples_leaf = 2);
GiniSelection gini_select(const RowMatrix& x, std::span<const int> y, std::size_t min_samples_leaf = 2);

enum class Task { binary_logistic, l2_regression };
std::string_view to_string(Task t);

struct Hyperparameters {
  double learning_rate = 0.1;
  int trees = 100;
  int max_leaves = 31;
  int min_samples_leaf = 20;

  void validate() const;
  bool operator==(const Hyperparameters&) const = default;
};

struct Grid {
  std::vector<double> learning_rate = {0.05, 0.1};
  std::vector<int> trees = {100, 200};
  std::vector<int> max_leaves = {15, 31};
  std::vector<int> min_samples_leaf = {5, 20};

  // Nested in field order: learning_rate outermost, min_samples_leaf innermost.
  std::vector<Hyperparameters> candidates() const;
  static Grid single(const Hyperparameters& hp);
};

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;  // x <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output, learning rate already applied
  int samples = 0;
  bool operator==(const TreeNode&) const = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double predict(const double* row) const;
  std::size_t leaf_count() const;
  bool operator==(const RegressionTree&) const = default;
};

// Logistic loss on a raw score f and its derivative df.
double logistic_loss(double y, double f);
double logistic_gradient(double y, double f);
double sigmoid(double f);

class GbdtModel {
 public:
  GbdtModel() = default;
  GbdtModel(Task task, Hyperparameters hp, double init, std::size_t features, std::vector<RegressionTree> trees);

  Task task() const { return task_; }
  const Hyperparameters& hyperparameters() const { return hp_; }
  double initial_score() const { return init_; }
  std::size_t feature_count() const { return features_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }

  // Probabilities (logistic) or values (regression) using the first
  // `stages` trees; 0 means all.
  std::vector<double> predict(const RowMatrix& x, std::size_t stages = 0) const;
  // One prediction vector per requested stage count, in one pass.
  std::vector<std::vector<double>> staged_predict(const RowMatrix& x, std::span<const std::size_t> stages) const;
  std::vector<double> raw_scores(const RowMatrix& x, std::size_t stages = 0) const;

  void save(std::ostream& out) const;
  static GbdtModel load(std::istream& in);
  bool operator==(const GbdtModel&) const = default;

 private:
  Task task_ = Task::l2_regression;
  Hyperparameters hp_;
  double init_ = 0.0;
  std::size_t features_ = 0;
  std::vector<RegressionTree> trees_;
};

// The learner has no stochastic step; the seed is accepted so every fitting
// call carries its stream and the contract stays stable if one is added.
GbdtModel fit_gbdt(const RowMatrix& x, std::span<const double> y, Task task, const Hyperparameters& hp,
                   std::uint64_t seed = 0);

// Serial builder that copies and rescans per node. Produces the same trees
// as fit_gbdt; used as its test oracle and benchmark baseline.
GbdtModel fit_gbdt_reference(const RowMatrix& x, std::span<const double> y, Task task, const Hyperparameters& hp);

struct SmoteOptions {
  bool enabled = true;
  std::size_t k = 5;
};

// Preprocessor + (classification only) SMOTE + booster, fitted on raw rows.
struct FittedPipeline {
  Preprocessor pre;
  GbdtModel model;
  std::size_t smote_rows = 0;

  std::vector<double> predict(const RowMatrix& raw) const { return model.predict(pre.apply(raw)); }
};

FittedPipeline fit_pipeline(const RowMatrix& raw, std::span<const double> y, std::span<const int> labels, Task task,
                            const Hyperparameters& hp, const SmoteOptions& smote_opt, std::uint64_t seed);

// Per-class shuffled round-robin assignment to `folds` folds.
std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed);

struct CandidateScore {
  Hyperparameters hp;
  bool skipped = false;
  double score = 0.0;  // mean inner AUROC or mean inner MAE
};

struct GridSearchResult {
  Hyperparameters best;
  double best_score = 0.0;
  bool cross_validated = false;
  std::vector<CandidateScore> candidates;
};

// Stratified 3-fold CV over raw training rows; preprocessing and SMOTE are
// refitted inside every inner fold. Classification maximises mean AUROC,
// regression minimises mean MAE; ties go to grid order. A one-candidate grid
// returns immediately. Throws DataError when every candidate is skipped.
GridSearchResult grid_search(const RowMatrix& raw, std::span<const double> y, std::span<const int> labels, Task task,
                             const Grid& grid, const SmoteOptions& smote_opt, std::uint64_t seed, int folds = 3);

}  // namespace facepsy
