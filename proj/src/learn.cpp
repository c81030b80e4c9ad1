#include "facepsy/learn.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <tuple>

#include "facepsy/metrics.hpp"

#include <omp.h>

namespace facepsy {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Preprocessing

Preprocessor fit_preprocessor(const RowMatrix& train) {
  if (train.rows() == 0) throw DataError("cannot fit a preprocessor on zero training rows");
  const auto n = train.rows(), p = train.cols();
  Preprocessor pre;
  pre.fitted_rows = static_cast<std::size_t>(n);
  pre.mean.setZero(p);
  pre.stddev.setZero(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double s = 0.0;
    Eigen::Index c = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!is_missing(train(i, j))) {
        s += train(i, j);
        ++c;
      }
    const double m = c ? s / static_cast<double>(c) : 0.0;
    double ss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = is_missing(train(i, j)) ? m : train(i, j);
      ss += (v - m) * (v - m);
    }
    pre.mean[j] = m;
    pre.stddev[j] = std::max(std::sqrt(ss / static_cast<double>(n)), kStdFloor);
  }
  return pre;
}

void Preprocessor::apply_inplace(RowMatrix& x) const {
  if (x.cols() != mean.size()) throw InvariantError("preprocessor: column count mismatch");
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double v = is_missing(x(i, j)) ? mean[j] : x(i, j);
      x(i, j) = (v - mean[j]) / stddev[j];
    }
}

RowMatrix Preprocessor::apply(const RowMatrix& x) const {
  RowMatrix out = x;
  apply_inplace(out);
  return out;
}

// ---------------------------------------------------------------------------
// SMOTE

Resampled smote(const RowMatrix& x, std::span<const int> y, std::size_t k, std::uint64_t seed) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw InvariantError("smote: label count mismatch");
  std::vector<Eigen::Index> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] ? pos : neg).push_back(static_cast<Eigen::Index>(i));
  Resampled out;
  out.x = x;
  out.y.assign(y.begin(), y.end());
  if (pos.size() == neg.size()) return out;
  const bool minority_pos = pos.size() < neg.size();
  const auto& minority = minority_pos ? pos : neg;
  const std::size_t m = minority.size();
  const std::size_t deficit = (minority_pos ? neg.size() : pos.size()) - m;
  if (m < 2) throw DataError("SMOTE needs at least two minority rows, got " + std::to_string(m));
  k = std::min(k, m - 1);
  if (k == 0) throw DataError("SMOTE needs k >= 1");

  std::vector<std::vector<std::size_t>> nn(m);
  std::vector<std::pair<double, std::size_t>> dist(m);
  for (std::size_t a = 0; a < m; ++a) {
    dist.clear();
    for (std::size_t b = 0; b < m; ++b)
      if (b != a) dist.emplace_back((x.row(minority[a]) - x.row(minority[b])).squaredNorm(), b);
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (std::size_t t = 0; t < k; ++t) nn[a].push_back(dist[t].second);
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_base(0, m - 1);
  std::uniform_int_distribution<std::size_t> pick_nb(0, k - 1);
  std::uniform_real_distribution<double> lambda(0.0, 1.0);
  const auto n0 = x.rows();
  out.x.conservativeResize(n0 + static_cast<Eigen::Index>(deficit), x.cols());
  for (std::size_t s = 0; s < deficit; ++s) {
    const std::size_t a = pick_base(rng);
    const std::size_t b = nn[a][pick_nb(rng)];
    const double l = lambda(rng);
    out.x.row(n0 + static_cast<Eigen::Index>(s)) =
        x.row(minority[a]) + l * (x.row(minority[b]) - x.row(minority[a]));
    out.y.push_back(minority_pos ? 1 : 0);
  }
  out.synthetic = deficit;
  return out;
}

// ---------------------------------------------------------------------------
// Presorted row lists shared by both tree growers. Each node owns, for every
// feature, its rows sorted by that feature's value (ties by row index).

namespace {

struct ColumnData {
  std::size_t n = 0, p = 0;
  std::vector<double> col;  // column-major copy
  double at(std::size_t row, std::size_t f) const { return col[f * n + row]; }

  explicit ColumnData(const RowMatrix& x)
      : n(static_cast<std::size_t>(x.rows())), p(static_cast<std::size_t>(x.cols())), col(n * p) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t f = 0; f < p; ++f) col[f * n + i] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f));
  }
};

struct NodeRows {
  std::vector<int> rows;  // ascending row index
  std::vector<int> sorted;  // p blocks of rows.size(), each ordered by that feature
  std::vector<double> values;  // feature value alongside each entry of `sorted`
  std::size_t size() const { return rows.size(); }
};

NodeRows root_rows(const ColumnData& d) {
  NodeRows r;
  r.rows.resize(d.n);
  std::iota(r.rows.begin(), r.rows.end(), 0);
  r.sorted.resize(d.n * d.p);
  r.values.resize(d.n * d.p);
  for (std::size_t f = 0; f < d.p; ++f) {
    auto first = r.sorted.begin() + static_cast<std::ptrdiff_t>(f * d.n);
    std::iota(first, first + static_cast<std::ptrdiff_t>(d.n), 0);
    std::stable_sort(first, first + static_cast<std::ptrdiff_t>(d.n),
                     [&](int a, int b) { return d.at(static_cast<std::size_t>(a), f) < d.at(static_cast<std::size_t>(b), f); });
    for (std::size_t t = 0; t < d.n; ++t) r.values[f * d.n + t] = d.at(static_cast<std::size_t>(r.sorted[f * d.n + t]), f);
  }
  return r;
}

std::pair<NodeRows, NodeRows> partition_rows(const NodeRows& node, std::size_t p, const std::vector<char>& go_left) {
  NodeRows l, r;
  for (int i : node.rows) (go_left[static_cast<std::size_t>(i)] ? l : r).rows.push_back(i);
  const std::size_t n = node.size(), nl = l.size(), nr = r.size();
  // Branchless: both sides are written every step and only one cursor
  // advances, so each buffer carries one spare slot at the end.
  l.sorted.resize(nl * p + 1);
  l.values.resize(nl * p + 1);
  r.sorted.resize(nr * p + 1);
  r.values.resize(nr * p + 1);
  for (std::size_t f = 0; f < p; ++f) {
    const int* src = node.sorted.data() + f * n;
    const double* val = node.values.data() + f * n;
    int* ls = l.sorted.data() + f * nl;
    int* rs = r.sorted.data() + f * nr;
    double* lv = l.values.data() + f * nl;
    double* rv = r.values.data() + f * nr;
    for (std::size_t t = 0; t < n; ++t) {
      const int i = src[t];
      const double v = val[t];
      const std::size_t left = go_left[static_cast<std::size_t>(i)] ? 1 : 0;
      *ls = i;
      *lv = v;
      *rs = i;
      *rv = v;
      ls += left;
      lv += left;
      rs += 1 - left;
      rv += 1 - left;
    }
  }
  l.sorted.pop_back();
  l.values.pop_back();
  r.sorted.pop_back();
  r.values.pop_back();
  return {std::move(l), std::move(r)};
}

double midpoint(double a, double b) {
  const double m = a + (b - a) / 2.0;
  return m < b ? m : a;
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = -std::numeric_limits<double>::infinity();
  bool valid() const { return feature >= 0; }
};

}  // namespace

// ---------------------------------------------------------------------------
// CART (Gini)

std::vector<double> cart_importances(const RowMatrix& x, std::span<const int> y, std::size_t min_samples_leaf) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw InvariantError("cart: label count mismatch");
  if (min_samples_leaf < 1) throw UsageError("min_samples_leaf must be >= 1");
  const ColumnData d(x);
  std::vector<double> imp(d.p, 0.0);
  if (d.n == 0) return imp;
  const double total = static_cast<double>(d.n);
  auto gini_n = [](double n, double pos) {  // n × Gini impurity
    if (n <= 0.0) return 0.0;
    const double q = pos / n;
    return n * (1.0 - q * q - (1.0 - q) * (1.0 - q));
  };

  std::vector<char> go_left(d.n, 0);
  std::vector<NodeRows> stack;
  stack.push_back(root_rows(d));
  while (!stack.empty()) {
    NodeRows node = std::move(stack.back());
    stack.pop_back();
    const std::size_t n = node.size();
    double pos = 0.0;
    for (int i : node.rows) pos += y[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    if (pos == 0.0 || pos == static_cast<double>(n) || n < 2 * min_samples_leaf) continue;
    const double parent = gini_n(static_cast<double>(n), pos);
    Split best;
    for (std::size_t f = 0; f < d.p; ++f) {
      const int* list = node.sorted.data() + f * n;
      const double* val = node.values.data() + f * n;
      double lpos = 0.0;
      for (std::size_t t = 0; t + 1 < n; ++t) {
        lpos += y[static_cast<std::size_t>(list[t])] ? 1.0 : 0.0;
        const std::size_t nl = t + 1;
        if (nl < min_samples_leaf) continue;
        if (n - nl < min_samples_leaf) break;
        const double a = val[t], b = val[t + 1];
        if (!(a < b)) continue;
        const double dec = parent - gini_n(static_cast<double>(nl), lpos) -
                           gini_n(static_cast<double>(n - nl), pos - lpos);
        if (dec > best.gain) best = {static_cast<int>(f), midpoint(a, b), dec};
      }
    }
    if (!best.valid()) continue;
    imp[static_cast<std::size_t>(best.feature)] += std::max(best.gain, 0.0) / total;
    for (int i : node.rows)
      go_left[static_cast<std::size_t>(i)] = d.at(static_cast<std::size_t>(i), static_cast<std::size_t>(best.feature)) <= best.threshold;
    auto [l, r] = partition_rows(node, d.p, go_left);
    stack.push_back(std::move(r));
    stack.push_back(std::move(l));
  }
  const double sum = std::accumulate(imp.begin(), imp.end(), 0.0);
  if (sum > 0.0)
    for (double& v : imp) v /= sum;
  return imp;
}

GiniSelection gini_select(const RowMatrix& x, std::span<const int> y, std::size_t min_samples_leaf) {
  if (x.cols() == 0) throw DataError("gini_select: no features");
  const auto pos = std::count_if(y.begin(), y.end(), [](int v) { return v != 0; });
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(y.size()))
    throw DataError("gini_select needs both classes in the training labels");
  GiniSelection g;
  g.importances = cart_importances(x, y, min_samples_leaf);
  g.threshold = 1.0 / static_cast<double>(x.cols());
  for (std::size_t f = 0; f < g.importances.size(); ++f)
    if (g.importances[f] > g.threshold) g.selected.push_back(f);
  return g;
}

// ---------------------------------------------------------------------------
// Boosting

std::string_view to_string(Task t) { return t == Task::binary_logistic ? "binary_logistic" : "l2_regression"; }

void Hyperparameters::validate() const {
  if (!(learning_rate > 0.0) || trees < 1 || max_leaves < 2 || min_samples_leaf < 1)
    throw UsageError("hyperparameters must be positive (max_leaves >= 2)");
}

std::vector<Hyperparameters> Grid::candidates() const {
  std::vector<Hyperparameters> out;
  for (double lr : learning_rate)
    for (int t : trees)
      for (int l : max_leaves)
        for (int m : min_samples_leaf) {
          Hyperparameters hp{lr, t, l, m};
          hp.validate();
          out.push_back(hp);
        }
  if (out.empty()) throw UsageError("hyperparameter grid is empty");
  return out;
}

Grid Grid::single(const Hyperparameters& hp) {
  return Grid{{hp.learning_rate}, {hp.trees}, {hp.max_leaves}, {hp.min_samples_leaf}};
}

double sigmoid(double f) {
  if (f >= 0) return 1.0 / (1.0 + std::exp(-f));
  const double e = std::exp(f);
  return e / (1.0 + e);
}

double logistic_loss(double y, double f) {
  // log(1 + e^f) − y·f, evaluated without overflow
  const double softplus = f > 0 ? f + std::log1p(std::exp(-f)) : std::log1p(std::exp(f));
  return softplus - y * f;
}

double logistic_gradient(double y, double f) { return sigmoid(f) - y; }

double RegressionTree::predict(const double* row) const {
  int i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = row[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

GbdtModel::GbdtModel(Task task, Hyperparameters hp, double init, std::size_t features, std::vector<RegressionTree> trees)
    : task_(task), hp_(hp), init_(init), features_(features), trees_(std::move(trees)) {}

std::vector<std::vector<double>> GbdtModel::staged_predict(const RowMatrix& x, std::span<const std::size_t> stages) const {
  if (static_cast<std::size_t>(x.cols()) != features_) throw InvariantError("gbdt: feature count mismatch");
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<double> raw(n, init_);
  std::vector<std::vector<double>> out(stages.size());
  std::size_t done = 0;
  auto snapshot = [&](std::size_t at) {
    for (std::size_t s = 0; s < stages.size(); ++s)
      if ((stages[s] == 0 ? trees_.size() : stages[s]) == at) {
        out[s] = raw;
        if (task_ == Task::binary_logistic)
          for (double& v : out[s]) v = sigmoid(v);
      }
  };
  for (std::size_t s : stages)
    if (s > trees_.size()) throw InvariantError("gbdt: stage beyond tree count");
  snapshot(0);
  for (const auto& tree : trees_) {
    for (std::size_t i = 0; i < n; ++i) raw[i] += tree.predict(x.row(static_cast<Eigen::Index>(i)).data());
    snapshot(++done);
  }
  return out;
}

std::vector<double> GbdtModel::predict(const RowMatrix& x, std::size_t stages) const {
  const std::size_t st[1] = {stages};
  return std::move(staged_predict(x, st)[0]);
}

std::vector<double> GbdtModel::raw_scores(const RowMatrix& x, std::size_t stages) const {
  auto v = predict(x, stages);
  if (task_ == Task::binary_logistic)
    for (double& p : v) p = std::log(p / (1.0 - p));
  return v;
}

namespace {

// inv[k] = 1/k, so the scan multiplies instead of divides.
const std::vector<double>& reciprocals(std::size_t n) {
  thread_local std::vector<double> inv{0.0};
  while (inv.size() <= n) inv.push_back(1.0 / static_cast<double>(inv.size()));
  return inv;
}

Split best_gain_split(const NodeRows& node, std::size_t p, std::span<const double> g, double sum, std::size_t min_leaf) {
  Split best;
  const std::size_t n = node.size();
  if (n < 2 * min_leaf) return best;
  const double* inv = reciprocals(n).data();
  const double base = sum * sum * inv[n];
  const std::size_t lo = min_leaf, hi = n - min_leaf;  // admissible left sizes
  double best_raw = -std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < p; ++f) {
    const int* list = node.sorted.data() + f * n;
    const double* val = node.values.data() + f * n;
    double sl = 0.0;
    for (std::size_t t = 0; t + 1 < lo; ++t) sl += g[static_cast<std::size_t>(list[t])];
    for (std::size_t nl = lo; nl <= hi; ++nl) {
      sl += g[static_cast<std::size_t>(list[nl - 1])];
      if (!(val[nl - 1] < val[nl])) continue;
      const double sr = sum - sl;
      const double raw = sl * sl * inv[nl] + sr * sr * inv[n - nl];
      if (raw > best_raw) {
        best_raw = raw;
        best = {static_cast<int>(f), midpoint(val[nl - 1], val[nl]), raw - base};
      }
    }
  }
  return best;
}

// Presorted lists held in two ping-pong buffers. A leaf owns the same
// [off, off + cnt) segment of every feature block; splitting it writes the
// stable partition into the other buffer while scoring both children. Each
// entry packs the row index with the dense rank of its value, so ordering
// tests compare ranks and thresholds come from the column data.
template <class Packed>
class FusedSplitter {
  static constexpr unsigned kShift = sizeof(Packed) * 4;
  static constexpr Packed kRowMask = (Packed{1} << kShift) - 1;
  static std::size_t row(Packed e) { return static_cast<std::size_t>(e & kRowMask); }
  static Packed rank(Packed e) { return e >> kShift; }

 public:
  struct Leaf {
    int node = 0;
    int buf = -1;  // -1: the root lists
    std::size_t off = 0, cnt = 0;
    double sum = 0.0;
    Split best;
  };

  FusedSplitter(const ColumnData& d, std::size_t min_leaf)
      : d_(d), min_leaf_(min_leaf), root_(d.n * d.p), root_rows_(d.n), go_left_(d.n, 0) {
    std::iota(root_rows_.begin(), root_rows_.end(), 0);
    std::vector<int> order(d.n);
    for (std::size_t f = 0; f < d.p; ++f) {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return d.at(static_cast<std::size_t>(a), f) < d.at(static_cast<std::size_t>(b), f);
      });
      Packed r = 0;
      for (std::size_t t = 0; t < d.n; ++t) {
        const auto i = static_cast<std::size_t>(order[t]);
        if (t > 0 && d.at(static_cast<std::size_t>(order[t - 1]), f) < d.at(i, f)) ++r;
        root_[f * d.n + t] = static_cast<Packed>((r << kShift) | static_cast<Packed>(i));
      }
    }
    for (int b = 0; b < 2; ++b) {
      lists_[b].reset(new Packed[d.n * d.p]);
      rows_[b].reset(new int[d.n]);
    }
  }

  Leaf root(std::span<const double> g) const {
    Leaf l;
    l.cnt = d_.n;
    for (std::size_t i = 0; i < d_.n; ++i) l.sum += g[i];
    l.best = scan_root(g, l.sum);
    return l;
  }

  template <class F>
  void for_each_row(const Leaf& l, F&& f) const {
    const int* r = rows_of(l.buf) + l.off;
    for (std::size_t t = 0; t < l.cnt; ++t) f(r[t]);
  }

  std::pair<Leaf, Leaf> split(const Leaf& parent, std::span<const double> g) {
    const auto feat = static_cast<std::size_t>(parent.best.feature);
    const int dst = parent.buf == 0 ? 1 : 0;
    const int* src_rows = rows_of(parent.buf) + parent.off;
    int* dst_rows = rows_[dst].get() + parent.off;
    Leaf a, b;
    a.buf = b.buf = dst;
    for (std::size_t t = 0; t < parent.cnt; ++t) {
      const auto i = static_cast<std::size_t>(src_rows[t]);
      go_left_[i] = d_.at(i, feat) <= parent.best.threshold ? 1 : 0;
      a.cnt += static_cast<std::size_t>(go_left_[i]);
    }
    b.cnt = parent.cnt - a.cnt;
    a.off = parent.off;
    b.off = parent.off + a.cnt;
    int* l = dst_rows;
    int* r = dst_rows + a.cnt;
    for (std::size_t t = 0; t < parent.cnt; ++t) {
      const int i = src_rows[t];
      if (go_left_[static_cast<std::size_t>(i)]) {
        *l++ = i;
        a.sum += g[static_cast<std::size_t>(i)];
      } else {
        *r++ = i;
        b.sum += g[static_cast<std::size_t>(i)];
      }
    }
    partition_and_score(parent, dst, a, b, g);
    return {a, b};
  }

 private:
  const int* rows_of(int buf) const { return buf < 0 ? root_rows_.data() : rows_[buf].get(); }
  const Packed* list_of(int buf) const { return buf < 0 ? root_.data() : lists_[buf].get(); }

  double cut(std::size_t f, Packed lo, Packed hi) const { return midpoint(d_.at(row(lo), f), d_.at(row(hi), f)); }

  Split scan_root(std::span<const double> g, double sum) const {
    Split best;
    const std::size_t n = d_.n;
    if (n < 2 * min_leaf_) return best;
    const double* inv = reciprocals(n).data();
    double best_raw = -std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < d_.p; ++f) {
      const Packed* list = root_.data() + f * n;
      double sl = 0.0;
      for (std::size_t t = 0; t + 1 < min_leaf_; ++t) sl += g[row(list[t])];
      for (std::size_t nl = min_leaf_; nl <= n - min_leaf_; ++nl) {
        sl += g[row(list[nl - 1])];
        if (!(rank(list[nl - 1]) < rank(list[nl]))) continue;
        const double sr = sum - sl;
        const double raw = sl * sl * inv[nl] + sr * sr * inv[n - nl];
        if (raw > best_raw) {
          best_raw = raw;
          best = {static_cast<int>(f), cut(f, list[nl - 1], list[nl]), 0.0};
        }
      }
    }
    if (best.valid()) best.gain = best_raw - sum * sum * inv[n];
    return best;
  }

  // One pass per feature: stable partition into the children's segments and,
  // for each arriving entry, score the cut just before it on its side.
  void partition_and_score(const Leaf& parent, int dst, Leaf& a, Leaf& b, std::span<const double> g) {
    const std::size_t n = d_.n, p = d_.p, cnt = parent.cnt;
    const std::size_t m[2] = {a.cnt, b.cnt};
    const double total[2] = {a.sum, b.sum};
    const bool can[2] = {m[0] >= 2 * min_leaf_, m[1] >= 2 * min_leaf_};
    const std::size_t lo = min_leaf_;
    const std::size_t hi[2] = {can[0] ? m[0] - lo : 0, can[1] ? m[1] - lo : 0};
    const double* inv = reciprocals(n).data();
    const Packed* src = list_of(parent.buf);
    Packed* out = lists_[dst].get();
    const char* gl = go_left_.data();
    constexpr double kNone = -std::numeric_limits<double>::infinity();

    const int nf = static_cast<int>(p);
    std::vector<double> raw_a(p, kNone), raw_b(p, kNone);
    std::vector<Packed> lo_a(p), hi_a(p), lo_b(p), hi_b(p);
    const bool par = cnt * p >= (1u << 16) && !omp_in_parallel();
#pragma omp parallel for schedule(static) if (par)
    for (int fi = 0; fi < nf; ++fi) {
      const auto f = static_cast<std::size_t>(fi);
      const Packed* s = src + f * n + parent.off;
      Packed* o[2] = {out + f * n + a.off, out + f * n + b.off};
      std::size_t c[2] = {0, 0};
      double sl[2] = {0.0, 0.0};
      Packed prev[2] = {0, 0};
      double best_raw[2] = {kNone, kNone};
      Packed cut_lo[2] = {0, 0}, cut_hi[2] = {0, 0};
      for (std::size_t t = 0; t < cnt; ++t) {
        const Packed e = s[t];
        const std::size_t i = row(e);
        const std::size_t k = gl[i] ? 0 : 1;
        const std::size_t ck = c[k];
        o[k][ck] = e;
        if (ck >= lo && ck <= hi[k] && rank(prev[k]) < rank(e)) {
          const double l = sl[k], r = total[k] - l;
          const double raw = l * l * inv[ck] + r * r * inv[m[k] - ck];
          if (raw > best_raw[k]) {
            best_raw[k] = raw;
            cut_lo[k] = prev[k];
            cut_hi[k] = e;
          }
        }
        sl[k] += g[i];
        c[k] = ck + 1;
        prev[k] = e;
      }
      raw_a[f] = best_raw[0];
      lo_a[f] = cut_lo[0];
      hi_a[f] = cut_hi[0];
      raw_b[f] = best_raw[1];
      lo_b[f] = cut_lo[1];
      hi_b[f] = cut_hi[1];
    }
    auto reduce = [&](const std::vector<double>& raw, const std::vector<Packed>& cl, const std::vector<Packed>& ch,
                      const Leaf& leaf, bool ok) {
      Split best;
      if (!ok) return best;
      double br = kNone;
      std::size_t bf = 0;
      for (std::size_t f = 0; f < p; ++f)
        if (raw[f] > br) {
          br = raw[f];
          bf = f;
        }
      if (br == kNone) return best;
      return Split{static_cast<int>(bf), cut(bf, cl[bf], ch[bf]), br - leaf.sum * leaf.sum * inv[leaf.cnt]};
    };
    a.best = reduce(raw_a, lo_a, hi_a, a, can[0]);
    b.best = reduce(raw_b, lo_b, hi_b, b, can[1]);
  }

  const ColumnData& d_;
  std::size_t min_leaf_;
  std::vector<Packed> root_;
  std::vector<int> root_rows_;
  std::unique_ptr<Packed[]> lists_[2];
  std::unique_ptr<int[]> rows_[2];
  std::vector<char> go_left_;
};

// Straightforward builder: every split copies the node's presorted lists and
// rescans each child. Kept as the serial reference for the fused splitter.
class ReferenceSplitter {
 public:
  struct Leaf {
    int node = 0;
    NodeRows rows;
    std::size_t cnt = 0;
    double sum = 0.0;
    Split best;
  };

  ReferenceSplitter(const ColumnData& d, std::size_t min_leaf) : d_(d), min_leaf_(min_leaf), go_left_(d.n, 0) {}

  Leaf root(std::span<const double> g) const {
    Leaf l;
    l.rows = root_rows(d_);
    l.cnt = d_.n;
    for (std::size_t i = 0; i < d_.n; ++i) l.sum += g[i];
    l.best = best_gain_split(l.rows, d_.p, g, l.sum, min_leaf_);
    return l;
  }

  template <class F>
  void for_each_row(const Leaf& l, F&& f) const {
    for (int i : l.rows.rows) f(i);
  }

  std::pair<Leaf, Leaf> split(const Leaf& parent, std::span<const double> g) {
    const auto feat = static_cast<std::size_t>(parent.best.feature);
    for (int i : parent.rows.rows)
      go_left_[static_cast<std::size_t>(i)] = d_.at(static_cast<std::size_t>(i), feat) <= parent.best.threshold;
    auto [lr, rr] = partition_rows(parent.rows, d_.p, go_left_);
    Leaf a, b;
    a.rows = std::move(lr);
    b.rows = std::move(rr);
    a.cnt = a.rows.size();
    b.cnt = b.rows.size();
    for (int i : a.rows.rows) a.sum += g[static_cast<std::size_t>(i)];
    for (int i : b.rows.rows) b.sum += g[static_cast<std::size_t>(i)];
    a.best = best_gain_split(a.rows, d_.p, g, a.sum, min_leaf_);
    b.best = best_gain_split(b.rows, d_.p, g, b.sum, min_leaf_);
    return {std::move(a), std::move(b)};
  }

 private:
  const ColumnData& d_;
  std::size_t min_leaf_;
  std::vector<char> go_left_;
};

double initial_score(std::span<const double> y, Task task) {
  const auto n = static_cast<double>(y.size());
  if (task == Task::binary_logistic) {
    double pos = 0.0;
    for (double v : y) {
      if (v != 0.0 && v != 1.0) throw DataError("fit_gbdt: logistic targets must be 0 or 1");
      pos += v;
    }
    if (pos == 0.0 || pos == n) throw DataError("fit_gbdt: logistic task needs both classes");
    const double p = pos / n;
    return std::log(p / (1.0 - p));
  }
  return std::accumulate(y.begin(), y.end(), 0.0) / n;
}

template <class Splitter>
GbdtModel grow_model(const RowMatrix& x, std::span<const double> y, Task task, const Hyperparameters& hp) {
  hp.validate();
  const auto n = static_cast<std::size_t>(x.rows());
  if (n == 0 || y.size() != n) throw DataError("fit_gbdt: need matching nonempty X and y");
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (!std::isfinite(x(i, j))) throw DataError("fit_gbdt: X must be complete and finite");
  const double init = initial_score(y, task);

  const ColumnData d(x);
  Splitter splitter(d, static_cast<std::size_t>(hp.min_samples_leaf));
  using Leaf = typename Splitter::Leaf;
  constexpr double kGainEps = 1e-12;

  std::vector<double> f(n, init), g(n), h(n);
  std::vector<RegressionTree> trees;
  trees.reserve(static_cast<std::size_t>(hp.trees));
  for (int t = 0; t < hp.trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      if (task == Task::binary_logistic) {
        const double p = sigmoid(f[i]);
        g[i] = -logistic_gradient(y[i], f[i]);
        h[i] = p * (1.0 - p);
      } else {
        g[i] = y[i] - f[i];
        h[i] = 1.0;
      }
    }
    RegressionTree tree;
    tree.nodes.push_back(TreeNode{});
    std::vector<Leaf> leaves;
    leaves.push_back(splitter.root(g));
    while (static_cast<int>(leaves.size()) < hp.max_leaves) {
      int pick = -1;
      for (std::size_t li = 0; li < leaves.size(); ++li) {
        const auto& b = leaves[li].best;
        if (!b.valid() || b.gain < -kGainEps) continue;
        if (pick < 0 || b.gain > leaves[static_cast<std::size_t>(pick)].best.gain) pick = static_cast<int>(li);
      }
      if (pick < 0) break;
      Leaf parent = std::move(leaves[static_cast<std::size_t>(pick)]);
      leaves.erase(leaves.begin() + pick);
      auto [a, b] = splitter.split(parent, g);
      const int li = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back(TreeNode{});
      tree.nodes.push_back(TreeNode{});
      auto& pn = tree.nodes[static_cast<std::size_t>(parent.node)];
      pn.feature = parent.best.feature;
      pn.threshold = parent.best.threshold;
      pn.left = li;
      pn.right = li + 1;
      a.node = li;
      b.node = li + 1;
      leaves.insert(leaves.begin() + pick, std::move(b));
      leaves.insert(leaves.begin() + pick, std::move(a));
    }
    for (auto& leaf : leaves) {
      double value = 0.0;
      if (task == Task::binary_logistic) {
        double hs = 0.0;
        splitter.for_each_row(leaf, [&](int i) { hs += h[static_cast<std::size_t>(i)]; });
        value = hp.learning_rate * leaf.sum / std::max(hs, 1e-12);
      } else {
        value = hp.learning_rate * leaf.sum / static_cast<double>(leaf.cnt);
      }
      auto& node = tree.nodes[static_cast<std::size_t>(leaf.node)];
      node.value = value;
      node.samples = static_cast<int>(leaf.cnt);
      splitter.for_each_row(leaf, [&](int i) { f[static_cast<std::size_t>(i)] += value; });
    }
    // internal node sample counts, for inspection only
    for (std::size_t k = tree.nodes.size(); k-- > 0;) {
      auto& nd = tree.nodes[k];
      if (nd.feature >= 0)
        nd.samples = tree.nodes[static_cast<std::size_t>(nd.left)].samples + tree.nodes[static_cast<std::size_t>(nd.right)].samples;
    }
    trees.push_back(std::move(tree));
  }
  return GbdtModel(task, hp, init, d.p, std::move(trees));
}

}  // namespace

GbdtModel fit_gbdt(const RowMatrix& x, std::span<const double> y, Task task, const Hyperparameters& hp,
                   std::uint64_t /*seed*/) {
  if (x.rows() < (1 << 16)) return grow_model<FusedSplitter<std::uint32_t>>(x, y, task, hp);
  return grow_model<FusedSplitter<std::uint64_t>>(x, y, task, hp);
}

GbdtModel fit_gbdt_reference(const RowMatrix& x, std::span<const double> y, Task task, const Hyperparameters& hp) {
  return grow_model<ReferenceSplitter>(x, y, task, hp);
}

// ---------------------------------------------------------------------------
// Serialization

void GbdtModel::save(std::ostream& out) const {
  out << "facepsy-gbdt format_version 1\n";
  out << "task " << to_string(task_) << '\n';
  out << "hyperparameters learning_rate " << format_double(hp_.learning_rate) << " trees " << hp_.trees
      << " max_leaves " << hp_.max_leaves << " min_samples_leaf " << hp_.min_samples_leaf << '\n';
  out << "init " << format_double(init_) << '\n';
  out << "features " << features_ << '\n';
  out << "tree_count " << trees_.size() << '\n';
  for (const auto& t : trees_) {
    out << "tree " << t.nodes.size() << '\n';
    for (const auto& n : t.nodes)
      out << n.feature << ' ' << format_double(n.threshold) << ' ' << n.left << ' ' << n.right << ' '
          << format_double(n.value) << ' ' << n.samples << '\n';
  }
}

GbdtModel GbdtModel::load(std::istream& in) {
  auto fail = [](const std::string& m) -> GbdtModel { throw DataError("model file: " + m); };
  std::string line;
  if (!std::getline(in, line) || line != "facepsy-gbdt format_version 1") return fail("bad header");
  auto expect = [&](const char* key) {
    std::string k;
    if (!(in >> k) || k != key) throw DataError(std::string("model file: expected '") + key + "'");
  };
  auto num = [&]() {
    std::string s;
    if (!(in >> s)) throw DataError("model file: truncated");
    return parse_double(s);
  };
  GbdtModel m;
  expect("task");
  std::string task;
  in >> task;
  if (task == "binary_logistic") m.task_ = Task::binary_logistic;
  else if (task == "l2_regression") m.task_ = Task::l2_regression;
  else return fail("unknown task " + task);
  expect("hyperparameters");
  expect("learning_rate");
  m.hp_.learning_rate = num();
  expect("trees");
  m.hp_.trees = static_cast<int>(num());
  expect("max_leaves");
  m.hp_.max_leaves = static_cast<int>(num());
  expect("min_samples_leaf");
  m.hp_.min_samples_leaf = static_cast<int>(num());
  expect("init");
  m.init_ = num();
  expect("features");
  m.features_ = static_cast<std::size_t>(num());
  expect("tree_count");
  const auto count = static_cast<std::size_t>(num());
  for (std::size_t t = 0; t < count; ++t) {
    expect("tree");
    const auto nodes = static_cast<std::size_t>(num());
    RegressionTree tree;
    for (std::size_t k = 0; k < nodes; ++k) {
      TreeNode n;
      n.feature = static_cast<int>(num());
      n.threshold = num();
      n.left = static_cast<int>(num());
      n.right = static_cast<int>(num());
      n.value = num();
      n.samples = static_cast<int>(num());
      const auto bound = static_cast<int>(nodes);
      if (n.feature >= static_cast<int>(m.features_) ||
          (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= bound || n.right >= bound)))
        return fail("malformed node");
      tree.nodes.push_back(n);
    }
    if (tree.nodes.empty()) return fail("empty tree");
    m.trees_.push_back(std::move(tree));
  }
  if (m.trees_.size() != static_cast<std::size_t>(m.hp_.trees)) return fail("tree count does not match hyperparameters");
  return m;
}

// ---------------------------------------------------------------------------
// Pipeline and grid search

namespace {

std::size_t minority_count(std::span<const int> labels) {
  const auto pos = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int v) { return v != 0; }));
  return std::min(pos, labels.size() - pos);
}

// Preprocess, then oversample the classification training matrix.
struct PreparedTrain {
  Preprocessor pre;
  RowMatrix x;
  std::vector<double> y;
  std::size_t smote_rows = 0;
};

PreparedTrain prepare_train(const RowMatrix& raw, std::span<const double> y, std::span<const int> labels, Task task,
                            const SmoteOptions& opt, std::uint64_t seed) {
  PreparedTrain p;
  p.pre = fit_preprocessor(raw);
  p.x = p.pre.apply(raw);
  p.y.assign(y.begin(), y.end());
  if (task == Task::binary_logistic && opt.enabled) {
    auto r = smote(p.x, labels, opt.k, seed);
    p.x = std::move(r.x);
    p.y.assign(r.y.begin(), r.y.end());
    p.smote_rows = r.synthetic;
  }
  return p;
}

RowMatrix take_rows(const RowMatrix& x, std::span<const std::size_t> rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

template <class T>
std::vector<T> take(std::span<const T> v, std::span<const std::size_t> rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(v[r]);
  return out;
}

}  // namespace

FittedPipeline fit_pipeline(const RowMatrix& raw, std::span<const double> y, std::span<const int> labels, Task task,
                            const Hyperparameters& hp, const SmoteOptions& smote_opt, std::uint64_t seed) {
  auto p = prepare_train(raw, y, labels, task, smote_opt, derive_seed(seed, 0));
  FittedPipeline out;
  out.model = fit_gbdt(p.x, p.y, task, hp, derive_seed(seed, 1));
  out.pre = std::move(p.pre);
  out.smote_rows = p.smote_rows;
  return out;
}

std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw UsageError("need at least two folds");
  std::vector<int> out(labels.size(), 0);
  std::mt19937_64 rng(seed);
  for (int cls : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if ((labels[i] != 0) == (cls == 1)) idx.push_back(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t t = 0; t < idx.size(); ++t) out[idx[t]] = static_cast<int>(t % static_cast<std::size_t>(folds));
  }
  return out;
}

GridSearchResult grid_search(const RowMatrix& raw, std::span<const double> y, std::span<const int> labels, Task task,
                             const Grid& grid, const SmoteOptions& smote_opt, std::uint64_t seed, int folds) {
  const auto cands = grid.candidates();
  GridSearchResult res;
  for (const auto& c : cands) res.candidates.push_back({c, false, 0.0});
  if (cands.size() == 1) {
    res.best = cands[0];
    res.best_score = kMissing;
    return res;
  }
  if (static_cast<std::size_t>(raw.rows()) != y.size() || labels.size() != y.size())
    throw InvariantError("grid_search: row count mismatch");
  const bool cls = task == Task::binary_logistic;
  const auto assign = stratified_folds(labels, folds, derive_seed(seed, 0x67726964));

  // Shape of the staged evaluation: candidates sharing everything but the
  // tree count reuse one fit.
  std::map<std::tuple<double, int, int>, std::vector<std::size_t>> groups;
  std::vector<std::tuple<double, int, int>> group_order;
  for (std::size_t c = 0; c < cands.size(); ++c) {
    auto key = std::make_tuple(cands[c].learning_rate, cands[c].max_leaves, cands[c].min_samples_leaf);
    if (!groups.count(key)) group_order.push_back(key);
    groups[key].push_back(c);
  }

  std::vector<double> total(cands.size(), 0.0);
  bool all_skipped = false;
  for (int v = 0; v < folds && !all_skipped; ++v) {
    std::vector<std::size_t> tr, va;
    for (std::size_t i = 0; i < assign.size(); ++i) (assign[i] == v ? va : tr).push_back(i);
    const auto ytr = take(y, tr), yva = take(y, va);
    const auto ltr = take(labels, tr), lva = take(labels, va);
    bool usable = !tr.empty() && !va.empty();
    if (cls) usable = usable && minority_count(lva) > 0 && minority_count(ltr) >= (smote_opt.enabled ? 2u : 1u);
    if (!usable) {
      all_skipped = true;
      break;
    }
    auto prep = prepare_train(take_rows(raw, tr), ytr, ltr, task, smote_opt, derive_seed(seed, 100 + static_cast<std::uint64_t>(v)));
    const RowMatrix xva = prep.pre.apply(take_rows(raw, va));
    for (const auto& key : group_order) {
      const auto& members = groups[key];
      Hyperparameters hp = cands[members[0]];
      std::vector<std::size_t> stages;
      for (auto c : members) {
        hp.trees = std::max(hp.trees, cands[c].trees);
        stages.push_back(static_cast<std::size_t>(cands[c].trees));
      }
      const auto model = fit_gbdt(prep.x, prep.y, task, hp, derive_seed(seed, 200 + static_cast<std::uint64_t>(v)));
      const auto preds = model.staged_predict(xva, stages);
      for (std::size_t m = 0; m < members.size(); ++m) {
        double s;
        if (cls) s = *auroc(lva, preds[m]);
        else s = mean_absolute_error(yva, preds[m]);
        total[members[m]] += s;
      }
    }
  }
  if (all_skipped) {
    for (auto& c : res.candidates) c.skipped = true;
    throw DataError("grid search: every candidate skipped (an inner fold lacks a usable class mix)");
  }
  int best = -1;
  for (std::size_t c = 0; c < cands.size(); ++c) {
    res.candidates[c].score = total[c] / folds;
    if (best < 0) {
      best = static_cast<int>(c);
      continue;
    }
    const double cur = res.candidates[static_cast<std::size_t>(best)].score;
    if (cls ? res.candidates[c].score > cur : res.candidates[c].score < cur) best = static_cast<int>(c);
  }
  res.best = cands[static_cast<std::size_t>(best)];
  res.best_score = res.candidates[static_cast<std::size_t>(best)].score;
  res.cross_validated = true;
  return res;
}

}  // namespace facepsy
