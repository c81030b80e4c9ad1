// Parallel and fused kernels against their serial references.

#include <random>

#include <benchmark/benchmark.h>

#include "facepsy/featurize.hpp"
#include "facepsy/geometry.hpp"
#include "facepsy/learn.hpp"
#include "facepsy/stats.hpp"
#include "facepsy/synth.hpp"

using namespace facepsy;

namespace {

RowMatrix noise(std::size_t n, std::size_t p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  RowMatrix x(n, p);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = z(rng);
  return x;
}

std::vector<int> labels_for(const RowMatrix& x) {
  std::vector<int> y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) y[i] = x(i, 0) + 0.5 * x(i, 1) > 0;
  return y;
}

std::vector<Point> face(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<Point> pts;
  for (const auto& p : neutral_face_template()) pts.push_back({p[0] + 2 * z(rng), p[1] + 2 * z(rng)});
  return pts;
}

void BM_Screen(benchmark::State& st) {
  const auto x = noise(600, kDayFeatureCount, 1);
  const auto y = labels_for(x);
  const auto exec = st.range(0) ? Execution::parallel : Execution::serial;
  for (auto _ : st) benchmark::DoNotOptimize(screen_features(x, y, feature_names(), {.exec = exec}));
  st.SetLabel(st.range(0) ? "parallel" : "serial");
}
BENCHMARK(BM_Screen)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_IvaRaw(benchmark::State& st) {
  const auto pts = face(2);
  const auto pairs = build_pair_list(LandmarkMap::standard());
  for (auto _ : st) benchmark::DoNotOptimize(compute_iva_raw(pts, pairs));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(pairs.size()));
}
BENCHMARK(BM_IvaRaw)->Unit(benchmark::kMicrosecond);

void BM_IvaBearings(benchmark::State& st) {
  const auto pts = face(2);
  const auto pairs = build_pair_list(LandmarkMap::standard());
  for (auto _ : st) benchmark::DoNotOptimize(compute_iva(pts, pairs));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(pairs.size()));
}
BENCHMARK(BM_IvaBearings)->Unit(benchmark::kMicrosecond);

const Hyperparameters kHp{.learning_rate = 0.1, .trees = 20, .max_leaves = 31, .min_samples_leaf = 20};

void BM_GbdtFused(benchmark::State& st) {
  const auto x = noise(static_cast<std::size_t>(st.range(0)), 256, 3);
  const auto y = labels_for(x);
  const std::vector<double> yd(y.begin(), y.end());
  for (auto _ : st) benchmark::DoNotOptimize(fit_gbdt(x, yd, Task::binary_logistic, kHp));
}
BENCHMARK(BM_GbdtFused)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_GbdtReference(benchmark::State& st) {
  const auto x = noise(static_cast<std::size_t>(st.range(0)), 256, 3);
  const auto y = labels_for(x);
  const std::vector<double> yd(y.begin(), y.end());
  for (auto _ : st) benchmark::DoNotOptimize(fit_gbdt_reference(x, yd, Task::binary_logistic, kHp));
}
BENCHMARK(BM_GbdtReference)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
