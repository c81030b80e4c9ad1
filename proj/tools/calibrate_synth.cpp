// Monte-Carlo check of the synthetic generator: recovery of planted effects
// and the null behaviour of untouched channels across seeds.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "facepsy/eval.hpp"
#include "facepsy/synth.hpp"

using namespace facepsy;

int main(int argc, char** argv) {
  CLI::App app{"synthetic generator calibration"};
  std::uint64_t first = 1;
  int seeds = 20;
  double d = 1.0;
  std::size_t top = 15;
  std::size_t dump = 0;
  bool run_eval = false;
  bool single = false;
  std::size_t pca_cap = 600;
  app.add_option("--first-seed", first);
  app.add_option("--seeds", seeds);
  app.add_option("--d", d);
  app.add_option("--top", top);
  app.add_option("--dump", dump, "print the strongest N features per seed");
  app.add_flag("--evaluate", run_eval, "also time LOPDO and LOPO on each seed");
  app.add_flag("--single", single, "single default candidate instead of the grid");
  app.add_option("--pca-frames", pca_cap);
  CLI11_PARSE(app, argc, argv);

  const auto& planted = planted_effects();
  const auto& coupled = coupled_channels();
  const std::set<std::string> coupled_set(coupled.begin(), coupled.end());
  const auto pairs = build_pair_list(LandmarkMap::standard());
  std::map<std::string, int> sign_ok;
  std::map<std::string, double> r_sum;
  std::map<std::string, int> in_top;
  int top_hits_ge6 = 0;
  std::size_t null_feats = 0, null_hits = 0;
  std::size_t morning_feats = 0, morning_hits = 0;
  std::map<std::string, int> worst_null;

  for (int s = 0; s < seeds; ++s) {
    const std::uint64_t seed = first + static_cast<std::uint64_t>(s);
    SynthConfig cfg;
    cfg.effect_size = d;
    const auto cohort = generate_cohort(cfg, seed);
    std::vector<FrameTable> tables;
    for (const auto& f : cohort.frames) tables.push_back(prepare_frames(f));
    const auto labels = label_cohort(cohort.phq);
    const auto ds = make_dataset(std::move(tables), labels);
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), 0);
    const auto pca = fit_instance_pca(ds, all, pairs, kIvaComponents, 600);
    const auto x = instance_features(ds, all, &pca, pairs);
    std::vector<int> y;
    for (const auto& i : ds.instances) y.push_back(i.label);
    ScreenOptions loose;
    loose.alpha = 2.0;
    loose.r_min = 0.0;
    const auto res = screen_features(x, y, feature_names(), loose);
    std::map<std::string, std::pair<double, std::size_t>> rank;
    for (std::size_t k = 0; k < res.rows.size(); ++k) rank[res.rows[k].feature] = {res.rows[k].r, k};
    int hits = 0;
    std::string line;
    for (const auto& e : planted) {
      const auto [r, k] = rank.count(e.feature) ? rank[e.feature] : std::pair<double, std::size_t>{0.0, 9999};
      if ((r > 0) == (e.sign > 0) && r != 0.0) ++sign_ok[e.feature];
      r_sum[e.feature] += r;
      if (k < top) {
        ++hits;
        ++in_top[e.feature];
      }
      line += fmt::format(" {:+.2f}#{}", r, k);
    }
    if (hits >= 6) ++top_hits_ge6;
    for (const auto& row : res.rows) {
      const auto ch = channel_inventory()[channel_of_feature(row.column)];
      if (coupled_set.count(ch)) continue;
      const bool morning = row.feature.ends_with("_morning");
      const bool hit = std::fabs(row.r) >= 0.2 && row.p < 0.05;
      if (morning) {
        ++morning_feats;
        morning_hits += hit;
      } else {
        ++null_feats;
        null_hits += hit;
        if (hit) ++worst_null[row.feature];
      }
    }
    std::size_t dep = 0;
    for (int v : y) dep += v;
    fmt::print("seed {:3d} n={} dep={} top{}={}{}  top: {} {:+.2f} / {} {:+.2f} / {} {:+.2f}\n", seed, y.size(), dep,
               top, hits, line, res.rows[0].feature, res.rows[0].r, res.rows[1].feature, res.rows[1].r,
               res.rows[2].feature, res.rows[2].r);
    for (std::size_t k = 0; k < std::min(dump, res.rows.size()); ++k)
      fmt::print("    {:2d} {:45s} {:+.3f}\n", k, res.rows[k].feature, res.rows[k].r);
    std::fflush(stdout);
    if (run_eval) {
      EvalOptions opt;
      opt.seed = seed;
      opt.max_pca_frames = pca_cap;
      if (single) opt.grid = Grid::single(Hyperparameters{});
      for (auto scheme : {Scheme::lopdo, Scheme::lopo}) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = evaluate(ds, scheme, opt);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto& a = r.report.aggregate;
        fmt::print("    {} auroc={:.3f} acc={:.3f} f1={:.3f} mae={:.2f} folds={} skipped={} n={} {:.1f}s\n",
                   to_string(scheme), a.auroc.value_or(-1.0), a.classification.accuracy, a.classification.f1, a.mae,
                   r.report.folds.size(), r.report.skipped.size(), a.n, secs);
        std::fflush(stdout);
      }
    }
  }
  fmt::print("\nplanted feature                          sign-ok  mean r   in-top{}\n", top);
  for (const auto& e : planted)
    fmt::print("{:40s} {:3d}/{:<3d} {:+.3f}  {}\n", e.feature, sign_ok[e.feature], seeds, r_sum[e.feature] / seeds,
               in_top[e.feature]);
  fmt::print("seeds with >= 6 planted in top {}: {}/{}\n", top, top_hits_ge6, seeds);
  fmt::print("untouched channels, non-morning: {}/{} features with |r|>=0.2 and p<0.05 ({:.4f})\n", null_hits,
             null_feats, null_feats ? double(null_hits) / double(null_feats) : 0.0);
  fmt::print("untouched channels, morning (session-count coupled): {}/{} ({:.4f})\n", morning_hits, morning_feats,
             morning_feats ? double(morning_hits) / double(morning_feats) : 0.0);
  for (const auto& [f, c] : worst_null)
    if (c > 1) fmt::print("  recurring null hit: {} in {} seeds\n", f, c);
  return 0;
}
