#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <omp.h>

#include "facepsy/audit.hpp"
#include "facepsy/eval.hpp"
#include "facepsy/metrics.hpp"
#include "support.hpp"

using namespace facepsy;
using namespace facepsy::testing;

namespace {

EvalOptions quick_options(SubsetName subset) {
  EvalOptions o;
  o.subset = subset;
  o.grid = Grid::single({.learning_rate = 0.1, .trees = 20, .max_leaves = 7, .min_samples_leaf = 5});
  o.seed = 3;
  return o;
}

const EvalResult& lopdo_eop() {
  static const EvalResult r = lopdo_evaluate(small_dataset(), quick_options(SubsetName::EOP));
  return r;
}

}  // namespace

TEST_CASE("auroc oracles") {
  const std::vector<int> y = {1, 0, 1, 0};
  const std::vector<double> s = {0.9, 0.8, 0.4, 0.3};
  CHECK(*auroc(y, s) == doctest::Approx(0.75));
  CHECK(*auroc(y, std::vector<double>{0.5, 0.5, 0.5, 0.5}) == 0.5);
  CHECK(*auroc(y, std::vector<double>{0.9, 0.1, 0.8, 0.2}) == 1.0);
  CHECK(*auroc(y, std::vector<double>{0.1, 0.9, 0.2, 0.8}) == 0.0);
  CHECK_FALSE(auroc(std::vector<int>{1, 1}, std::vector<double>{0.2, 0.3}).has_value());
}

TEST_CASE("property: auroc equals the brute-force pair count") {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const int n = uniform_int(rng, 2, 40);
    std::vector<int> y(n);
    std::vector<double> s(n);
    for (int i = 0; i < n; ++i) {
      y[i] = uniform(rng) < 0.4;
      s[i] = uniform_int(rng, 0, 6) / 6.0;
    }
    double num = 0, den = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (y[i] && !y[j]) {
          den += 1;
          num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    const auto a = auroc(y, s);
    if (den == 0) {
      CHECK_FALSE(a.has_value());
    } else {
      REQUIRE(a.has_value());
      CHECK(*a == doctest::Approx(num / den).epsilon(1e-12));
    }
  }
}

TEST_CASE("classification metrics") {
  // TP 2, FP 3, FN 0, TN 5
  const std::vector<int> y = {1, 1, 0, 0, 0, 0, 0, 0, 0, 0};
  const std::vector<double> s = {0.9, 0.5, 0.7, 0.6, 0.51, 0.1, 0.2, 0.3, 0.4, 0.49};
  const auto m = classification_metrics(y, s);
  CHECK(m.tp == 2);
  CHECK(m.fp == 3);
  CHECK(m.fn == 0);
  CHECK(m.tn == 5);
  CHECK(m.precision == doctest::Approx(0.4));
  CHECK(m.recall == 1.0);
  CHECK(m.f1 == doctest::Approx(0.5714).epsilon(1e-4));
  CHECK(m.accuracy == doctest::Approx(0.7));

  const auto perfect = classification_metrics(y, std::vector<double>{1, 1, 0, 0, 0, 0, 0, 0, 0, 0});
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);

  const auto none = classification_metrics(y, std::vector<double>(10, 0.1));
  CHECK(none.recall == 0.0);
  CHECK(none.precision == 0.0);
  CHECK(none.precision_undefined);
  CHECK_FALSE(none.recall_undefined);
}

TEST_CASE("roc curve and MAE") {
  const std::vector<int> y = {1, 0, 1, 0};
  const std::vector<double> s = {0.9, 0.8, 0.4, 0.3};
  const auto roc = roc_curve(y, s);
  REQUIRE(roc.size() == 5);
  CHECK(roc.front().fpr == 0.0);
  CHECK(roc.front().tpr == 0.0);
  CHECK(roc[1].tpr == 0.5);
  CHECK(roc[2].fpr == 0.5);
  CHECK(roc.back().fpr == 1.0);
  CHECK(roc.back().tpr == 1.0);
  for (std::size_t i = 1; i < roc.size(); ++i) {
    CHECK(roc[i].fpr >= roc[i - 1].fpr);
    CHECK(roc[i].tpr >= roc[i - 1].tpr);
  }
  CHECK(mean_absolute_error(std::vector<double>{1, 2, 3}, std::vector<double>{2, 2, 1}) == 1.0);
}

TEST_CASE("subset cardinalities") {
  const std::map<SubsetName, std::size_t> want = {{SubsetName::EOP, 64}, {SubsetName::SP, 32}, {SubsetName::HEA, 96},
                                                  {SubsetName::AU, 384}, {SubsetName::EAR, 64}, {SubsetName::IVA, 640},
                                                  {SubsetName::ALL, 1280}};
  for (const auto& [name, n] : want) {
    const auto s = resolve_subset(name);
    CHECK(s.columns.size() == n);
    CHECK(std::is_sorted(s.columns.begin(), s.columns.end()));
    CHECK(expected_cardinality(name) == n);
    CHECK(parse_subset(to_string(name)) == name);
  }
  for (auto f : resolve_subset(SubsetName::IVA).columns) CHECK(channel_of_feature(f) >= kIvaScoreChannel);
  CHECK(subset_uses_iva(SubsetName::IVA));
  CHECK_FALSE(subset_uses_iva(SubsetName::HEA));
  CHECK_THROWS(resolve_subset(SubsetName::TSF));
  CHECK_THROWS(resolve_subset(SubsetName::FS));
  CHECK_THROWS(parse_subset("XYZ"));

  ScreenResult screen;
  screen.rows.push_back({.feature = "a", .column = 17});
  screen.rows.push_back({.feature = "b", .column = 3});
  CHECK(resolve_subset(SubsetName::TSF, &screen).columns == std::vector<std::size_t>{17, 3});
}

TEST_CASE("LOPO: one fold per participant, audit clean") {
  const auto& ds = small_dataset();
  const auto r = lopo_evaluate(ds, quick_options(SubsetName::IVA));
  CHECK(r.manifest.folds.size() == ds.participants().size());
  CHECK(r.report.folds.size() + r.report.skipped.size() == ds.participants().size());
  const auto audit = audit_manifest(manifest_to_json(r.manifest));
  CHECK(audit.passed());
  CHECK(audit.folds_checked == r.manifest.folds.size());
  CHECK(audit.rows_checked > 0);
  // The PCA stage only ever sees training days.
  for (const auto& f : r.manifest.folds)
    if (f.skipped.empty()) CHECK(f.stages.count("pca_days") == 1);
  CHECK(r.report.aggregate.n == ds.size());
}

TEST_CASE("LOPDO: training dates precede the test date") {
  const auto& ds = small_dataset();
  const auto& r = lopdo_eop();
  const auto audit = audit_manifest(manifest_to_json(r.manifest));
  CHECK(audit.passed());
  std::size_t tested = 0;
  for (const auto& f : r.manifest.folds) {
    REQUIRE_FALSE(f.test.empty());
    const LocalDate d = ds.instances[f.test[0]].date;
    for (auto t : f.test) CHECK(ds.instances[t].date == d);
    if (!f.skipped.empty()) continue;
    tested += f.test.size();
    for (const auto& [stage, rows] : f.stages)
      for (auto i : rows) CHECK(ds.instances[i].date < d);
  }
  CHECK(tested == r.report.aggregate.n);

  // The earliest day has nothing before it.
  const auto first = std::min_element(ds.instances.begin(), ds.instances.end(),
                                      [](const Instance& a, const Instance& b) { return a.date < b.date; });
  bool found = false;
  for (const auto& s : r.report.skipped)
    if (std::find(s.tests.begin(), s.tests.end(), first->id()) != s.tests.end()) found = true;
  CHECK(found);
}

TEST_CASE("LOPDO per-participant rule") {
  auto opt = quick_options(SubsetName::HEA);
  opt.time_rule = TimeRule::per_participant;
  const auto ds = small_dataset().first_days(6);
  const auto r = lopdo_evaluate(ds, opt);
  CHECK(r.manifest.folds.size() == ds.size());
  CHECK(audit_manifest(manifest_to_json(r.manifest)).passed());
  for (const auto& f : r.manifest.folds) {
    if (!f.skipped.empty()) continue;
    const auto& t = ds.instances[f.test[0]];
    for (auto i : f.stages.at("model")) {
      const auto& in = ds.instances[i];
      if (in.participant_id == t.participant_id) CHECK(in.date < t.date);
    }
  }
}

TEST_CASE("audit catches a planted leak") {
  auto m = lopdo_eop().manifest;
  auto it = std::find_if(m.folds.begin(), m.folds.end(), [](const ManifestFold& f) { return f.skipped.empty(); });
  REQUIRE(it != m.folds.end());
  it->stages["model"].push_back(it->test[0]);
  const auto a = audit_manifest(manifest_to_json(m));
  CHECK_FALSE(a.passed());
  CHECK(a.violations[0].fold == it->fold_id);
}

TEST_CASE("aggregates are recomputable from stored predictions") {
  const auto& rep = lopdo_eop().report;
  std::vector<int> y;
  std::vector<double> s, t, pt;
  for (const auto& f : rep.folds)
    for (const auto& p : f.tests) {
      y.push_back(p.truth);
      s.push_back(p.probability);
      t.push_back(p.target);
      pt.push_back(p.predicted_target);
    }
  CHECK(rep.aggregate.n == y.size());
  CHECK(rep.aggregate.auroc == auroc(y, s));
  const auto cm = classification_metrics(y, s, rep.options.threshold);
  CHECK(rep.aggregate.classification.accuracy == cm.accuracy);
  CHECK(rep.aggregate.classification.f1 == cm.f1);
  CHECK(rep.aggregate.mae == mean_absolute_error(t, pt));
  CHECK(aggregate_predictions(rep.folds, rep.options.threshold) == rep.aggregate);
}

TEST_CASE("report JSON round-trip") {
  auto rep = lopdo_eop().report;
  rep.lineage = {"abc", "def", 3};
  const auto text = report_to_json(rep);
  const auto back = report_from_json(text);
  CHECK(back.scheme == rep.scheme);
  CHECK(back.subset == rep.subset);
  CHECK(back.lineage == rep.lineage);
  CHECK(back.folds.size() == rep.folds.size());
  CHECK(back.skipped.size() == rep.skipped.size());
  CHECK(back.aggregate == rep.aggregate);
  CHECK(aggregate_predictions(back.folds, back.options.threshold) == rep.aggregate);
  CHECK(report_to_json(back) == text);
  CHECK_THROWS(report_from_json("{\"nope\": 1}"));
}

TEST_CASE("reports are identical across thread counts") {
  const auto& ds = small_dataset();
  const auto opt = quick_options(SubsetName::IVA);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto a = lopo_evaluate(ds, opt);
  omp_set_num_threads(2);
  const auto b = lopo_evaluate(ds, opt);
  omp_set_num_threads(saved);
  CHECK(report_to_json(a.report) == report_to_json(b.report));
  CHECK(manifest_to_json(a.manifest) == manifest_to_json(b.manifest));
}

TEST_CASE("FS and TSF subsets select inside each fold") {
  const auto ds = small_dataset().first_days(8);
  for (SubsetName s : {SubsetName::FS, SubsetName::TSF}) {
    const auto r = lopo_evaluate(ds, quick_options(s));
    CHECK(audit_manifest(manifest_to_json(r.manifest)).passed());
    for (const auto& f : r.manifest.folds)
      if (f.skipped.empty()) CHECK(f.stages.count("selection") == 1);
    for (const auto& f : r.report.folds) CHECK_FALSE(f.features.empty());
  }
}

TEST_CASE("min-days curve") {
  const auto& ds = small_dataset();
  const auto c = min_days_curve(ds, quick_options(SubsetName::EOP), 3);
  REQUIRE(c.points.size() == 3);
  for (std::size_t k = 1; k <= 3; ++k) {
    const auto& p = c.points[k - 1];
    CHECK(p.k == k);
    CHECK(p.instances == ds.first_days(k).size());
    CHECK(p.folds + p.skipped == p.instances);
  }
  const auto back = curve_from_json(curve_to_json(c));
  CHECK(curve_to_json(back) == curve_to_json(c));

  // One participant on day one: nothing to train on.
  const auto& c0 = small_cohort();
  std::vector<FrameTable> one;
  for (const auto& f : c0.frames)
    if (!f.empty()) {
      one.push_back(prepare_frames(f));
      break;
    }
  const auto solo = make_dataset(std::move(one), label_cohort(c0.phq));
  REQUIRE(solo.participants().size() == 1);
  const auto sc = min_days_curve(solo, quick_options(SubsetName::EOP), 1);
  CHECK_FALSE(sc.points[0].auroc.has_value());
  CHECK(sc.points[0].folds == 0);
  CHECK_THROWS(min_days_curve(solo, quick_options(SubsetName::EOP), 0));
}

TEST_CASE("options JSON is canonical") {
  auto a = quick_options(SubsetName::EOP);
  auto b = quick_options(SubsetName::EOP);
  CHECK(options_to_json(a) == options_to_json(b));
  b.seed = 4;
  CHECK(options_to_json(a) != options_to_json(b));
  b = a;
  b.grid.trees = {21};
  CHECK(options_to_json(a) != options_to_json(b));
}
