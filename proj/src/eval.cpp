#include "facepsy/eval.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <set>

#include <json.hpp>

namespace facepsy {

using ojson = nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, 9> kSubsetNames = {"EOP", "SP", "HEA", "AU", "EAR", "IVA", "TSF", "FS", "ALL"};

// Channel-name prefixes defining each fixed subset.
std::vector<std::string_view> subset_prefixes(SubsetName s) {
  switch (s) {
    case SubsetName::EOP: return {"leftEyeOpenProbability", "rightEyeOpenProbability"};
    case SubsetName::SP: return {"smilingProbability"};
    case SubsetName::HEA: return {"headEulerAngle_"};
    case SubsetName::AU: return {"AU"};
    case SubsetName::EAR: return {"ear_"};
    case SubsetName::IVA: return {"iva_"};
    default: return {};
  }
}

}  // namespace

std::string_view to_string(SubsetName s) { return kSubsetNames[static_cast<std::size_t>(s)]; }

SubsetName parse_subset(std::string_view s) {
  for (std::size_t i = 0; i < kSubsetNames.size(); ++i)
    if (kSubsetNames[i] == s) return static_cast<SubsetName>(i);
  throw UsageError("unknown feature subset '" + std::string(s) + "'");
}

std::optional<std::size_t> expected_cardinality(SubsetName s) {
  switch (s) {
    case SubsetName::EOP: return 64;
    case SubsetName::SP: return 32;
    case SubsetName::HEA: return 96;
    case SubsetName::AU: return 384;
    case SubsetName::EAR: return 64;
    case SubsetName::IVA: return 640;
    case SubsetName::ALL: return kDayFeatureCount;
    default: return std::nullopt;
  }
}

bool subset_uses_iva(SubsetName s) {
  return s == SubsetName::IVA || s == SubsetName::ALL || s == SubsetName::TSF || s == SubsetName::FS;
}

FeatureSubset resolve_subset(SubsetName name, const ScreenResult* screen, const GiniSelection* selection) {
  FeatureSubset out{name, {}};
  if (name == SubsetName::TSF) {
    if (!screen) throw UsageError("TSF subset needs a screening result");
    for (const auto& r : screen->rows) out.columns.push_back(r.column);
    return out;
  }
  if (name == SubsetName::FS) {
    if (!selection) throw UsageError("FS subset needs a Gini selection");
    out.columns = selection->selected;
    return out;
  }
  const auto& names = feature_names();
  const auto& channels = channel_inventory();
  for (std::size_t f = 0; f < names.size(); ++f) {
    if (name == SubsetName::ALL) {
      out.columns.push_back(f);
      continue;
    }
    const auto& ch = channels[channel_of_feature(f)];
    for (auto p : subset_prefixes(name))
      if (ch.starts_with(p)) {
        out.columns.push_back(f);
        break;
      }
  }
  const auto want = *expected_cardinality(name);
  if (out.columns.size() != want)
    throw InvariantError("subset " + std::string(to_string(name)) + " resolved to " +
                         std::to_string(out.columns.size()) + " columns, expected " + std::to_string(want));
  return out;
}

std::string_view to_string(Scheme s) { return s == Scheme::lopo ? "lopo" : "lopdo"; }

Scheme parse_scheme(std::string_view s) {
  if (s == "lopo") return Scheme::lopo;
  if (s == "lopdo") return Scheme::lopdo;
  throw UsageError("unknown scheme '" + std::string(s) + "'");
}

std::string_view to_string(TimeRule r) {
  return r == TimeRule::calendar_global ? "calendar_global" : "per_participant";
}

// ---------------------------------------------------------------------------
// Dataset

std::vector<std::string> EvalDataset::participants() const {
  std::vector<std::string> out;
  for (const auto& i : instances)
    if (out.empty() || out.back() != i.participant_id) out.push_back(i.participant_id);
  return out;
}

EvalDataset EvalDataset::first_days(std::size_t k) const {
  EvalDataset out;
  out.tables = tables;
  std::vector<Eigen::Index> keep;
  std::size_t run = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    run = (i > 0 && instances[i].participant_id == instances[i - 1].participant_id) ? run + 1 : 0;
    if (run < k) keep.push_back(static_cast<Eigen::Index>(i));
  }
  out.static_features.resize(static_cast<Eigen::Index>(keep.size()), static_features.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    out.instances.push_back(instances[static_cast<std::size_t>(keep[r])]);
    out.static_features.row(static_cast<Eigen::Index>(r)) = static_features.row(keep[r]);
  }
  return out;
}

EvalDataset make_dataset(std::vector<FrameTable> tables, std::span<const EpisodeLabel> labels) {
  std::sort(tables.begin(), tables.end(),
            [](const FrameTable& a, const FrameTable& b) { return a.participant_id < b.participant_id; });
  for (std::size_t i = 1; i < tables.size(); ++i)
    if (tables[i].participant_id == tables[i - 1].participant_id)
      throw DataError("participant '" + tables[i].participant_id + "' appears in more than one frame table");
  std::map<std::string, std::vector<const EpisodeLabel*>> by;
  for (const auto& l : labels) by[l.participant_id].push_back(&l);

  EvalDataset ds;
  std::vector<std::vector<double>> rows;
  for (std::size_t t = 0; t < tables.size(); ++t) {
    const auto& tab = tables[t];
    const auto it = by.find(tab.participant_id);
    for (std::size_t d = 0; d < tab.days.size(); ++d) {
      const EpisodeLabel* hit = nullptr;
      if (it != by.end())
        for (const auto* l : it->second)
          if (l->contains(tab.days[d])) {
            if (hit) throw DataError("overlapping episode windows for participant '" + tab.participant_id + "'");
            hit = l;
          }
      if (!hit) {
        ++ds.unlabeled_days;
        continue;
      }
      ds.instances.push_back({t, d, tab.participant_id, tab.days[d], hit->depressive ? 1 : 0, hit->target});
      rows.push_back(static_day_features(tab, d));
    }
  }
  ds.static_features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kDayFeatureCount));
  for (std::size_t r = 0; r < rows.size(); ++r)
    ds.static_features.row(static_cast<Eigen::Index>(r)) =
        Eigen::Map<const Eigen::RowVectorXd>(rows[r].data(), static_cast<Eigen::Index>(kDayFeatureCount));
  ds.tables = std::make_shared<const std::vector<FrameTable>>(std::move(tables));
  return ds;
}

// ---------------------------------------------------------------------------
// Metrics

bool AggregateMetrics::operator==(const AggregateMetrics& o) const {
  const auto& a = classification;
  const auto& b = o.classification;
  return n == o.n && auroc == o.auroc && mae == o.mae && median_feature_count == o.median_feature_count &&
         a.accuracy == b.accuracy && a.precision == b.precision && a.recall == b.recall && a.f1 == b.f1 &&
         a.tp == b.tp && a.fp == b.fp && a.fn == b.fn && a.tn == b.tn &&
         a.precision_undefined == b.precision_undefined && a.recall_undefined == b.recall_undefined &&
         a.f1_undefined == b.f1_undefined;
}

AggregateMetrics aggregate_predictions(std::span<const FoldRecord> folds, double threshold) {
  std::vector<int> y;
  std::vector<double> p, t, pt;
  std::vector<double> counts;
  for (const auto& f : folds) {
    counts.push_back(static_cast<double>(f.features.size()));
    for (const auto& tp : f.tests) {
      y.push_back(tp.truth);
      p.push_back(tp.probability);
      t.push_back(tp.target);
      pt.push_back(tp.predicted_target);
    }
  }
  AggregateMetrics m;
  m.n = y.size();
  if (y.empty()) {
    m.mae = kMissing;
    m.median_feature_count = kMissing;
    return m;
  }
  m.auroc = auroc(y, p);
  m.classification = classification_metrics(y, p, threshold);
  m.mae = mean_absolute_error(t, pt);
  std::sort(counts.begin(), counts.end());
  const std::size_t h = counts.size() / 2;
  m.median_feature_count = counts.size() % 2 ? counts[h] : (counts[h - 1] + counts[h]) / 2.0;
  return m;
}

// ---------------------------------------------------------------------------
// Fold execution

namespace {

struct FoldPlan {
  std::string id;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::uint64_t stream = 0;
};

struct FoldOutcome {
  bool evaluated = false;
  FoldRecord record;
  SkippedFold skipped;
  ManifestFold manifest;
  std::vector<std::string> log;
};

}  // namespace

RowMatrix instance_features(const EvalDataset& ds, std::span<const std::size_t> rows, const PcaModel* pca,
                        const IvaPairList& pairs) {
  RowMatrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kDayFeatureCount));
  for (std::size_t r = 0; r < rows.size(); ++r)
    x.row(static_cast<Eigen::Index>(r)) = ds.static_features.row(static_cast<Eigen::Index>(rows[r]));
  if (!pca) return x;
  std::map<std::size_t, std::vector<std::size_t>> by_table;  // table -> positions in rows
  for (std::size_t r = 0; r < rows.size(); ++r) by_table[ds.instances[rows[r]].table].push_back(r);
  for (const auto& [t, positions] : by_table) {
    const auto& tab = (*ds.tables)[t];
    std::vector<std::size_t> days;
    for (auto r : positions) days.push_back(ds.instances[rows[r]].day);
    const auto sessions = sessions_for_days(tab, days);
    const IvaChannels iva = compute_iva_channels(tab, *pca, pairs, sessions);
    for (auto r : positions)
      fill_iva_features(tab, ds.instances[rows[r]].day, iva,
                        std::span<double>(x.row(static_cast<Eigen::Index>(r)).data(), kDayFeatureCount));
  }
  return x;
}

PcaModel fit_instance_pca(const EvalDataset& ds, std::span<const std::size_t> rows, const IvaPairList& pairs,
                          std::size_t k, std::size_t max_frames) {
  const auto& tables = *ds.tables;
  std::vector<std::vector<int>> frames(tables.size());
  for (auto i : rows) {
    const auto& inst = ds.instances[i];
    const auto& df = tables[inst.table].day_frames[inst.day];
    frames[inst.table].insert(frames[inst.table].end(), df.begin(), df.end());
  }
  for (auto& f : frames) std::sort(f.begin(), f.end());
  const RowMatrix angles = pca_training_rows(tables, frames, pairs, max_frames);
  if (static_cast<std::size_t>(angles.rows()) <= k) throw DataError("too few landmark frames to fit PCA");
  return fit_pca(angles, k);
}

namespace {

RowMatrix take_columns(const RowMatrix& x, Eigen::Index row0, Eigen::Index nrows, std::span<const std::size_t> cols) {
  RowMatrix out(nrows, static_cast<Eigen::Index>(cols.size()));
  for (Eigen::Index i = 0; i < nrows; ++i)
    for (std::size_t c = 0; c < cols.size(); ++c)
      out(i, static_cast<Eigen::Index>(c)) = x(row0 + i, static_cast<Eigen::Index>(cols[c]));
  return out;
}

FoldOutcome run_fold(const EvalDataset& ds, const FoldPlan& plan, const EvalOptions& opt) {
  FoldOutcome out;
  out.manifest.fold_id = plan.id;
  out.manifest.test = plan.test;
  auto skip = [&](std::string reason) {
    out.evaluated = false;
    out.skipped.fold_id = plan.id;
    out.skipped.reason = reason;
    for (auto i : plan.test) out.skipped.tests.push_back(ds.instances[i].id());
    out.manifest.skipped = reason;
    out.log.push_back("fold " + plan.id + " skipped: " + reason);
    return out;
  };

  const auto& train = plan.train;
  std::vector<int> labels;
  std::vector<double> ycls, yreg;
  for (auto i : train) {
    labels.push_back(ds.instances[i].label);
    ycls.push_back(ds.instances[i].label);
    yreg.push_back(ds.instances[i].target);
  }
  if (train.size() < opt.min_train_rows)
    return skip("training rows " + std::to_string(train.size()) + " below minimum " + std::to_string(opt.min_train_rows));
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (pos == 0 || pos == labels.size()) return skip("single-class training set");
  if (opt.smote.enabled && std::min(pos, labels.size() - pos) < 2 && pos * 2 != labels.size())
    return skip("minority class has fewer than two training rows");

  const std::uint64_t fold_seed = derive_seed(opt.seed, plan.stream);
  std::optional<PcaModel> pca;
  if (subset_uses_iva(opt.subset)) {
    try {
      pca = fit_instance_pca(ds, train, opt.pairs, opt.pca_components, opt.max_pca_frames);
    } catch (const DataError& e) {
      return skip(e.what());
    }
    out.manifest.stages["pca_days"] = train;
  }

  std::vector<std::size_t> rows = train;
  rows.insert(rows.end(), plan.test.begin(), plan.test.end());
  const RowMatrix x = instance_features(ds, rows, pca ? &*pca : nullptr, opt.pairs);
  const auto ntr = static_cast<Eigen::Index>(train.size());
  const auto nte = static_cast<Eigen::Index>(plan.test.size());
  const RowMatrix xtr_all = x.topRows(ntr);

  FeatureSubset subset;
  if (opt.subset == SubsetName::TSF) {
    auto so = opt.screen;
    so.exec = Execution::serial;
    auto screen = screen_features(xtr_all, labels, feature_names(), so);
    out.manifest.stages["selection"] = train;
    if (screen.rows.empty()) {
      auto loose = opt.screen;
      loose.exec = Execution::serial;
      loose.alpha = 2.0;
      loose.r_min = 0.0;
      auto all = screen_features(xtr_all, labels, feature_names(), loose);
      if (all.rows.empty()) return skip("no feature has a defined correlation");
      screen.rows.push_back(all.rows.front());
      out.log.push_back("fold " + plan.id + ": no feature passed screening; using top |r| feature " +
                        all.rows.front().feature);
    }
    subset = resolve_subset(SubsetName::TSF, &screen);
  } else if (opt.subset == SubsetName::FS) {
    const auto pre = fit_preprocessor(xtr_all);
    const auto sel = gini_select(pre.apply(xtr_all), labels, opt.cart_min_samples_leaf);
    out.manifest.stages["selection"] = train;
    if (sel.selected.empty()) return skip("Gini selection is empty");
    subset = resolve_subset(SubsetName::FS, nullptr, &sel);
  } else {
    subset = resolve_subset(opt.subset);
  }

  const RowMatrix xtr = take_columns(x, 0, ntr, subset.columns);
  const RowMatrix xte = take_columns(x, ntr, nte, subset.columns);
  FittedPipeline clf, reg;
  GridSearchResult gs_c, gs_r;
  try {
    gs_c = grid_search(xtr, ycls, labels, Task::binary_logistic, opt.grid, opt.smote, derive_seed(fold_seed, 1));
    clf = fit_pipeline(xtr, ycls, labels, Task::binary_logistic, gs_c.best, opt.smote, derive_seed(fold_seed, 2));
    gs_r = grid_search(xtr, yreg, labels, Task::l2_regression, opt.grid, opt.smote, derive_seed(fold_seed, 3));
    reg = fit_pipeline(xtr, yreg, labels, Task::l2_regression, gs_r.best, opt.smote, derive_seed(fold_seed, 4));
  } catch (const DataError& e) {
    return skip(e.what());
  }
  out.manifest.stages["preprocessor"] = train;
  if (opt.smote.enabled) out.manifest.stages["smote"] = train;
  out.manifest.stages["grid_search"] = train;
  out.manifest.stages["model"] = train;

  const auto prob = clf.predict(xte);
  const auto val = reg.predict(xte);
  out.evaluated = true;
  auto& rec = out.record;
  rec.fold_id = plan.id;
  rec.train_rows = train.size();
  rec.classifier_hp = gs_c.best;
  rec.regressor_hp = gs_r.best;
  for (auto c : subset.columns) rec.features.push_back(feature_names()[c]);
  for (std::size_t j = 0; j < plan.test.size(); ++j) {
    const auto& inst = ds.instances[plan.test[j]];
    rec.tests.push_back({plan.test[j], inst.id(), inst.label, prob[j], inst.target, val[j]});
  }
  return out;
}

EvalResult run_plans(const EvalDataset& ds, Scheme scheme, const std::vector<FoldPlan>& plans, const EvalOptions& opt) {
  std::vector<FoldOutcome> outcomes(plans.size());
  std::vector<std::exception_ptr> errors(plans.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < plans.size(); ++i) {
    try {
      outcomes[i] = run_fold(ds, plans[i], opt);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  EvalResult res;
  auto& rep = res.report;
  rep.scheme = scheme;
  rep.subset = opt.subset;
  rep.options = opt;
  rep.lineage.seed = opt.seed;
  res.manifest.scheme = scheme;
  res.manifest.time_rule = opt.time_rule;
  for (const auto& inst : ds.instances) res.manifest.instances.emplace_back(inst.participant_id, inst.date);
  for (auto& o : outcomes) {
    if (o.evaluated) rep.folds.push_back(std::move(o.record));
    else rep.skipped.push_back(std::move(o.skipped));
    res.manifest.folds.push_back(std::move(o.manifest));
    res.log.insert(res.log.end(), o.log.begin(), o.log.end());
  }
  rep.aggregate = aggregate_predictions(rep.folds, opt.threshold);
  res.log.push_back(std::string(to_string(scheme)) + " " + std::string(to_string(opt.subset)) + ": " +
                    std::to_string(rep.folds.size()) + " training sets evaluated, " +
                    std::to_string(rep.skipped.size()) + " skipped, " + std::to_string(rep.aggregate.n) +
                    " test predictions");
  return res;
}

}  // namespace

EvalResult lopo_evaluate(const EvalDataset& ds, const EvalOptions& opt) {
  const auto parts = ds.participants();
  if (parts.size() < 3) throw DataError("LOPO needs at least three labeled participants");
  std::vector<FoldPlan> plans;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    FoldPlan plan;
    plan.id = parts[p];
    plan.stream = p;
    for (std::size_t i = 0; i < ds.size(); ++i)
      (ds.instances[i].participant_id == parts[p] ? plan.test : plan.train).push_back(i);
    plans.push_back(std::move(plan));
  }
  return run_plans(ds, Scheme::lopo, plans, opt);
}

EvalResult lopdo_evaluate(const EvalDataset& ds, const EvalOptions& opt) {
  std::vector<FoldPlan> plans;
  if (opt.time_rule == TimeRule::calendar_global) {
    std::set<LocalDate> dates;
    for (const auto& inst : ds.instances) dates.insert(inst.date);
    if (ds.size() < 2) throw DataError("LOPDO needs at least two participant-days");
    for (LocalDate d : dates) {
      FoldPlan plan;
      plan.id = d.to_string();
      plan.stream = static_cast<std::uint64_t>(static_cast<std::int64_t>(d.days()) + (1LL << 32));
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.instances[i].date < d) plan.train.push_back(i);
        else if (ds.instances[i].date == d) plan.test.push_back(i);
      }
      plans.push_back(std::move(plan));
    }
  } else {
    if (ds.size() < 2) throw DataError("LOPDO needs at least two participant-days");
    for (std::size_t t = 0; t < ds.size(); ++t) {
      const auto& ti = ds.instances[t];
      FoldPlan plan;
      plan.id = ti.id();
      plan.stream = t;
      plan.test = {t};
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& inst = ds.instances[i];
        if (inst.participant_id != ti.participant_id || inst.date < ti.date) plan.train.push_back(i);
      }
      plans.push_back(std::move(plan));
    }
  }
  return run_plans(ds, Scheme::lopdo, plans, opt);
}

EvalResult evaluate(const EvalDataset& ds, Scheme scheme, const EvalOptions& opt) {
  return scheme == Scheme::lopo ? lopo_evaluate(ds, opt) : lopdo_evaluate(ds, opt);
}

MinDaysCurve min_days_curve(const EvalDataset& ds, const EvalOptions& opt, std::size_t k_max,
                            std::vector<std::string>* log) {
  if (k_max < 1) throw UsageError("k_max must be at least 1");
  MinDaysCurve c;
  c.subset = opt.subset;
  c.lineage.seed = opt.seed;
  c.options = opt;
  for (std::size_t k = 1; k <= k_max; ++k) {
    const auto sub = ds.first_days(k);
    MinDaysPoint pt;
    pt.k = k;
    pt.instances = sub.size();
    pt.participants = sub.participants().size();
    if (sub.size() >= 2) {
      const auto r = lopdo_evaluate(sub, opt);
      pt.auroc = r.report.aggregate.auroc;
      pt.test_instances = r.report.aggregate.n;
      pt.folds = r.report.aggregate.n;
      for (const auto& s : r.report.skipped) pt.skipped += s.tests.size();
    } else {
      pt.skipped = sub.size();
    }
    if (log)
      log->push_back("min-days k=" + std::to_string(k) + ": " + std::to_string(pt.folds) + " folds, " +
                     std::to_string(pt.skipped) + " skipped, AUROC " +
                     (pt.auroc ? format_double(*pt.auroc) : std::string("missing")));
    c.points.push_back(pt);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

ojson hp_json(const Hyperparameters& hp) {
  return ojson{{"learning_rate", hp.learning_rate},
               {"trees", hp.trees},
               {"max_leaves", hp.max_leaves},
               {"min_samples_leaf", hp.min_samples_leaf}};
}

Hyperparameters hp_from(const ojson& j) {
  Hyperparameters hp;
  hp.learning_rate = j.at("learning_rate").get<double>();
  hp.trees = j.at("trees").get<int>();
  hp.max_leaves = j.at("max_leaves").get<int>();
  hp.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  return hp;
}

ojson num_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }
double num_from(const ojson& j) { return j.is_null() ? kMissing : j.get<double>(); }

ojson options_json(const EvalOptions& o) {
  return ojson{{"subset", to_string(o.subset)},
               {"grid",
                {{"learning_rate", o.grid.learning_rate},
                 {"trees", o.grid.trees},
                 {"max_leaves", o.grid.max_leaves},
                 {"min_samples_leaf", o.grid.min_samples_leaf}}},
               {"smote", {{"enabled", o.smote.enabled}, {"k", o.smote.k}}},
               {"seed", o.seed},
               {"min_train_rows", o.min_train_rows},
               {"time_rule", to_string(o.time_rule)},
               {"pca_components", o.pca_components},
               {"max_pca_frames", o.max_pca_frames},
               {"threshold", o.threshold},
               {"screen", {{"alpha", o.screen.alpha}, {"r_min", o.screen.r_min}}},
               {"cart_min_samples_leaf", o.cart_min_samples_leaf},
               {"iva_pairs", o.pairs.size()}};
}

EvalOptions options_from(const ojson& j) {
  EvalOptions o;
  o.subset = parse_subset(j.at("subset").get<std::string>());
  const auto& g = j.at("grid");
  o.grid.learning_rate = g.at("learning_rate").get<std::vector<double>>();
  o.grid.trees = g.at("trees").get<std::vector<int>>();
  o.grid.max_leaves = g.at("max_leaves").get<std::vector<int>>();
  o.grid.min_samples_leaf = g.at("min_samples_leaf").get<std::vector<int>>();
  o.smote.enabled = j.at("smote").at("enabled").get<bool>();
  o.smote.k = j.at("smote").at("k").get<std::size_t>();
  o.seed = j.at("seed").get<std::uint64_t>();
  o.min_train_rows = j.at("min_train_rows").get<std::size_t>();
  o.time_rule = j.at("time_rule").get<std::string>() == "per_participant" ? TimeRule::per_participant
                                                                          : TimeRule::calendar_global;
  o.pca_components = j.at("pca_components").get<std::size_t>();
  o.max_pca_frames = j.at("max_pca_frames").get<std::size_t>();
  o.threshold = j.at("threshold").get<double>();
  o.screen.alpha = j.at("screen").at("alpha").get<double>();
  o.screen.r_min = j.at("screen").at("r_min").get<double>();
  o.cart_min_samples_leaf = j.at("cart_min_samples_leaf").get<std::size_t>();
  return o;
}

ojson lineage_json(const Lineage& l) {
  return ojson{{"config_hash", l.config_hash}, {"data_hash", l.data_hash}, {"seed", l.seed}};
}

Lineage lineage_from(const ojson& j) {
  return Lineage{j.at("config_hash").get<std::string>(), j.at("data_hash").get<std::string>(),
                 j.at("seed").get<std::uint64_t>()};
}

ojson aggregate_json(const AggregateMetrics& a) {
  const auto& c = a.classification;
  return ojson{{"n", a.n},
               {"auroc", a.auroc ? ojson(*a.auroc) : ojson(nullptr)},
               {"accuracy", c.accuracy},
               {"precision", c.precision},
               {"recall", c.recall},
               {"f1", c.f1},
               {"mae", num_or_null(a.mae)},
               {"confusion", {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}}},
               {"flags",
                {{"precision_undefined", c.precision_undefined},
                 {"recall_undefined", c.recall_undefined},
                 {"f1_undefined", c.f1_undefined}}},
               {"median_feature_count", num_or_null(a.median_feature_count)}};
}

AggregateMetrics aggregate_from(const ojson& j) {
  AggregateMetrics a;
  auto& c = a.classification;
  a.n = j.at("n").get<std::size_t>();
  if (!j.at("auroc").is_null()) a.auroc = j.at("auroc").get<double>();
  c.accuracy = j.at("accuracy").get<double>();
  c.precision = j.at("precision").get<double>();
  c.recall = j.at("recall").get<double>();
  c.f1 = j.at("f1").get<double>();
  a.mae = num_from(j.at("mae"));
  const auto& m = j.at("confusion");
  c.tp = m.at("tp").get<std::size_t>();
  c.fp = m.at("fp").get<std::size_t>();
  c.fn = m.at("fn").get<std::size_t>();
  c.tn = m.at("tn").get<std::size_t>();
  const auto& f = j.at("flags");
  c.precision_undefined = f.at("precision_undefined").get<bool>();
  c.recall_undefined = f.at("recall_undefined").get<bool>();
  c.f1_undefined = f.at("f1_undefined").get<bool>();
  a.median_feature_count = num_from(j.at("median_feature_count"));
  return a;
}

}  // namespace

std::string options_to_json(const EvalOptions& o) { return options_json(o).dump(); }

std::string report_to_json(const ModelReport& r) {
  ojson j;
  j["format_version"] = "1";
  j["kind"] = "model_report";
  j["scheme"] = to_string(r.scheme);
  j["subset"] = to_string(r.subset);
  j["lineage"] = lineage_json(r.lineage);
  j["config"] = options_json(r.options);
  j["aggregate"] = aggregate_json(r.aggregate);
  ojson folds = ojson::array();
  for (const auto& f : r.folds) {
    ojson tests = ojson::array();
    for (const auto& t : f.tests)
      tests.push_back({{"instance", t.instance},
                       {"id", t.id},
                       {"truth", t.truth},
                       {"probability", t.probability},
                       {"target", t.target},
                       {"predicted_target", t.predicted_target}});
    folds.push_back({{"fold", f.fold_id},
                     {"train_rows", f.train_rows},
                     {"classifier_hp", hp_json(f.classifier_hp)},
                     {"regressor_hp", hp_json(f.regressor_hp)},
                     {"features", f.features},
                     {"tests", tests}});
  }
  j["folds"] = folds;
  ojson skipped = ojson::array();
  for (const auto& s : r.skipped) skipped.push_back({{"fold", s.fold_id}, {"reason", s.reason}, {"tests", s.tests}});
  j["skipped"] = skipped;
  return j.dump(1) + "\n";
}

ModelReport report_from_json(std::string_view text) {
  try {
    const auto j = ojson::parse(text);
    if (j.at("format_version").get<std::string>() != "1" || j.at("kind").get<std::string>() != "model_report")
      throw DataError("not a version-1 model report");
    ModelReport r;
    r.scheme = parse_scheme(j.at("scheme").get<std::string>());
    r.subset = parse_subset(j.at("subset").get<std::string>());
    r.lineage = lineage_from(j.at("lineage"));
    r.options = options_from(j.at("config"));
    r.aggregate = aggregate_from(j.at("aggregate"));
    for (const auto& f : j.at("folds")) {
      FoldRecord rec;
      rec.fold_id = f.at("fold").get<std::string>();
      rec.train_rows = f.at("train_rows").get<std::size_t>();
      rec.classifier_hp = hp_from(f.at("classifier_hp"));
      rec.regressor_hp = hp_from(f.at("regressor_hp"));
      rec.features = f.at("features").get<std::vector<std::string>>();
      for (const auto& t : f.at("tests"))
        rec.tests.push_back({t.at("instance").get<std::size_t>(), t.at("id").get<std::string>(),
                             t.at("truth").get<int>(), t.at("probability").get<double>(), t.at("target").get<int>(),
                             t.at("predicted_target").get<double>()});
      r.folds.push_back(std::move(rec));
    }
    for (const auto& s : j.at("skipped"))
      r.skipped.push_back(
          {s.at("fold").get<std::string>(), s.at("reason").get<std::string>(), s.at("tests").get<std::vector<std::string>>()});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model report: ") + e.what());
  }
}

std::string manifest_to_json(const FoldManifest& m) {
  ojson j;
  j["format_version"] = "1";
  j["kind"] = "fold_manifest";
  j["scheme"] = to_string(m.scheme);
  j["time_rule"] = to_string(m.time_rule);
  ojson inst = ojson::array();
  for (std::size_t i = 0; i < m.instances.size(); ++i)
    inst.push_back({{"row", i}, {"participant", m.instances[i].first}, {"date", m.instances[i].second.to_string()}});
  j["instances"] = inst;
  ojson folds = ojson::array();
  for (const auto& f : m.folds) {
    ojson stages = ojson::object();
    for (const auto& [k, v] : f.stages) stages[k] = v;
    ojson fj{{"fold", f.fold_id}, {"test", f.test}, {"stages", stages}};
    if (!f.skipped.empty()) fj["skipped"] = f.skipped;
    folds.push_back(fj);
  }
  j["folds"] = folds;
  return j.dump() + "\n";
}

std::string curve_to_json(const MinDaysCurve& c) {
  ojson j;
  j["format_version"] = "1";
  j["kind"] = "min_days_curve";
  j["subset"] = to_string(c.subset);
  j["lineage"] = lineage_json(c.lineage);
  j["config"] = options_json(c.options);
  ojson pts = ojson::array();
  for (const auto& p : c.points)
    pts.push_back({{"k", p.k},
                   {"auroc", p.auroc ? ojson(*p.auroc) : ojson(nullptr)},
                   {"folds", p.folds},
                   {"skipped", p.skipped},
                   {"test_instances", p.test_instances},
                   {"instances", p.instances},
                   {"participants", p.participants}});
  j["points"] = pts;
  return j.dump(1) + "\n";
}

MinDaysCurve curve_from_json(std::string_view text) {
  try {
    const auto j = ojson::parse(text);
    if (j.at("format_version").get<std::string>() != "1" || j.at("kind").get<std::string>() != "min_days_curve")
      throw DataError("not a version-1 min-days curve");
    MinDaysCurve c;
    c.subset = parse_subset(j.at("subset").get<std::string>());
    c.lineage = lineage_from(j.at("lineage"));
    c.options = options_from(j.at("config"));
    for (const auto& p : j.at("points")) {
      MinDaysPoint pt;
      pt.k = p.at("k").get<std::size_t>();
      if (!p.at("auroc").is_null()) pt.auroc = p.at("auroc").get<double>();
      pt.folds = p.at("folds").get<std::size_t>();
      pt.skipped = p.at("skipped").get<std::size_t>();
      pt.test_instances = p.at("test_instances").get<std::size_t>();
      pt.instances = p.at("instances").get<std::size_t>();
      pt.participants = p.at("participants").get<std::size_t>();
      c.points.push_back(pt);
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed min-days curve: ") + e.what());
  }
}

}  // namespace facepsy
