#pragma once

// Universal (LOPO) and hybrid time-aware (LOPDO) evaluation, feature
// subsets, pooled metrics, the minimum-days curve and fold manifests.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "facepsy/featurize.hpp"
#include "facepsy/labeling.hpp"
#include "facepsy/learn.hpp"
#include "facepsy/metrics.hpp"
#include "facepsy/stats.hpp"

namespace facepsy {

enum class SubsetName { EOP, SP, HEA, AU, EAR, IVA, TSF, FS, ALL };
std::string_view to_string(SubsetName s);
SubsetName parse_subset(std::string_view s);
// Fixed cardinality, or nullopt for TSF / FS.
std::optional<std::size_t> expected_cardinality(SubsetName s);
bool subset_uses_iva(SubsetName s);

struct FeatureSubset {
  SubsetName name = SubsetName::ALL;
  std::vector<std::size_t> columns;  // ascending for fixed subsets
};

// Fixed subsets resolve by channel-name prefix and are checked against their
// expected cardinality. TSF takes the screen rows, FS the selected features.
FeatureSubset resolve_subset(SubsetName name, const ScreenResult* screen = nullptr,
                             const GiniSelection* selection = nullptr);

enum class Scheme { lopo, lopdo };
std::string_view to_string(Scheme s);
Scheme parse_scheme(std::string_view s);

// calendar_global: train only on instances dated strictly before the test
// date, for every participant. per_participant: the cut applies to the test
// participant only.
enum class TimeRule { calendar_global, per_participant };
std::string_view to_string(TimeRule r);

struct Instance {
  std::size_t table = 0;
  std::size_t day = 0;  // index into FrameTable::days
  std::string participant_id;
  LocalDate date;
  int label = 0;
  int target = 0;
  std::string id() const { return participant_id + "/" + date.to_string(); }
};

// Labeled participant-days with the fold-independent feature columns cached.
struct EvalDataset {
  std::shared_ptr<const std::vector<FrameTable>> tables;
  std::vector<Instance> instances;  // by participant, then date
  RowMatrix static_features;  // instances × 1280, IVA columns NaN
  std::size_t unlabeled_days = 0;

  std::size_t size() const { return instances.size(); }
  std::vector<std::string> participants() const;
  // Same frames, first k labeled days of every participant.
  EvalDataset first_days(std::size_t k) const;
};

EvalDataset make_dataset(std::vector<FrameTable> tables, std::span<const EpisodeLabel> labels);

// PCA fitted on the landmark frames of the given instances' days (evenly
// strided subsample of at most max_frames).
PcaModel fit_instance_pca(const EvalDataset& ds, std::span<const std::size_t> rows, const IvaPairList& pairs,
                          std::size_t k, std::size_t max_frames);

// Full 1280-column rows for the given instances: cached static columns plus
// IVA channels projected with `pca` (left NaN when pca is null).
RowMatrix instance_features(const EvalDataset& ds, std::span<const std::size_t> rows, const PcaModel* pca,
                            const IvaPairList& pairs);

struct EvalOptions {
  SubsetName subset = SubsetName::ALL;
  Grid grid;
  SmoteOptions smote;
  std::uint64_t seed = 7;
  std::size_t min_train_rows = 20;
  TimeRule time_rule = TimeRule::calendar_global;
  std::size_t pca_components = kIvaComponents;
  std::size_t max_pca_frames = 600;
  double threshold = 0.5;
  ScreenOptions screen;
  std::size_t cart_min_samples_leaf = 2;
  IvaPairList pairs = build_pair_list(LandmarkMap::standard());
};

// Canonical compact JSON of every option that shapes results; the CLI hashes
// it into Lineage::config_hash.
std::string options_to_json(const EvalOptions& o);

struct Lineage {
  std::string config_hash;
  std::string data_hash;
  std::uint64_t seed = 0;
  bool operator==(const Lineage&) const = default;
};

struct TestPrediction {
  std::size_t instance = 0;
  std::string id;
  int truth = 0;
  double probability = 0.0;
  int target = 0;
  double predicted_target = 0.0;
};

// One trained pipeline pair (classifier + regressor) and the outer folds it
// serves. Under the calendar-global rule every fold sharing a test date has
// the same training set, so they share one record.
struct FoldRecord {
  std::string fold_id;
  std::size_t train_rows = 0;
  Hyperparameters classifier_hp;
  Hyperparameters regressor_hp;
  std::vector<std::string> features;
  std::vector<TestPrediction> tests;
};

struct SkippedFold {
  std::string fold_id;
  std::string reason;
  std::vector<std::string> tests;
};

struct AggregateMetrics {
  std::size_t n = 0;
  std::optional<double> auroc;
  ClassificationMetrics classification;
  double mae = 0.0;
  double median_feature_count = 0.0;
  bool operator==(const AggregateMetrics& o) const;
};

struct ModelReport {
  Scheme scheme = Scheme::lopdo;
  SubsetName subset = SubsetName::ALL;
  Lineage lineage;
  EvalOptions options;
  std::vector<FoldRecord> folds;
  std::vector<SkippedFold> skipped;
  AggregateMetrics aggregate;
};

// Pooled over every test prediction of every fold.
AggregateMetrics aggregate_predictions(std::span<const FoldRecord> folds, double threshold);

std::string report_to_json(const ModelReport& r);
ModelReport report_from_json(std::string_view text);

// Row provenance per fold, written for the independent leakage audit.
struct ManifestFold {
  std::string fold_id;
  std::vector<std::size_t> test;
  std::map<std::string, std::vector<std::size_t>> stages;  // stage -> instance rows consumed
  std::string skipped;  // reason, empty when evaluated
};

struct FoldManifest {
  Scheme scheme = Scheme::lopdo;
  TimeRule time_rule = TimeRule::calendar_global;
  std::vector<std::pair<std::string, LocalDate>> instances;  // participant, date
  std::vector<ManifestFold> folds;
};

std::string manifest_to_json(const FoldManifest& m);

struct EvalResult {
  ModelReport report;
  FoldManifest manifest;
  std::vector<std::string> log;
};

EvalResult lopo_evaluate(const EvalDataset& ds, const EvalOptions& opt);
EvalResult lopdo_evaluate(const EvalDataset& ds, const EvalOptions& opt);
EvalResult evaluate(const EvalDataset& ds, Scheme scheme, const EvalOptions& opt);

struct MinDaysPoint {
  std::size_t k = 0;
  std::optional<double> auroc;
  std::size_t folds = 0;
  std::size_t skipped = 0;
  std::size_t test_instances = 0;
  std::size_t instances = 0;  // labeled days available at this k
  std::size_t participants = 0;
};

struct MinDaysCurve {
  SubsetName subset = SubsetName::ALL;
  Lineage lineage;
  EvalOptions options;
  std::vector<MinDaysPoint> points;
};

MinDaysCurve min_days_curve(const EvalDataset& ds, const EvalOptions& opt, std::size_t k_max,
                            std::vector<std::string>* log = nullptr);
std::string curve_to_json(const MinDaysCurve& c);
MinDaysCurve curve_from_json(std::string_view text);

}  // namespace facepsy
