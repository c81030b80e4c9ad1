#include "facepsy/cli.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include <omp.h>
#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "facepsy/audit.hpp"
#include "facepsy/common.hpp"
#include "facepsy/eval.hpp"
#include "facepsy/featurize.hpp"
#include "facepsy/io.hpp"
#include "facepsy/labeling.hpp"
#include "facepsy/learn.hpp"
#include "facepsy/plot.hpp"
#include "facepsy/stats.hpp"
#include "facepsy/synth.hpp"

#ifndef FACEPSY_VERSION
#define FACEPSY_VERSION "0.0.0"
#endif

namespace facepsy::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

const char* version() { return FACEPSY_VERSION; }

namespace {

std::string hex(const unsigned char* p, unsigned n) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(2 * n, '0');
  for (unsigned i = 0; i < n; ++i) {
    s[2 * i] = digits[p[i] >> 4];
    s[2 * i + 1] = digits[p[i] & 15];
  }
  return s;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw InvariantError("sha256 failed");
  return hex(md, len);
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw InvariantError("sha256 init failed");
  std::vector<char> buf(1 << 16);
  while (in.read(buf.data(), static_cast<std::streamsize>(buf.size())) || in.gcount() > 0)
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  return hex(md, len);
}

std::string combined_hash(const std::vector<std::pair<std::string, std::string>>& labelled_hashes) {
  std::string text;
  for (const auto& [label, h] : labelled_hashes) text += label + " " + h + "\n";
  return sha256_hex(text);
}

std::string config_hash(std::string_view kind, std::string_view options_json) {
  return sha256_hex(std::string(kind) + "\n" + std::string(options_json));
}

namespace {

ojson versions_json() {
  return ojson{{"facepsy", FACEPSY_VERSION},
               {"format_version", kFormatVersion},
               {"compiler", __VERSION__},
               {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
               {"fmt", fmt::format("{}.{}.{}", FMT_VERSION / 10000, FMT_VERSION / 100 % 100, FMT_VERSION % 100)},
               {"openssl", OpenSSL_version(OPENSSL_VERSION)},
               {"openmp", _OPENMP}};
}

ojson lineage_json(const Lineage& l) {
  return ojson{{"config_hash", l.config_hash}, {"data_hash", l.data_hash}, {"seed", l.seed}};
}

// run_log.json: what went in, what came out, and under which settings.
class RunLog {
 public:
  std::string command;
  std::vector<std::string> args;
  std::optional<std::uint64_t> seed;
  std::string config_hash;
  std::string data_hash;
  std::optional<int> jobs;

  std::string input(const fs::path& p) {
    auto h = sha256_file(p);
    inputs_.emplace_back(p.string(), h);
    return h;
  }
  void output(const fs::path& p) { outputs_.emplace_back(p.filename().string(), sha256_file(p)); }
  void output_as(const std::string& name, const fs::path& p) { outputs_.emplace_back(name, sha256_file(p)); }
  void note(std::string msg) { notes_.push_back(std::move(msg)); }

  std::string to_json(std::string_view status, std::string_view error_category, std::string_view error) const {
    ojson j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "run_log";
    j["command"] = command;
    j["args"] = args;
    j["status"] = status;
    if (!error.empty()) j["error"] = {{"category", error_category}, {"message", error}};
    j["seed"] = seed ? ojson(*seed) : ojson(nullptr);
    j["config_hash"] = config_hash;
    j["data_hash"] = data_hash;
    if (jobs) j["jobs"] = *jobs;
    ojson in = ojson::array();
    for (const auto& [p, h] : inputs_) in.push_back({{"path", p}, {"sha256", h}});
    j["inputs"] = in;
    ojson out = ojson::array();
    for (const auto& [p, h] : outputs_) out.push_back({{"path", p}, {"sha256", h}});
    j["outputs"] = out;
    j["messages"] = notes_;
    j["versions"] = versions_json();
    return j.dump(1) + "\n";
  }

 private:
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::pair<std::string, std::string>> outputs_;
  std::vector<std::string> notes_;
};

struct Session {
  std::ostream& out;
  std::ostream& err;
  RunLog log;
  std::optional<fs::path> out_dir;
};

void prepare_out_dir(Session& s, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + dir);
  s.out_dir = fs::path(dir);
}

void write_text(Session& s, const fs::path& path, std::string_view text) {
  {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << text;
    if (!f) throw DataError("write failed: " + path.string());
  }
  s.log.output(path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void set_jobs(Session& s, int jobs) {
  if (jobs < 0) throw UsageError("--jobs must be positive");
  if (jobs == 0) jobs = omp_get_num_procs();
  omp_set_num_threads(jobs);
  s.log.jobs = jobs;
}

void say(Session& s, const std::string& line) {
  s.out << line << '\n';
  s.log.note(line);
}

std::string fmt_opt(const std::optional<double>& v, int digits = 3) {
  return v ? fmt::format("{:.{}f}", *v, digits) : std::string("missing");
}

// ---------------------------------------------------------------------------
// Shared option groups

struct DataArgs {
  std::string frames;
  std::string phq;
  std::string target_rule = "end";
};

struct ModelArgs {
  std::string subset = "ALL";
  std::uint64_t seed = 0;
  std::vector<double> learning_rate = Grid{}.learning_rate;
  std::vector<int> trees = Grid{}.trees;
  std::vector<int> max_leaves = Grid{}.max_leaves;
  std::vector<int> min_samples_leaf = Grid{}.min_samples_leaf;
  bool no_smote = false;
  std::size_t smote_k = 5;
  std::size_t min_train_rows = 20;
  std::size_t pca_frames = 600;
  double alpha = 0.05;
  double r_min = 0.20;
  bool per_participant = false;
  int jobs = 0;
};

TargetRule parse_rule(const std::string& s) { return s == "start" ? TargetRule::window_start : TargetRule::window_end; }

void add_data_options(CLI::App* sub, DataArgs& a) {
  sub->add_option("--frames", a.frames, "Directory of *.ndjson frame streams")->required()->check(CLI::ExistingDirectory);
  sub->add_option("--phq", a.phq, "PHQ-9 administrations CSV")->required()->check(CLI::ExistingFile);
  sub->add_option("--target-rule", a.target_rule, "Regression target: PHQ total at window end or start")
      ->check(CLI::IsMember({"end", "start"}))
      ->capture_default_str();
}

void add_model_options(CLI::App* sub, ModelArgs& a, bool time_rule) {
  std::vector<std::string> subsets = {"EOP", "SP", "HEA", "AU", "EAR", "IVA", "TSF", "FS", "ALL"};
  sub->add_option("--subset", a.subset, "Feature subset")->check(CLI::IsMember(subsets))->capture_default_str();
  sub->add_option("--seed", a.seed, "Master seed for every stochastic step")->required();
  sub->add_option("--learning-rate", a.learning_rate, "Grid: learning rates")->delimiter(',')->capture_default_str();
  sub->add_option("--trees", a.trees, "Grid: boosting rounds")->delimiter(',')->capture_default_str();
  sub->add_option("--max-leaves", a.max_leaves, "Grid: leaves per tree")->delimiter(',')->capture_default_str();
  sub->add_option("--min-samples-leaf", a.min_samples_leaf, "Grid: minimum rows per leaf")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_flag("--no-smote", a.no_smote, "Disable SMOTE oversampling");
  sub->add_option("--smote-k", a.smote_k, "SMOTE neighbours")->capture_default_str();
  sub->add_option("--pca-frames", a.pca_frames, "Frame cap for each PCA fit")->capture_default_str();
  sub->add_option("--alpha", a.alpha, "TSF screening significance level")->capture_default_str();
  sub->add_option("--r-min", a.r_min, "TSF screening minimum |r|")->capture_default_str();
  sub->add_option("--jobs", a.jobs, "Worker threads (0 = all cores)")->capture_default_str();
  if (time_rule) {
    sub->add_option("--min-train-rows", a.min_train_rows, "Skip folds with fewer training rows")->capture_default_str();
    sub->add_flag("--per-participant", a.per_participant,
                  "Apply the LOPDO date cut to the test participant only");
  }
}

EvalOptions make_options(const ModelArgs& a) {
  EvalOptions o;
  o.subset = parse_subset(a.subset);
  o.grid.learning_rate = a.learning_rate;
  o.grid.trees = a.trees;
  o.grid.max_leaves = a.max_leaves;
  o.grid.min_samples_leaf = a.min_samples_leaf;
  if (o.grid.candidates().empty()) throw UsageError("hyperparameter grid is empty");
  for (const auto& hp : o.grid.candidates()) hp.validate();
  o.smote.enabled = !a.no_smote;
  o.smote.k = a.smote_k;
  if (a.smote_k < 1) throw UsageError("--smote-k must be at least 1");
  o.seed = a.seed;
  o.min_train_rows = a.min_train_rows;
  o.time_rule = a.per_participant ? TimeRule::per_participant : TimeRule::calendar_global;
  if (a.pca_frames <= o.pca_components) throw UsageError("--pca-frames must exceed the PCA component count");
  o.max_pca_frames = a.pca_frames;
  if (!(a.alpha > 0.0 && a.alpha <= 1.0)) throw UsageError("--alpha must lie in (0,1]");
  if (!(a.r_min >= 0.0 && a.r_min <= 1.0)) throw UsageError("--r-min must lie in [0,1]");
  o.screen.alpha = a.alpha;
  o.screen.r_min = a.r_min;
  return o;
}

std::vector<fs::path> ndjson_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ndjson") files.push_back(e.path());
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  return files;
}

// Frames hashed in file-name order; the data hash ignores where the files live.
std::vector<FrameTable> load_tables(Session& s, const fs::path& dir, std::vector<std::pair<std::string, std::string>>& hashes) {
  const auto files = ndjson_files(dir);
  if (files.empty()) throw DataError("no *.ndjson frame files in " + dir.string());
  for (const auto& f : files) hashes.emplace_back("frames/" + f.filename().string(), s.log.input(f));
  auto streams = read_frame_directory(dir);
  std::erase_if(streams, [](const auto& v) { return v.empty(); });
  if (streams.empty()) throw DataError("frame files contain no records");
  std::vector<FrameTable> tables(streams.size());
  std::vector<std::exception_ptr> errors(streams.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < streams.size(); ++i) {
    try {
      tables[i] = prepare_frames(streams[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return tables;
}

struct Cohort {
  EvalDataset ds;
  std::string data_hash;
};

Cohort load_cohort(Session& s, const DataArgs& a) {
  std::vector<std::pair<std::string, std::string>> hashes;
  auto tables = load_tables(s, a.frames, hashes);
  hashes.emplace_back("phq", s.log.input(a.phq));
  const auto admins = parse_phq_csv(fs::path(a.phq));
  std::vector<std::string> warnings;
  const auto labels = label_cohort(admins, parse_rule(a.target_rule), &warnings);
  for (auto& w : warnings) s.log.note("warning: " + w);
  Cohort c{make_dataset(std::move(tables), labels), combined_hash(hashes)};
  if (c.ds.size() == 0) throw DataError("no participant-day falls inside a labeled window");
  say(s, fmt::format("cohort: {} labeled days from {} participants ({} unlabeled days dropped, {} warnings)",
                     c.ds.size(), c.ds.participants().size(), c.ds.unlabeled_days, warnings.size()));
  return c;
}

std::string with_lineage(std::string_view json_text, const Lineage& l) {
  auto j = ojson::parse(json_text);
  j["lineage"] = lineage_json(l);
  return j.dump() + "\n";
}

std::optional<RocSeries> roc_of(const ModelReport& r, std::string label) {
  std::vector<int> y;
  std::vector<double> p;
  for (const auto& f : r.folds)
    for (const auto& t : f.tests) {
      y.push_back(t.truth);
      p.push_back(t.probability);
    }
  const auto pos = std::count(y.begin(), y.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(y.size())) return std::nullopt;
  return RocSeries{std::move(label), roc_curve(y, p), r.aggregate.auroc};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::uint64_t seed = 0;
  std::string out;
  std::size_t participants = SynthConfig{}.n_participants;
  int days = SynthConfig{}.study_days;
  std::size_t noncompliant = SynthConfig{}.noncompliant;
  double effect_size = SynthConfig{}.effect_size;
  double noise = SynthConfig{}.noise;
  double depressive_fraction = SynthConfig{}.depressive_fraction;
  std::string start_date = SynthConfig{}.start_date;
};

void cmd_synth(Session& s, const SynthArgs& a) {
  SynthConfig cfg;
  cfg.n_participants = a.participants;
  cfg.study_days = a.days;
  cfg.noncompliant = a.noncompliant;
  cfg.effect_size = a.effect_size;
  cfg.noise = a.noise;
  cfg.depressive_fraction = a.depressive_fraction;
  cfg.start_date = a.start_date;
  cfg.validate();
  const ojson cj{{"participants", cfg.n_participants}, {"days", cfg.study_days},
                 {"noncompliant", cfg.noncompliant},   {"effect_size", cfg.effect_size},
                 {"noise", cfg.noise},                 {"depressive_fraction", cfg.depressive_fraction},
                 {"start_date", cfg.start_date}};
  s.log.seed = a.seed;
  s.log.config_hash = config_hash("synth", cj.dump());
  prepare_out_dir(s, a.out);
  const auto cohort = generate_cohort(cfg, a.seed);
  write_cohort(cohort, a.out);
  const fs::path root(a.out);
  for (const auto& f : ndjson_files(root / "frames")) s.log.output_as("frames/" + f.filename().string(), f);
  s.log.output(root / "phq.csv");
  s.log.output(root / "manifest.truth");
  std::size_t frames = 0;
  for (const auto& f : cohort.frames) frames += f.size();
  say(s, fmt::format("synth: {} participants, {} frames, {} PHQ administrations, {} labeled windows -> {}",
                     cohort.participants.size(), frames, cohort.phq.size(), cohort.windows.size(), a.out));
}

// ---------------------------------------------------------------------------
// featurize

struct FeaturizeArgs {
  std::string frames;
  std::string out;
  std::string pca;
  std::size_t pca_frames = 600;
  bool acceleration = false;
  int jobs = 0;
};

void write_acceleration_csv(Session& s, const fs::path& path, std::span<const FrameTable> tables, const PcaModel& pca,
                            const IvaPairList& pairs) {
  std::vector<std::string> lines(tables.size());
  std::vector<std::exception_ptr> errors(tables.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < tables.size(); ++i) {
    try {
      const auto& t = tables[i];
      const auto iva = compute_iva_channels(t, pca, pairs);
      const auto acc = iva_acceleration_channels(t, iva);
      std::string& text = lines[i];
      for (std::size_t d = 0; d < t.days.size(); ++d) {
        text += t.participant_id + "," + t.days[d].to_string();
        for (double v : acceleration_day_features(t, d, acc)) text += "," + format_double(v);
        text += "\n";
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::string text = "participant_id,local_date";
  for (const auto& n : acceleration_feature_names()) text += "," + n;
  text += "\n";
  for (const auto& l : lines) text += l;
  write_text(s, path, text);
}

void cmd_featurize(Session& s, const FeaturizeArgs& a) {
  set_jobs(s, a.jobs);
  prepare_out_dir(s, a.out);
  std::vector<std::pair<std::string, std::string>> hashes;
  const auto tables = load_tables(s, a.frames, hashes);
  s.log.data_hash = combined_hash(hashes);
  const auto pairs = build_pair_list(LandmarkMap::standard());
  PcaModel pca;
  if (!a.pca.empty()) {
    s.log.input(a.pca);
    std::ifstream in(a.pca);
    if (!in) throw DataError("cannot read " + a.pca);
    pca = PcaModel::load(in);
  } else {
    if (a.pca_frames <= kIvaComponents) throw UsageError("--pca-frames must exceed the PCA component count");
    std::vector<std::vector<int>> frames(tables.size());
    for (std::size_t i = 0; i < tables.size(); ++i) {
      frames[i].resize(tables[i].frame_count());
      std::iota(frames[i].begin(), frames[i].end(), 0);
    }
    const RowMatrix angles = pca_training_rows(tables, frames, pairs, a.pca_frames);
    if (static_cast<std::size_t>(angles.rows()) <= kIvaComponents) throw DataError("too few landmark frames to fit PCA");
    pca = fit_pca(angles, kIvaComponents);
  }
  const ojson cj{{"pca", a.pca.empty() ? "fitted" : "loaded"}, {"pca_frames", a.pca_frames},
                 {"acceleration", a.acceleration}};
  s.log.config_hash = config_hash("featurize", cj.dump());
  const fs::path root(a.out);
  {
    std::ostringstream ps;
    pca.save(ps);
    write_text(s, root / "pca.txt", ps.str());
  }
  const auto rows = featurize_cohort(tables, pca, pairs);
  write_feature_csv(root / "day_features.csv", rows);
  s.log.output(root / "day_features.csv");
  if (a.acceleration) write_acceleration_csv(s, root / "day_acceleration.csv", tables, pca, pairs);
  say(s, fmt::format("featurize: {} participant-days x {} features from {} participants{}", rows.size(),
                     kDayFeatureCount, tables.size(), a.acceleration ? " (+ acceleration)" : ""));
}

// ---------------------------------------------------------------------------
// label

struct LabelArgs {
  std::string phq;
  std::string out;
  std::string target_rule = "end";
};

void cmd_label(Session& s, const LabelArgs& a) {
  prepare_out_dir(s, a.out);
  s.log.data_hash = combined_hash({{"phq", s.log.input(a.phq)}});
  s.log.config_hash = config_hash("label", ojson{{"target_rule", a.target_rule}}.dump());
  const auto admins = parse_phq_csv(fs::path(a.phq));
  std::vector<std::string> warnings;
  const auto labels = label_cohort(admins, parse_rule(a.target_rule), &warnings);
  for (const auto& w : warnings) say(s, "warning: " + w);
  const fs::path path = fs::path(a.out) / "labels.csv";
  write_labels_csv(path, labels);
  s.log.output(path);
  const auto dep = std::count_if(labels.begin(), labels.end(), [](const auto& l) { return l.depressive; });
  say(s, fmt::format("label: {} windows, {} depressive, {} non-depressive", labels.size(), dep, labels.size() - dep));
}

// ---------------------------------------------------------------------------
// screen

struct ScreenArgs {
  std::string features;
  std::string labels;
  std::string out;
  double alpha = 0.05;
  double r_min = 0.20;
  std::size_t top = 15;
  int jobs = 0;
};

void cmd_screen(Session& s, const ScreenArgs& a) {
  set_jobs(s, a.jobs);
  if (!(a.alpha > 0.0 && a.alpha <= 1.0)) throw UsageError("--alpha must lie in (0,1]");
  if (!(a.r_min >= 0.0 && a.r_min <= 1.0)) throw UsageError("--r-min must lie in [0,1]");
  prepare_out_dir(s, a.out);
  s.log.data_hash = combined_hash({{"features", s.log.input(a.features)}, {"labels", s.log.input(a.labels)}});
  s.log.config_hash = config_hash("screen", ojson{{"alpha", a.alpha}, {"r_min", a.r_min}}.dump());
  auto rows = read_feature_csv(a.features);
  const auto windows = read_labels_csv(a.labels);
  const auto ld = attach_targets(std::move(rows), windows);
  const auto n = ld.instances.size();
  if (n < 3) throw DataError("fewer than three labeled participant-days to screen");
  RowMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kDayFeatureCount));
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& inst = ld.instances[i];
    for (std::size_t c = 0; c < kDayFeatureCount; ++c)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = inst.features[c];
    y[i] = inst.label.value_or(false) ? 1 : 0;
  }
  ScreenOptions so;
  so.alpha = a.alpha;
  so.r_min = a.r_min;
  so.exec = omp_get_max_threads() > 1 ? Execution::parallel : Execution::serial;
  const auto res = screen_features(x, y, feature_names(), so);
  const fs::path path = fs::path(a.out) / "screen.csv";
  write_screen_csv(path, res);
  s.log.output(path);
  say(s, fmt::format("screen: {} labeled days ({} dropped), {} features with p < {}, {} with |r| >= {}, {} undefined", n,
                     ld.dropped, res.total_significant, a.alpha, res.rows.size(), a.r_min, res.undefined));
  for (std::size_t i = 0; i < std::min(a.top, res.rows.size()); ++i) s.out << "  " << format_screen_row(res.rows[i]) << '\n';
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  DataArgs data;
  ModelArgs model;
  std::string out;
  std::string task = "both";
};

ojson pipeline_json(const FittedPipeline& p, const GridSearchResult& gs, Task task, SubsetName subset,
                    const std::vector<std::string>& features, const Lineage& lineage) {
  std::ostringstream model;
  p.model.save(model);
  const auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  ojson scores = ojson::array();
  for (const auto& c : gs.candidates)
    scores.push_back({{"learning_rate", c.hp.learning_rate},
                      {"trees", c.hp.trees},
                      {"max_leaves", c.hp.max_leaves},
                      {"min_samples_leaf", c.hp.min_samples_leaf},
                      {"skipped", c.skipped},
                      {"score", c.score}});
  const auto& hp = gs.best;
  return ojson{{"format_version", kFormatVersion},
               {"kind", "pipeline"},
               {"task", to_string(task)},
               {"subset", to_string(subset)},
               {"lineage", lineage_json(lineage)},
               {"features", features},
               {"hyperparameters",
                {{"learning_rate", hp.learning_rate},
                 {"trees", hp.trees},
                 {"max_leaves", hp.max_leaves},
                 {"min_samples_leaf", hp.min_samples_leaf}}},
               {"grid_scores", scores},
               {"cross_validated", gs.cross_validated},
               {"smote_rows", p.smote_rows},
               {"preprocessor", {{"mean", vec(p.pre.mean)}, {"stddev", vec(p.pre.stddev)}, {"fitted_rows", p.pre.fitted_rows}}},
               {"model", model.str()}};
}

void cmd_train(Session& s, const TrainArgs& a) {
  set_jobs(s, a.model.jobs);
  const auto opt = make_options(a.model);
  prepare_out_dir(s, a.out);
  const auto cohort = load_cohort(s, a.data);
  const auto& ds = cohort.ds;
  const Lineage lineage{config_hash("train:" + a.task, options_to_json(opt)), cohort.data_hash, opt.seed};
  s.log.seed = opt.seed;
  s.log.config_hash = lineage.config_hash;
  s.log.data_hash = lineage.data_hash;

  std::vector<std::size_t> rows(ds.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::vector<int> labels;
  std::vector<double> ycls, yreg;
  for (const auto& inst : ds.instances) {
    labels.push_back(inst.label);
    ycls.push_back(inst.label);
    yreg.push_back(inst.target);
  }
  const fs::path root(a.out);
  std::optional<PcaModel> pca;
  if (subset_uses_iva(opt.subset)) {
    pca = fit_instance_pca(ds, rows, opt.pairs, opt.pca_components, opt.max_pca_frames);
    std::ostringstream ps;
    pca->save(ps);
    write_text(s, root / "pca.txt", ps.str());
  }
  const RowMatrix x = instance_features(ds, rows, pca ? &*pca : nullptr, opt.pairs);

  FeatureSubset subset;
  if (opt.subset == SubsetName::TSF) {
    auto screen = screen_features(x, labels, feature_names(), opt.screen);
    if (screen.rows.empty()) {
      ScreenOptions loose{2.0, 0.0, opt.screen.exec};
      auto all = screen_features(x, labels, feature_names(), loose);
      if (all.rows.empty()) throw DataError("no feature has a defined correlation with the label");
      screen.rows.push_back(all.rows.front());
      say(s, "no feature passed screening; using top |r| feature " + all.rows.front().feature);
    }
    subset = resolve_subset(SubsetName::TSF, &screen);
  } else if (opt.subset == SubsetName::FS) {
    const auto sel = gini_select(fit_preprocessor(x).apply(x), labels, opt.cart_min_samples_leaf);
    if (sel.selected.empty()) throw DataError("Gini selection is empty");
    subset = resolve_subset(SubsetName::FS, nullptr, &sel);
  } else {
    subset = resolve_subset(opt.subset);
  }
  RowMatrix xs(x.rows(), static_cast<Eigen::Index>(subset.columns.size()));
  for (std::size_t c = 0; c < subset.columns.size(); ++c)
    xs.col(static_cast<Eigen::Index>(c)) = x.col(static_cast<Eigen::Index>(subset.columns[c]));
  std::vector<std::string> names;
  for (auto c : subset.columns) names.push_back(feature_names()[c]);

  ojson summary{{"format_version", kFormatVersion},
                {"kind", "train_summary"},
                {"lineage", lineage_json(lineage)},
                {"config", ojson::parse(options_to_json(opt))},
                {"instances", ds.size()},
                {"participants", ds.participants().size()},
                {"features", names.size()}};
  const auto fit = [&](Task task, std::uint64_t stream, std::span<const double> y, const char* file) {
    const auto gs = grid_search(xs, y, labels, task, opt.grid, opt.smote, derive_seed(opt.seed, stream));
    const auto p = fit_pipeline(xs, y, labels, task, gs.best, opt.smote, derive_seed(opt.seed, stream + 1));
    write_text(s, root / file, pipeline_json(p, gs, task, opt.subset, names, lineage).dump(1) + "\n");
    summary[std::string(to_string(task))] = {{"file", file},
                                             {"best_score", gs.best_score},
                                             {"cross_validated", gs.cross_validated},
                                             {"trees", p.model.trees().size()}};
    say(s, fmt::format("train: {} on {} rows x {} features; lr {} trees {} leaves {} min_leaf {}; inner CV score {:.4f}",
                       to_string(task), xs.rows(), xs.cols(), gs.best.learning_rate, gs.best.trees,
                       gs.best.max_leaves, gs.best.min_samples_leaf, gs.best_score));
  };
  if (a.task != "regression") fit(Task::binary_logistic, 1, ycls, "classifier.json");
  if (a.task != "classification") fit(Task::l2_regression, 3, yreg, "regressor.json");
  write_text(s, root / "train_summary.json", summary.dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  DataArgs data;
  ModelArgs model;
  std::string out;
  std::string scheme = "lopdo";
  bool svg = false;
};

void cmd_evaluate(Session& s, const EvaluateArgs& a) {
  set_jobs(s, a.model.jobs);
  const auto opt = make_options(a.model);
  const auto scheme = parse_scheme(a.scheme);
  prepare_out_dir(s, a.out);
  const auto cohort = load_cohort(s, a.data);
  const Lineage lineage{config_hash(to_string(scheme), options_to_json(opt)), cohort.data_hash, opt.seed};
  s.log.seed = opt.seed;
  s.log.config_hash = lineage.config_hash;
  s.log.data_hash = lineage.data_hash;

  const auto t0 = std::chrono::steady_clock::now();
  auto res = evaluate(cohort.ds, scheme, opt);
  res.report.lineage = lineage;
  for (const auto& line : res.log) say(s, line);

  const fs::path root(a.out);
  write_text(s, root / "report.json", report_to_json(res.report));
  const auto manifest = with_lineage(manifest_to_json(res.manifest), lineage);
  write_text(s, root / "folds.json", manifest);
  const auto audit = audit_manifest(manifest);
  write_text(s, root / "audit.json", with_lineage(audit_to_json(audit), lineage));
  if (a.svg) {
    std::vector<RocSeries> series;
    if (auto r = roc_of(res.report, std::string(to_string(opt.subset)))) series.push_back(std::move(*r));
    else say(s, "roc: only one class among test predictions; plot has no curve");
    write_text(s, root / "roc.svg",
               roc_svg(series, fmt::format("ROC, {} {}", scheme == Scheme::lopo ? "universal" : "hybrid", to_string(opt.subset))));
  }
  const auto& m = res.report.aggregate;
  say(s, fmt::format("{} {}: n {} | AUROC {} | accuracy {:.3f} precision {:.3f} recall {:.3f} F1 {:.3f} | MAE {:.3f} | "
                     "median features {} | {:.1f} s",
                     to_string(scheme), to_string(opt.subset), m.n, fmt_opt(m.auroc), m.classification.accuracy,
                     m.classification.precision, m.classification.recall, m.classification.f1, m.mae,
                     m.median_feature_count, seconds_since(t0)));
  say(s, fmt::format("audit: {} folds, {} checks, {} violations", audit.folds_checked, audit.rows_checked,
                     audit.violations.size()));
  if (!audit.passed())
    throw InvariantError(fmt::format("leakage audit failed with {} violations (see audit.json)", audit.violations.size()));
}

// ---------------------------------------------------------------------------
// min-days

struct MinDaysArgs {
  DataArgs data;
  ModelArgs model;
  std::string out;
  std::size_t k_max = 28;
  bool svg = false;
};

void cmd_min_days(Session& s, const MinDaysArgs& a) {
  set_jobs(s, a.model.jobs);
  const auto opt = make_options(a.model);
  if (a.k_max < 1) throw UsageError("--k-max must be at least 1");
  prepare_out_dir(s, a.out);
  const auto cohort = load_cohort(s, a.data);
  const Lineage lineage{config_hash("min-days", options_to_json(opt)), cohort.data_hash, opt.seed};
  s.log.seed = opt.seed;
  s.log.config_hash = lineage.config_hash;
  s.log.data_hash = lineage.data_hash;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> lines;
  auto curve = min_days_curve(cohort.ds, opt, a.k_max, &lines);
  curve.lineage = lineage;
  for (const auto& l : lines) say(s, l);
  const fs::path root(a.out);
  write_text(s, root / "min_days.json", curve_to_json(curve));
  if (a.svg)
    write_text(s, root / "min_days.svg", min_days_svg(curve, fmt::format("Minimum days, hybrid {}", to_string(opt.subset))));
  say(s, fmt::format("min-days: {} points in {:.1f} s", curve.points.size(), seconds_since(t0)));
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::vector<std::string> in;
  std::string out;
  bool svg = false;
};

std::string_view model_label(SubsetName s) {
  switch (s) {
    case SubsetName::EOP: return "Eye Open Probability (EOP)";
    case SubsetName::SP: return "Smiling Probability (SP)";
    case SubsetName::HEA: return "Head Euler Angle (HEA)";
    case SubsetName::AU: return "Action Units (AU)";
    case SubsetName::EAR: return "Eye-aspect ratio (EAR)";
    case SubsetName::IVA: return "Inter-vector angle (IVA)";
    case SubsetName::TSF: return "Top Significant Features (TSF)";
    case SubsetName::FS: return "Feature Selection (FS)";
    case SubsetName::ALL: return "All features";
  }
  return "";
}

std::string feature_count_cell(double v) {
  return v == std::floor(v) ? fmt::format("{:.0f}", v) : fmt::format("{:.1f}", v);
}

void cmd_report(Session& s, const ReportArgs& a) {
  prepare_out_dir(s, a.out);
  std::vector<ModelReport> reports;
  std::vector<MinDaysCurve> curves;
  std::optional<Lineage> first;
  std::string first_path;
  std::vector<std::pair<std::string, std::string>> hashes;
  for (const auto& p : a.in) {
    const auto text = read_text(p);
    hashes.emplace_back(fs::path(p).filename().string(), s.log.input(p));
    ojson j;
    try {
      j = ojson::parse(text);
    } catch (const ojson::parse_error& e) {
      throw DataError(p + ": not valid JSON: " + e.what());
    }
    if (!j.contains("config") || !j.contains("lineage")) throw DataError(p + ": no embedded config and lineage");
    Lineage l;
    std::string expected;
    if (j.contains("points")) {
      curves.push_back(curve_from_json(text));
      l = curves.back().lineage;
      expected = config_hash("min-days", j.at("config").dump());
    } else {
      reports.push_back(report_from_json(text));
      l = reports.back().lineage;
      expected = config_hash(j.at("scheme").get<std::string>(), j.at("config").dump());
    }
    if (l.config_hash != expected)
      throw DataError(p + ": lineage mismatch, config hash " + l.config_hash + " does not match its configuration");
    if (j.at("config").at("seed").get<std::uint64_t>() != l.seed)
      throw DataError(p + ": lineage mismatch, seed differs from its configuration");
    if (!first) {
      first = l;
      first_path = p;
    } else if (l.data_hash != first->data_hash || l.seed != first->seed) {
      throw DataError(fmt::format("lineage mismatch: {} and {} come from different data or seeds", first_path, p));
    }
  }
  if (first) {
    s.log.seed = first->seed;
    s.log.data_hash = first->data_hash;
  }
  s.log.config_hash = combined_hash(hashes);
  const fs::path root(a.out);

  if (!reports.empty()) {
    std::stable_sort(reports.begin(), reports.end(), [](const ModelReport& x, const ModelReport& y) {
      return std::pair(x.scheme, x.subset) < std::pair(y.scheme, y.subset);
    });
    const bool mixed = std::any_of(reports.begin(), reports.end(),
                                   [&](const ModelReport& r) { return r.scheme != reports.front().scheme; });
    std::string csv = "Model,MAE,Accuracy,Precision,Recall,F1,AUROC,No. of Features\n";
    for (const auto& r : reports) {
      const auto& m = r.aggregate;
      const auto& c = m.classification;
      std::string name(model_label(r.subset));
      if (mixed) name = std::string(r.scheme == Scheme::lopo ? "Universal " : "Hybrid ") + name;
      csv += fmt::format("{},{:.2f},{:.2f},{:.2f},{:.2f},{:.2f},{},{}\n", name, m.mae, c.accuracy, c.precision, c.recall,
                         c.f1, m.auroc ? fmt::format("{:.2f}", *m.auroc) : std::string(),
                         feature_count_cell(m.median_feature_count));
    }
    write_text(s, root / "table.csv", csv);
    s.out << csv;
    if (a.svg) {
      std::vector<RocSeries> series;
      for (const auto& r : reports)
        if (auto rs = roc_of(r, std::string(to_string(r.scheme)) + " " + std::string(to_string(r.subset))))
          series.push_back(std::move(*rs));
      write_text(s, root / "roc.svg", roc_svg(series, "ROC curves"));
    }
  }
  if (!curves.empty()) {
    std::string csv = "Subset,k,AUROC,Folds,Skipped,Test instances,Instances,Participants\n";
    for (const auto& c : curves)
      for (const auto& p : c.points)
        csv += fmt::format("{},{},{},{},{},{},{},{}\n", to_string(c.subset), p.k,
                           p.auroc ? fmt::format("{:.4f}", *p.auroc) : std::string(), p.folds, p.skipped,
                           p.test_instances, p.instances, p.participants);
    write_text(s, root / "min_days.csv", csv);
    if (a.svg)
      write_text(s, root / "min_days.svg",
                 min_days_svg(curves.front(), fmt::format("Minimum days, hybrid {}", to_string(curves.front().subset))));
    say(s, fmt::format("report: {} min-days curve(s) written to min_days.csv", curves.size()));
  }
}

// ---------------------------------------------------------------------------
// config file expansion

struct ConfigEntry {
  std::string section;
  std::string key;
  std::string value;
  std::size_t line = 0;
};

std::string trim(std::string_view v) {
  const auto b = v.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = v.find_last_not_of(" \t\r");
  return std::string(v.substr(b, e - b + 1));
}

std::vector<ConfigEntry> read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::vector<ConfigEntry> out;
  std::string section, raw;
  for (std::size_t n = 1; std::getline(in, raw); ++n) {
    const auto line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw UsageError(fmt::format("{}:{}: malformed section header", path.string(), n));
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(fmt::format("{}:{}: expected key = value", path.string(), n));
    ConfigEntry e{section, trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)), n};
    std::replace(e.key.begin(), e.key.end(), '_', '-');
    if (e.value.size() >= 2 && (e.value.front() == '"' || e.value.front() == '\'') && e.value.back() == e.value.front())
      e.value = e.value.substr(1, e.value.size() - 2);
    if (e.key.empty()) throw UsageError(fmt::format("{}:{}: empty key", path.string(), n));
    out.push_back(std::move(e));
  }
  return out;
}

std::optional<bool> parse_bool(std::string v) {
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  return std::nullopt;
}

// Strips --config and appends every config value whose option the command
// line did not already set.
std::vector<std::string> expand_config(CLI::App& app, const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::optional<std::string> config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      config = args[++i];
    } else if (args[i].starts_with("--config=")) {
      config = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!config) return rest;
  CLI::App* sub = nullptr;
  for (const auto& a : rest)
    if (auto* s = app.get_subcommand_no_throw(a)) {
      sub = s;
      break;
    }
  if (!sub) return rest;
  std::set<std::string> given;
  for (const auto& a : rest)
    if (a.starts_with("--")) given.insert(a.substr(0, a.find('=')));
  const auto subs = app.get_subcommands([](CLI::App*) { return true; });
  // Section entries override global ones; within a scope the last line wins.
  std::vector<std::pair<CLI::Option*, ConfigEntry>> chosen;
  std::map<std::string, std::size_t> slot;
  for (auto& e : read_config(*config)) {
    const std::string flag = "--" + e.key;
    if (!e.section.empty() && !app.get_subcommand_no_throw(e.section))
      throw UsageError(fmt::format("{}:{}: unknown section [{}]", *config, e.line, e.section));
    if (!e.section.empty() && e.section != sub->get_name()) continue;
    auto* opt = sub->get_option_no_throw(flag);
    if (!opt) {
      const bool known = std::any_of(subs.begin(), subs.end(), [&](CLI::App* s) { return s->get_option_no_throw(flag); });
      if (!e.section.empty() || !known)
        throw UsageError(fmt::format("{}:{}: unknown option '{}'", *config, e.line, e.key));
      continue;
    }
    if (given.count(flag)) continue;
    const auto [it, fresh] = slot.emplace(flag, chosen.size());
    if (fresh)
      chosen.emplace_back(opt, std::move(e));
    else if (!chosen[it->second].second.section.empty() && e.section.empty())
      continue;
    else
      chosen[it->second].second = std::move(e);
  }
  for (const auto& [opt, e] : chosen) {
    const std::string flag = "--" + e.key;
    if (opt->get_expected_min() == 0) {
      const auto b = parse_bool(e.value);
      if (!b) throw UsageError(fmt::format("{}:{}: '{}' expects true or false", *config, e.line, e.key));
      if (*b) rest.push_back(flag);
    } else {
      rest.push_back(flag);
      rest.push_back(e.value);
    }
  }
  return rest;
}

const char* category(int code) {
  switch (code) {
    case kExitUsage: return "usage";
    case kExitData: return "data";
    default: return "internal";
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Facial-behaviour depression screening pipeline", "facepsy"};
  app.set_version_flag("--version", FACEPSY_VERSION);
  app.require_subcommand(1);
  app.footer("Any option can also be set in a key = value file passed with --config FILE; flags win.");
  app.add_option("--config", "Plain-text config file (handled before parsing)");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a seeded synthetic cohort");
  c_synth->add_option("--seed", synth.seed, "Generator seed")->required();
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--participants", synth.participants, "Participants")->capture_default_str();
  c_synth->add_option("--days", synth.days, "Study days")->capture_default_str();
  c_synth->add_option("--noncompliant", synth.noncompliant, "Participants without the endpoint PHQ")->capture_default_str();
  c_synth->add_option("--effect-size", synth.effect_size, "Planted effect size d (0 disables)")->capture_default_str();
  c_synth->add_option("--noise", synth.noise, "Per-frame noise multiplier")->capture_default_str();
  c_synth->add_option("--depressive-fraction", synth.depressive_fraction, "Share of depressive windows")
      ->capture_default_str();
  c_synth->add_option("--start-date", synth.start_date, "First study date (YYYY-MM-DD)")->capture_default_str();

  FeaturizeArgs feat;
  auto* c_feat = app.add_subcommand("featurize", "Day feature vectors for every participant-day");
  c_feat->add_option("--frames", feat.frames, "Directory of *.ndjson frame streams")->required()->check(CLI::ExistingDirectory);
  c_feat->add_option("--out", feat.out, "Output directory")->required();
  c_feat->add_option("--pca", feat.pca, "Existing PCA model (default: fit on all frames)")->check(CLI::ExistingFile);
  c_feat->add_option("--pca-frames", feat.pca_frames, "Frame cap for the PCA fit")->capture_default_str();
  c_feat->add_flag("--acceleration", feat.acceleration, "Also write IVA acceleration features");
  c_feat->add_option("--jobs", feat.jobs, "Worker threads (0 = all cores)")->capture_default_str();

  LabelArgs label;
  auto* c_label = app.add_subcommand("label", "Episode windows and targets from PHQ-9 administrations");
  c_label->add_option("--phq", label.phq, "PHQ-9 administrations CSV")->required()->check(CLI::ExistingFile);
  c_label->add_option("--out", label.out, "Output directory")->required();
  c_label->add_option("--target-rule", label.target_rule, "Regression target rule")
      ->check(CLI::IsMember({"end", "start"}))
      ->capture_default_str();

  ScreenArgs screen;
  auto* c_screen = app.add_subcommand("screen", "Point-biserial screening of day features");
  c_screen->add_option("--features", screen.features, "day_features.csv")->required()->check(CLI::ExistingFile);
  c_screen->add_option("--labels", screen.labels, "labels.csv")->required()->check(CLI::ExistingFile);
  c_screen->add_option("--out", screen.out, "Output directory")->required();
  c_screen->add_option("--alpha", screen.alpha, "Significance level")->capture_default_str();
  c_screen->add_option("--r-min", screen.r_min, "Minimum |r|")->capture_default_str();
  c_screen->add_option("--top", screen.top, "Rows to print")->capture_default_str();
  c_screen->add_option("--jobs", screen.jobs, "Worker threads (0 = all cores)")->capture_default_str();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Fit pipelines on every labeled participant-day");
  add_data_options(c_train, train.data);
  add_model_options(c_train, train.model, false);
  c_train->add_option("--out", train.out, "Output directory")->required();
  c_train->add_option("--task", train.task, "Which models to fit")
      ->check(CLI::IsMember({"classification", "regression", "both"}))
      ->capture_default_str();

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "LOPO or LOPDO evaluation with a leakage audit");
  add_data_options(c_eval, ev.data);
  add_model_options(c_eval, ev.model, true);
  c_eval->add_option("--out", ev.out, "Output directory")->required();
  c_eval->add_option("--scheme", ev.scheme, "lopo (universal) or lopdo (hybrid)")
      ->check(CLI::IsMember({"lopo", "lopdo"}))
      ->capture_default_str();
  c_eval->add_flag("--svg", ev.svg, "Also write roc.svg");

  MinDaysArgs md;
  auto* c_md = app.add_subcommand("min-days", "Hybrid AUROC as a function of days per participant");
  add_data_options(c_md, md.data);
  add_model_options(c_md, md.model, true);
  c_md->add_option("--out", md.out, "Output directory")->required();
  c_md->add_option("--k-max", md.k_max, "Largest k")->capture_default_str();
  c_md->add_flag("--svg", md.svg, "Also write min_days.svg");

  ReportArgs rep;
  auto* c_rep = app.add_subcommand("report", "Model table from report.json / min_days.json files");
  c_rep->add_option("--in", rep.in, "Report or curve JSON (repeatable)")->required()->check(CLI::ExistingFile);
  c_rep->add_option("--out", rep.out, "Output directory")->required();
  c_rep->add_flag("--svg", rep.svg, "Also write plots");

  Session session{out, err, RunLog{}, std::nullopt};
  session.log.args = args;
  try {
    auto expanded = expand_config(app, args);
    std::reverse(expanded.begin(), expanded.end());
    app.parse(expanded);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    err << "facepsy: usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  int code = kExitOk;
  std::string message;
  try {
    const std::vector<std::pair<CLI::App*, std::function<void()>>> commands = {
        {c_synth, [&] { cmd_synth(session, synth); }},     {c_feat, [&] { cmd_featurize(session, feat); }},
        {c_label, [&] { cmd_label(session, label); }},     {c_screen, [&] { cmd_screen(session, screen); }},
        {c_train, [&] { cmd_train(session, train); }},     {c_eval, [&] { cmd_evaluate(session, ev); }},
        {c_md, [&] { cmd_min_days(session, md); }},        {c_rep, [&] { cmd_report(session, rep); }}};
    for (const auto& [sub, body] : commands)
      if (sub->parsed()) {
        session.log.command = sub->get_name();
        body();
      }
  } catch (const UsageError& e) {
    code = kExitUsage;
    message = e.what();
  } catch (const DataError& e) {
    code = kExitData;
    message = e.what();
  } catch (const nlohmann::json::exception& e) {
    code = kExitData;
    message = std::string("malformed JSON input: ") + e.what();
  } catch (const fs::filesystem_error& e) {
    code = kExitData;
    message = e.what();
  } catch (const std::exception& e) {
    code = kExitInternal;
    message = e.what();
  }
  if (code != kExitOk) err << "facepsy: " << category(code) << " error: " << message << '\n';
  if (session.out_dir) {
    try {
      std::ofstream f(*session.out_dir / "run_log.json", std::ios::binary);
      f << session.log.to_json(code == kExitOk ? "ok" : "failed", code == kExitOk ? "" : category(code), message);
    } catch (const std::exception& e) {
      err << "facepsy: cannot write run_log.json: " << e.what() << '\n';
      if (code == kExitOk) code = kExitData;
    }
  }
  return code;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + (argc > 0 ? 1 : 0), argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace facepsy::cli
