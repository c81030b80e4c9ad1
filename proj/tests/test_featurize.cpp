#include <doctest.h>

#include <algorithm>
#include <set>

#include "facepsy/featurize.hpp"
#include "support.hpp"

using namespace facepsy;
using namespace facepsy::testing;

namespace {

const IvaPairList& pairs() {
  static const IvaPairList p = build_pair_list(LandmarkMap::standard());
  return p;
}

const PcaModel& face_pca() {
  static const PcaModel m = [] {
    Rng rng(31);
    RowMatrix x(40, static_cast<Eigen::Index>(pairs().size()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const auto a = compute_iva(random_face(rng, 3.0), pairs());
      x.row(i) = Eigen::Map<const Eigen::RowVectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
    }
    return fit_pca(x, kIvaComponents);
  }();
  return m;
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

bool same_rows(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), same);
}

std::vector<FrameRecord> session(Rng& rng, const std::string& sid, std::int64_t start, int n) {
  std::vector<FrameRecord> out;
  for (int i = 0; i < n; ++i) out.push_back(make_frame(rng, "p01", sid, start + 400LL * i + uniform_int(rng, -40, 40)));
  return out;
}

}  // namespace

TEST_CASE("channel inventory and feature layout") {
  const auto& ch = channel_inventory();
  CHECK(ch.size() == 40);
  CHECK(std::set<std::string>(ch.begin(), ch.end()).size() == 40);
  CHECK(ch.front() == "AU01");
  CHECK(ch[11] == "AU24");
  CHECK(ch[12] == "smilingProbability");
  CHECK(ch[19] == "ear_right");
  CHECK(ch[20] == "iva_pc1");
  CHECK(ch[39] == "iva_vel10");
  const auto& names = feature_names();
  CHECK(names.size() == 1280);
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == 1280);
  for (std::size_t e = 0; e < 4; ++e) {
    const auto suffix = "_" + std::string(kEpochNames[e]);
    for (std::size_t f = e * 320; f < (e + 1) * 320; ++f) CHECK(names[f].ends_with(suffix));
  }
  CHECK(names[feature_index(Epoch::morning, 19, Stat::sum)] == "ear_right_sum_morning");
  CHECK(find_feature("AU12_median_morning") == feature_index(Epoch::morning, 6, Stat::median));
  CHECK_FALSE(find_feature("nope").has_value());
  CHECK(acceleration_feature_names().size() == 320);
  CHECK(acceleration_feature_names().front() == "iva_acc1_min_midnight");
}

TEST_CASE("epoch boundaries") {
  const auto h = [](int hh, int mm = 0, int ss = 0) { return ((hh * 60LL + mm) * 60LL + ss) * 1000LL; };
  CHECK(assign_epoch(h(0)) == Epoch::midnight);
  CHECK(assign_epoch(h(6) - 1) == Epoch::midnight);
  CHECK(assign_epoch(h(6)) == Epoch::morning);
  CHECK(assign_epoch(h(12)) == Epoch::afternoon);
  CHECK(assign_epoch(h(18)) == Epoch::evening);
  CHECK(assign_epoch(h(23, 59, 59)) == Epoch::evening);
}

TEST_CASE("epoch statistics oracles") {
  const std::vector<double> v = {4, 1, 3, 2};
  const auto s = aggregate_epoch(v);
  CHECK(s[0] == 1);
  CHECK(s[1] == 4);
  CHECK(s[2] == 2.5);
  CHECK(s[3] == 2.5);
  CHECK(s[4] == 10);
  CHECK(s[5] == doctest::Approx(1.118034).epsilon(1e-7));
  CHECK(s[6] == 1.75);
  CHECK(s[7] == 3.25);
  const std::vector<double> one = {5};
  const auto t = aggregate_epoch(one);
  for (std::size_t i = 0; i < 8; ++i) CHECK(t[i] == (i == 5 ? 0.0 : 5.0));
  for (double x : aggregate_epoch({})) CHECK(std::isnan(x));
  const std::vector<double> gaps = {kMissing, 2, kMissing};
  CHECK(aggregate_epoch(gaps)[4] == 2);
}

TEST_CASE("one 25-frame morning session makes one instance") {
  Rng rng(32);
  const auto d = LocalDate::parse("2024-02-01");
  const auto frames = session(rng, "s1", at(d, 10), 25);
  const auto inst = build_day_instances(frames, face_pca(), pairs());
  REQUIRE(inst.size() == 1);
  CHECK(inst[0].date == d);
  CHECK(inst[0].features.size() == 1280);
  CHECK(inst[0].frame_count == std::array<int, 4>{0, 25, 0, 0});
  for (std::size_t f = 0; f < 1280; ++f)
    if (f / 320 != 1) CHECK(std::isnan(inst[0].features[f]));
  CHECK(inst[0].features[feature_index(Epoch::morning, 0, Stat::min)] >= 0.0);
}

TEST_CASE("frames across local midnight split into two days") {
  Rng rng(33);
  const auto d = LocalDate::parse("2024-02-01");
  std::vector<FrameRecord> frames;
  for (int m = 0; m < 5; ++m) frames.push_back(make_frame(rng, "p01", "s", at(d, 23, 58) + m * 60'000LL));
  const auto inst = build_day_instances(frames, face_pca(), pairs());
  REQUIRE(inst.size() == 2);
  CHECK(inst[0].date == d);
  CHECK(inst[1].date == d + 1);
  CHECK(inst[0].frame_count[3] == 2);
  CHECK(inst[1].frame_count[0] == 3);
  CHECK(build_day_instances(std::vector<FrameRecord>{}, face_pca(), pairs()).empty());
}

TEST_CASE("property: frame order does not matter") {
  Rng rng(34);
  const auto d = LocalDate::parse("2024-02-01");
  for (int t = 0; t < 5; ++t) {
    std::vector<FrameRecord> frames;
    for (int s = 0; s < 6; ++s) {
      auto f = session(rng, "s" + std::to_string(s), at(d + uniform_int(rng, 0, 2), uniform_int(rng, 0, 23)), uniform_int(rng, 1, 25));
      for (auto& r : f)
        if (uniform(rng) < 0.2) r.au.reset();
      frames.insert(frames.end(), f.begin(), f.end());
    }
    std::sort(frames.begin(), frames.end(), [](const auto& a, const auto& b) { return a.captured_at < b.captured_at; });
    const auto a = build_day_instances(frames, face_pca(), pairs());
    std::shuffle(frames.begin(), frames.end(), rng);
    const auto b = build_day_instances(frames, face_pca(), pairs());
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].date == b[i].date);
      CHECK(a[i].frame_count == b[i].frame_count);
      CHECK(same_rows(a[i].features, b[i].features));
    }
  }
}

TEST_CASE("property: sum equals mean times sample count") {
  const auto& c = small_cohort();
  for (std::size_t p = 0; p < 2; ++p) {
    const auto inst = build_day_instances(c.frames[p], face_pca(), pairs());
    for (const auto& d : inst)
      for (std::size_t e = 0; e < 4; ++e)
        for (std::size_t ch = 0; ch < 40; ++ch) {
          const double sum = d.features[feature_index(static_cast<Epoch>(e), ch, Stat::sum)];
          const double mean = d.features[feature_index(static_cast<Epoch>(e), ch, Stat::mean)];
          if (std::isnan(sum) || mean == 0.0) continue;
          const double n = std::round(sum / mean);
          CHECK(n >= 1);
          CHECK(n <= d.frame_count[e]);
          CHECK(std::fabs(sum - n * mean) <= 1e-9 * std::max(1.0, std::fabs(sum)));
        }
  }
}

TEST_CASE("cohort featurization and the cached evaluation path agree") {
  const auto& c = small_cohort();
  std::vector<FrameTable> tables;
  for (const auto& f : c.frames) tables.push_back(prepare_frames(f));
  const auto all = featurize_cohort(tables, face_pca(), pairs());
  std::size_t k = 0;
  for (const auto& t : tables) {
    const auto one = build_day_instances(t, face_pca(), pairs());
    for (const auto& d : one) {
      REQUIRE(k < all.size());
      CHECK(all[k].participant_id == d.participant_id);
      CHECK(same_rows(all[k].features, d.features));
      ++k;
    }
  }
  CHECK(k == all.size());

  const auto& ds = small_dataset();
  std::vector<std::size_t> rows = {0, ds.size() / 2, ds.size() - 1};
  const auto x = instance_features(ds, rows, &face_pca(), pairs());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& inst = ds.instances[rows[r]];
    const auto it = std::find_if(all.begin(), all.end(), [&](const DayInstance& d) {
      return d.participant_id == inst.participant_id && d.date == inst.date;
    });
    REQUIRE(it != all.end());
    const std::vector<double> row(x.row(static_cast<Eigen::Index>(r)).data(), x.row(static_cast<Eigen::Index>(r)).data() + 1280);
    CHECK(same_rows(row, it->features));
  }
}

TEST_CASE("feature CSV round-trips missing cells") {
  const auto& c = small_cohort();
  auto rows = build_day_instances(c.frames[0], face_pca(), pairs());
  rows.resize(std::min<std::size_t>(rows.size(), 4));
  TempDir dir("feat");
  write_feature_csv(dir.path / "f.csv", rows);
  const auto back = read_feature_csv(dir.path / "f.csv");
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].date == rows[i].date);
    CHECK(same_rows(back[i].features, rows[i].features));
  }
}

TEST_CASE("acceleration features are the per-session derivative of velocity") {
  const auto& c = small_cohort();
  const auto t = prepare_frames(c.frames[1]);
  const auto iva = compute_iva_channels(t, face_pca(), pairs());
  const auto acc = iva_acceleration_channels(t, iva);
  CHECK(acc.rows() == static_cast<Eigen::Index>(t.frame_count()));
  CHECK(acc.cols() == 10);
  for (const auto& s : t.session_frames) {
    if (s.empty()) continue;
    for (Eigen::Index j = 0; j < 10; ++j) CHECK(std::isnan(acc(s[0], j)));
    for (std::size_t i = 2; i < s.size(); ++i) {
      const double v0 = iva.velocity(s[i - 1], 0), v1 = iva.velocity(s[i], 0);
      if (std::isnan(v0) || std::isnan(v1)) continue;
      const double dt = static_cast<double>(t.captured_at[s[i]] - t.captured_at[s[i - 1]]) / 1000.0;
      CHECK(acc(s[i], 0) == doctest::Approx((v1 - v0) / dt).epsilon(1e-12));
    }
  }
  CHECK(acceleration_day_features(t, 0, acc).size() == 320);
}
