#include "facepsy/featurize.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <unordered_map>

#include "facepsy/io.hpp"

namespace facepsy {

const std::vector<std::string>& channel_inventory() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (std::size_t i = 0; i < kAuCount; ++i) n.push_back(au_name(i));
    n.insert(n.end(), {"smilingProbability", "leftEyeOpenProbability", "rightEyeOpenProbability",
                       "headEulerAngle_X", "headEulerAngle_Y", "headEulerAngle_Z", "ear_left", "ear_right"});
    for (std::size_t i = 1; i <= kIvaComponents; ++i) n.push_back("iva_pc" + std::to_string(i));
    for (std::size_t i = 1; i <= kIvaComponents; ++i) n.push_back("iva_vel" + std::to_string(i));
    return n;
  }();
  return names;
}

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    n.reserve(kDayFeatureCount);
    for (auto e : kEpochNames)
      for (const auto& c : channel_inventory())
        for (auto s : kStatNames) n.push_back(c + "_" + std::string(s) + "_" + std::string(e));
    return n;
  }();
  return names;
}

std::optional<std::size_t> find_feature(std::string_view name) {
  static const std::unordered_map<std::string_view, std::size_t> lookup = [] {
    std::unordered_map<std::string_view, std::size_t> m;
    const auto& n = feature_names();
    for (std::size_t i = 0; i < n.size(); ++i) m.emplace(n[i], i);
    return m;
  }();
  auto it = lookup.find(name);
  if (it == lookup.end()) return std::nullopt;
  return it->second;
}

Epoch assign_epoch(std::int64_t ms) {
  ms = ms_of_day(ms);
  constexpr std::int64_t six_hours = 6LL * 3'600'000;
  return static_cast<Epoch>(ms / six_hours);
}

std::array<double, kStatCount> aggregate_epoch(std::span<const double> values) {
  std::vector<double> v;
  v.reserve(values.size());
  for (double x : values)
    if (!is_missing(x)) v.push_back(x);
  std::array<double, kStatCount> out;
  if (v.empty()) {
    out.fill(kMissing);
    return out;
  }
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  auto quantile = [&](double p) {
    const double pos = p * (n - 1.0);
    const auto lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + frac * (v[lo + 1] - v[lo]);
  };
  out[static_cast<int>(Stat::min)] = v.front();
  out[static_cast<int>(Stat::max)] = v.back();
  out[static_cast<int>(Stat::mean)] = mean;
  out[static_cast<int>(Stat::median)] = quantile(0.5);
  out[static_cast<int>(Stat::sum)] = sum;
  out[static_cast<int>(Stat::std)] = std::sqrt(ss / n);
  out[static_cast<int>(Stat::q1)] = quantile(0.25);
  out[static_cast<int>(Stat::q3)] = quantile(0.75);
  return out;
}

std::optional<std::size_t> FrameTable::day_index(LocalDate d) const {
  auto it = std::lower_bound(days.begin(), days.end(), d);
  if (it == days.end() || *it != d) return std::nullopt;
  return static_cast<std::size_t>(it - days.begin());
}

FrameTable prepare_frames(std::span<const FrameRecord> frames, const LandmarkMap& map) {
  FrameTable t;
  const std::size_t n = frames.size();
  if (n == 0) return t;
  t.participant_id = frames.front().participant_id;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frames[a].captured_at < frames[b].captured_at; });

  t.captured_at.resize(n);
  t.date.resize(n);
  t.epoch.resize(n);
  t.session.resize(n);
  t.static_channels = RowMatrix::Constant(n, kStaticChannels, kMissing);
  t.bearings = RowMatrix::Constant(n, kLandmarkCount, kMissing);
  t.has_landmarks.assign(n, 0);

  const auto& left_eye = map.region("left_eye");
  const auto& right_eye = map.region("right_eye");
  std::map<std::string, int> session_ids;
  auto opt = [](const std::optional<double>& v) { return v ? *v : kMissing; };

  for (std::size_t i = 0; i < n; ++i) {
    const FrameRecord& f = frames[order[i]];
    if (f.participant_id != t.participant_id)
      throw DataError("frame table mixes participants '" + t.participant_id + "' and '" + f.participant_id + "'");
    t.captured_at[i] = f.captured_at;
    const std::int64_t local = f.local_ms();
    t.date[i] = LocalDate::from_local_ms(local);
    t.epoch[i] = assign_epoch(local);
    auto [it, inserted] = session_ids.emplace(f.session_id, static_cast<int>(session_ids.size()));
    t.session[i] = it->second;

    double* row = t.static_channels.row(i).data();
    if (f.au)
      for (std::size_t a = 0; a < kAuCount; ++a) row[a] = opt((*f.au)[a]);
    row[12] = opt(f.smile_prob);
    row[13] = opt(f.eye_open_left);
    row[14] = opt(f.eye_open_right);
    row[15] = opt(f.head_pitch);
    row[16] = opt(f.head_yaw);
    row[17] = opt(f.head_roll);
    if (f.landmarks) {
      const auto& lm = *f.landmarks;
      const std::span<const Point> pts(lm);
      row[18] = opt(compute_ear(pts.subspan(left_eye.begin, left_eye.size)));
      row[19] = opt(compute_ear(pts.subspan(right_eye.begin, right_eye.size)));
      const auto b = landmark_bearings(pts, map);
      std::copy(b.begin(), b.end(), t.bearings.row(i).data());
      t.has_landmarks[i] = 1;
    }
  }

  t.session_frames.resize(session_ids.size());
  for (std::size_t i = 0; i < n; ++i) t.session_frames[t.session[i]].push_back(static_cast<int>(i));
  for (const auto& sf : t.session_frames)
    for (std::size_t j = 1; j < sf.size(); ++j)
      if (t.captured_at[sf[j]] <= t.captured_at[sf[j - 1]])
        throw DataError("participant '" + t.participant_id + "': duplicate timestamp within a session");

  t.days = t.date;
  std::sort(t.days.begin(), t.days.end());
  t.days.erase(std::unique(t.days.begin(), t.days.end()), t.days.end());
  t.day_frames.resize(t.days.size());
  for (std::size_t i = 0; i < n; ++i) t.day_frames[*t.day_index(t.date[i])].push_back(static_cast<int>(i));
  return t;
}

RowMatrix angle_rows(const FrameTable& t, std::span<const int> frames, const IvaPairList& pairs) {
  RowMatrix out(static_cast<Eigen::Index>(frames.size()), static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t r = 0; r < frames.size(); ++r) {
    const double* b = t.bearings.row(frames[r]).data();
    iva_from_bearings(std::span<const double>(b, kLandmarkCount), pairs,
                      std::span<double>(out.row(static_cast<Eigen::Index>(r)).data(), pairs.size()));
  }
  return out;
}

IvaChannels compute_iva_channels(const FrameTable& t, const PcaModel& pca, const IvaPairList& pairs,
                                 std::span<const int> sessions) {
  if (pca.dims() != pairs.size()) throw DataError("PCA model dims do not match the IVA pair list");
  const auto n = static_cast<Eigen::Index>(t.frame_count());
  const auto k = static_cast<Eigen::Index>(pca.k());
  IvaChannels out{RowMatrix::Constant(n, k, kMissing), RowMatrix::Constant(n, k, kMissing)};

  std::vector<int> all;
  if (sessions.empty()) {
    all.resize(t.session_frames.size());
    std::iota(all.begin(), all.end(), 0);
    sessions = all;
  }
  RowMatrix scores;
  for (int s : sessions) {
    const auto& sf = t.session_frames[s];
    std::vector<int> with_lm;
    for (int f : sf)
      if (t.has_landmarks[f]) with_lm.push_back(f);
    RowMatrix sess_scores = RowMatrix::Constant(static_cast<Eigen::Index>(sf.size()), k, kMissing);
    if (!with_lm.empty()) {
      const RowMatrix angles = angle_rows(t, with_lm, pairs);
      pca.apply_batch(angles, scores);
      std::size_t j = 0;
      for (std::size_t r = 0; r < sf.size(); ++r)
        if (t.has_landmarks[sf[r]]) sess_scores.row(static_cast<Eigen::Index>(r)) = scores.row(j++);
    }
    std::vector<std::int64_t> ts(sf.size());
    for (std::size_t r = 0; r < sf.size(); ++r) ts[r] = t.captured_at[sf[r]];
    const RowMatrix vel = iva_dynamics(sess_scores, ts);
    for (std::size_t r = 0; r < sf.size(); ++r) {
      out.scores.row(sf[r]) = sess_scores.row(static_cast<Eigen::Index>(r));
      out.velocity.row(sf[r]) = vel.row(static_cast<Eigen::Index>(r));
    }
  }
  return out;
}

std::vector<int> sessions_for_days(const FrameTable& t, std::span<const std::size_t> day_indices) {
  std::vector<char> mark(t.session_frames.size(), 0);
  for (std::size_t d : day_indices)
    for (int f : t.day_frames[d]) mark[t.session[f]] = 1;
  std::vector<int> out;
  for (std::size_t s = 0; s < mark.size(); ++s)
    if (mark[s]) out.push_back(static_cast<int>(s));
  return out;
}

namespace {

void aggregate_channel(const FrameTable& t, std::size_t day, std::size_t channel,
                       const std::function<double(int)>& value, std::span<double> row) {
  std::array<std::vector<double>, kEpochCount> buckets;
  for (int f : t.day_frames[day]) buckets[static_cast<int>(t.epoch[f])].push_back(value(f));
  for (std::size_t e = 0; e < kEpochCount; ++e) {
    const auto stats = aggregate_epoch(buckets[e]);
    for (std::size_t s = 0; s < kStatCount; ++s)
      row[feature_index(static_cast<Epoch>(e), channel, static_cast<Stat>(s))] = stats[s];
  }
}

}  // namespace

std::vector<double> static_day_features(const FrameTable& t, std::size_t day) {
  std::vector<double> row(kDayFeatureCount, kMissing);
  for (std::size_t c = 0; c < kStaticChannels; ++c)
    aggregate_channel(t, day, c, [&](int f) { return t.static_channels(f, static_cast<Eigen::Index>(c)); }, row);
  return row;
}

void fill_iva_features(const FrameTable& t, std::size_t day, const IvaChannels& iva, std::span<double> row) {
  for (std::size_t c = 0; c < kIvaComponents; ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    aggregate_channel(t, day, kIvaScoreChannel + c, [&](int f) { return iva.scores(f, col); }, row);
    aggregate_channel(t, day, kIvaVelocityChannel + c, [&](int f) { return iva.velocity(f, col); }, row);
  }
}

RowMatrix iva_acceleration_channels(const FrameTable& t, const IvaChannels& iva) {
  RowMatrix acc = RowMatrix::Constant(iva.velocity.rows(), iva.velocity.cols(), kMissing);
  for (const auto& sf : t.session_frames) {
    RowMatrix vel(static_cast<Eigen::Index>(sf.size()), iva.velocity.cols());
    std::vector<std::int64_t> ts(sf.size());
    for (std::size_t r = 0; r < sf.size(); ++r) {
      vel.row(static_cast<Eigen::Index>(r)) = iva.velocity.row(sf[r]);
      ts[r] = t.captured_at[sf[r]];
    }
    const RowMatrix a = iva_dynamics(vel, ts);
    for (std::size_t r = 0; r < sf.size(); ++r) acc.row(sf[r]) = a.row(static_cast<Eigen::Index>(r));
  }
  return acc;
}

const std::vector<std::string>& acceleration_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (auto e : kEpochNames)
      for (std::size_t c = 1; c <= kIvaComponents; ++c)
        for (auto s : kStatNames)
          v.push_back("iva_acc" + std::to_string(c) + "_" + std::string(s) + "_" + std::string(e));
    return v;
  }();
  return names;
}

std::vector<double> acceleration_day_features(const FrameTable& t, std::size_t day, const RowMatrix& acc) {
  constexpr std::size_t kBlock = kIvaComponents * kStatCount;
  std::vector<double> row(kBlock * kEpochCount, kMissing);
  for (std::size_t c = 0; c < kIvaComponents; ++c) {
    std::array<std::vector<double>, kEpochCount> buckets;
    for (int f : t.day_frames[day]) buckets[static_cast<int>(t.epoch[f])].push_back(acc(f, static_cast<Eigen::Index>(c)));
    for (std::size_t e = 0; e < kEpochCount; ++e) {
      const auto stats = aggregate_epoch(buckets[e]);
      for (std::size_t s = 0; s < kStatCount; ++s) row[e * kBlock + c * kStatCount + s] = stats[s];
    }
  }
  return row;
}

std::array<int, kEpochCount> epoch_frame_counts(const FrameTable& t, std::size_t day) {
  std::array<int, kEpochCount> c{};
  for (int f : t.day_frames[day]) ++c[static_cast<int>(t.epoch[f])];
  return c;
}

std::vector<DayInstance> build_day_instances(const FrameTable& t, const PcaModel& pca, const IvaPairList& pairs) {
  std::vector<DayInstance> out;
  if (t.frame_count() == 0) return out;
  const IvaChannels iva = compute_iva_channels(t, pca, pairs);
  for (std::size_t d = 0; d < t.days.size(); ++d) {
    DayInstance inst;
    inst.participant_id = t.participant_id;
    inst.date = t.days[d];
    inst.features = static_day_features(t, d);
    fill_iva_features(t, d, iva, inst.features);
    inst.frame_count = epoch_frame_counts(t, d);
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<DayInstance> build_day_instances(std::span<const FrameRecord> frames, const PcaModel& pca,
                                             const IvaPairList& pairs) {
  return build_day_instances(prepare_frames(frames), pca, pairs);
}

std::vector<DayInstance> featurize_cohort(std::span<const FrameTable> tables, const PcaModel& pca,
                                          const IvaPairList& pairs) {
  std::vector<std::vector<DayInstance>> parts(tables.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < tables.size(); ++i) parts[i] = build_day_instances(tables[i], pca, pairs);
  std::vector<DayInstance> out;
  for (auto& p : parts)
    for (auto& d : p) out.push_back(std::move(d));
  return out;
}

RowMatrix pca_training_rows(std::span<const FrameTable> tables, std::span<const std::vector<int>> frames,
                            const IvaPairList& pairs, std::size_t max_rows) {
  std::vector<std::pair<std::size_t, int>> pool;
  for (std::size_t t = 0; t < tables.size(); ++t)
    for (int f : frames[t])
      if (tables[t].has_landmarks[f]) pool.emplace_back(t, f);
  const std::size_t take = std::min(pool.size(), max_rows);
  RowMatrix out(static_cast<Eigen::Index>(take), static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t j = 0; j < take; ++j) {
    const auto& [t, f] = pool[j * pool.size() / take];
    iva_from_bearings(std::span<const double>(tables[t].bearings.row(f).data(), kLandmarkCount), pairs,
                      std::span<double>(out.row(static_cast<Eigen::Index>(j)).data(), pairs.size()));
  }
  return out;
}

void write_feature_csv(const std::filesystem::path& path, std::span<const DayInstance> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "participant_id,local_date";
  for (const auto& n : feature_names()) out << ',' << n;
  out << '\n';
  for (const auto& r : rows) {
    out << r.participant_id << ',' << r.date.to_string();
    for (double v : r.features) out << ',' << format_double(v);
    out << '\n';
  }
}

std::vector<DayInstance> read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty feature file");
  auto header = split_csv_line(line);
  if (header.size() != kDayFeatureCount + 2 || header[0] != "participant_id" || header[1] != "local_date")
    throw DataError(path.string() + ": unexpected feature header");
  for (std::size_t i = 0; i < kDayFeatureCount; ++i)
    if (header[i + 2] != feature_names()[i])
      throw DataError(path.string() + ": feature column " + std::to_string(i) + " is '" + header[i + 2] +
                      "', expected '" + feature_names()[i] + "'");
  std::vector<DayInstance> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError(path.string() + ": line " + std::to_string(lineno) + " has wrong column count");
    DayInstance d;
    d.participant_id = cells[0];
    d.date = LocalDate::parse(cells[1]);
    d.features.resize(kDayFeatureCount);
    for (std::size_t i = 0; i < kDayFeatureCount; ++i)
      d.features[i] = cells[i + 2].empty() ? kMissing : parse_double(cells[i + 2]);
    rows.push_back(std::move(d));
  }
  return rows;
}

}  // namespace facepsy
