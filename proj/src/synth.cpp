#include "facepsy/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include <json.hpp>

#include "facepsy/featurize.hpp"
#include "facepsy/io.hpp"
#include "facepsy/learn.hpp"

namespace facepsy {

namespace {

// Knob magnitudes at effect size d = 1.
constexpr double kMorningCount = 2.0;  // morning session rate × (1 + k·d)
constexpr double kAperture = 0.10;  // eyelid aperture, morning
constexpr double kEyeOpenLevel = 0.04;  // eye-open probability, morning
constexpr double kYaw = 6.0;  // degrees, morning (negative)
constexpr double kSmileLevel = 0.08;  // smile intensity, morning
constexpr double kAu12 = 0.12;  // AU12 intensity, morning (negative)
constexpr double kSmileSpread = 2.0;  // extra classifier noise, evening
constexpr double kEyeSpread = 2.5;
constexpr double kAu07Spread = 0.8;  // per-frame SD multiplier, evening
constexpr double kDayAperture = 0.06;  // participant-day level noise
constexpr double kDaySmile = 0.06;
constexpr double kDayEye = 0.08;

constexpr std::array<double, kAuCount> kAuMean = {0.25, 0.22, 0.20, 0.30, 0.60, 0.25,
                                                  0.42, 0.30, 0.20, 0.30, 0.20, 0.25};
constexpr double kAuFrameSd = 0.12;
constexpr std::size_t kAu07 = 4;
constexpr std::size_t kAu12Slot = 6;

constexpr double kEyeWidth = 30.0;

double round_to(double v, double q) { return std::round(v / q) * q; }
double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// 16-point eye contour: inner corner, upper arc, outer corner, lower arc.
void eye_contour(std::vector<std::array<double, 3>>& pts, std::size_t begin, double cx, double cy, double inward,
                 double aperture) {
  const double h_up = aperture * kEyeWidth * 0.55, h_lo = aperture * kEyeWidth * 0.45;
  for (int i = 0; i <= 8; ++i) {
    const double a = std::numbers::pi * i / 8.0;
    const double x = cx + inward * (kEyeWidth / 2.0) * std::cos(a);
    pts[begin + static_cast<std::size_t>(i)] = {x, cy - h_up * std::sin(a), 12.0};
    if (i > 0 && i < 8) pts[begin + 16 - static_cast<std::size_t>(i)] = {x, cy + h_lo * std::sin(a), 12.0};
  }
}

}  // namespace

void SynthConfig::validate() const {
  if (n_participants < 3) throw UsageError("synth needs at least 3 participants");
  if (noncompliant > n_participants) throw UsageError("noncompliant exceeds participant count");
  if (study_days < 15) throw UsageError("study_days must be at least 15");
  if (!(depressive_fraction >= 0.0 && depressive_fraction <= 1.0))
    throw UsageError("depressive_fraction must lie in [0,1]");
  for (double r : session_rate)
    if (!(r >= 0.0)) throw UsageError("session rates must be >= 0");
  if (min_frames < 2 || max_frames > 25 || min_frames > max_frames)
    throw UsageError("frames per session must satisfy 2 <= min <= max <= 25");
  if (frame_interval_ms <= 0 || frame_jitter_ms < 0 || frame_jitter_ms >= frame_interval_ms / 2 || frame_jitter_ms > 40)
    throw UsageError("frame timing must be 400 ms-like with jitter <= 40 ms");
  if (!(au_failure >= 0.0 && au_failure <= 1.0)) throw UsageError("au_failure must lie in [0,1]");
  if (!(day_skip >= 0.0 && day_skip < 1.0)) throw UsageError("day_skip must lie in [0,1)");
  if (!(effect_size >= 0.0)) throw UsageError("effect size d must be >= 0");
  if (!(noise >= 0.0)) throw UsageError("noise must be >= 0");
  if (enrollment_spread_days < 0) throw UsageError("enrollment spread must be >= 0");
  if (tz_offsets_minutes.empty()) throw UsageError("need at least one timezone offset");
  (void)LocalDate::parse(start_date);
}

const std::vector<PlantedEffect>& planted_effects() {
  static const std::vector<PlantedEffect> effects = {
      {"ear_right_sum_morning", +1, "morning session rate and eyelid aperture"},
      {"ear_left_sum_morning", +1, "morning session rate and eyelid aperture"},
      {"headEulerAngle_Y_sum_morning", -1, "morning head-yaw offset"},
      {"leftEyeOpenProbability_sum_morning", +1, "morning session rate and eye-open level"},
      {"rightEyeOpenProbability_sum_morning", +1, "morning session rate and eye-open level"},
      {"smilingProbability_sum_morning", +1, "morning session rate and smile level"},
      {"AU12_median_morning", -1, "morning AU12 intensity offset"},
      {"smilingProbability_std_evening", +1, "evening smile variability"},
      {"rightEyeOpenProbability_std_evening", +1, "evening right eye-open variability"},
      {"AU07_std_evening", +1, "evening AU07 variability"},
  };
  return effects;
}

const std::vector<std::string>& coupled_channels() {
  static const std::vector<std::string> ch = [] {
    std::vector<std::string> v = {"ear_left",         "ear_right",          "leftEyeOpenProbability",
                                  "rightEyeOpenProbability", "smilingProbability", "headEulerAngle_Y",
                                  "AU07",             "AU12"};
    for (int i = 1; i <= 10; ++i) {
      v.push_back("iva_pc" + std::to_string(i));
      v.push_back("iva_vel" + std::to_string(i));
    }
    return v;
  }();
  return ch;
}

std::vector<std::array<double, 3>> neutral_face_template() {
  std::vector<std::array<double, 3>> p(kLandmarkCount);
  const auto& m = LandmarkMap::standard();
  auto at = [&](std::string_view r) { return m.region(r).begin; };
  for (std::size_t i = 0; i < 36; ++i) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / 36.0;
    p[at("face_oval") + i] = {70.0 * std::sin(t), -95.0 * std::cos(t) + 5.0, -40.0 * std::fabs(std::sin(t))};
  }
  for (std::size_t i = 0; i < 5; ++i) {
    const double x = -55.0 + 10.0 * static_cast<double>(i);
    const double arc = 6.0 * std::pow((static_cast<double>(i) - 2.0) / 2.0, 2);
    p[at("left_eyebrow_top") + i] = {x, -50.0 + arc, 15.0};
    p[at("left_eyebrow_bottom") + i] = {x, -44.0 + arc, 15.0};
    p[at("right_eyebrow_top") + i] = {-x, -50.0 + arc, 15.0};
    p[at("right_eyebrow_bottom") + i] = {-x, -44.0 + arc, 15.0};
  }
  eye_contour(p, at("left_eye"), -32.0, -22.0, +1.0, 0.30);
  eye_contour(p, at("right_eye"), 32.0, -22.0, -1.0, 0.30);
  auto lip = [](double x, double y0, double bulge) {
    const double u = x / 25.0;
    return std::array<double, 3>{x, y0 + bulge * (1.0 - u * u), 22.0 - 10.0 * u * u};
  };
  for (std::size_t i = 0; i < 11; ++i) p[at("upper_lip_top") + i] = lip(-25.0 + 5.0 * static_cast<double>(i), 38.0, -4.0);
  for (std::size_t i = 0; i < 9; ++i) {
    const double x = -20.0 + 5.0 * static_cast<double>(i);
    p[at("upper_lip_bottom") + i] = lip(x, 41.0, -1.0);
    p[at("lower_lip_top") + i] = lip(x, 42.0, 1.0);
    p[at("lower_lip_bottom") + i] = lip(x, 42.0, 8.0);
  }
  p[at("nose_bridge")] = {0.0, -18.0, 25.0};
  p[at("nose_bridge") + 1] = {0.0, -2.0, 35.0};
  p[at("nose_bottom")] = {-9.0, 14.0, 20.0};
  p[at("nose_bottom") + 1] = {0.0, 17.0, 30.0};
  p[at("nose_bottom") + 2] = {9.0, 14.0, 20.0};
  p[at("left_cheek")] = {-48.0, 12.0, 5.0};
  p[at("right_cheek")] = {48.0, 12.0, 5.0};
  return p;
}

namespace {

struct Pose {
  double yaw, pitch, roll;  // degrees
  double scale, tx, ty;
};

std::vector<Point> render_face(const std::vector<std::array<double, 3>>& base, double ap_left, double ap_right,
                               double smile, const Pose& pose, double jitter_px, std::mt19937_64& rng) {
  const auto& m = LandmarkMap::standard();
  auto p = base;
  eye_contour(p, m.region("left_eye").begin, -32.0, -22.0, +1.0, ap_left);
  eye_contour(p, m.region("right_eye").begin, 32.0, -22.0, -1.0, ap_right);
  for (auto r : {"upper_lip_top", "upper_lip_bottom", "lower_lip_top", "lower_lip_bottom"}) {
    const auto& reg = m.region(r);
    for (std::size_t i = reg.begin; i < reg.end(); ++i) {
      const double w = std::pow(p[i][0] / 25.0, 2);
      p[i][1] -= 8.0 * smile * w;
      p[i][0] *= 1.0 + 0.12 * smile * w;
    }
  }
  const double d2r = std::numbers::pi / 180.0;
  const double cy = std::cos(pose.yaw * d2r), sy = std::sin(pose.yaw * d2r);
  const double cp = std::cos(pose.pitch * d2r), sp = std::sin(pose.pitch * d2r);
  const double cr = std::cos(pose.roll * d2r), sr = std::sin(pose.roll * d2r);
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::vector<Point> out(kLandmarkCount);
  for (std::size_t i = 0; i < kLandmarkCount; ++i) {
    auto [x, y, z] = p[i];
    const double x1 = cy * x + sy * z, z1 = -sy * x + cy * z;  // yaw about the vertical axis
    const double y2 = cp * y - sp * z1;  // pitch about the horizontal axis
    const double x3 = cr * x1 - sr * y2, y3 = sr * x1 + cr * y2;  // roll in the image plane
    out[i].x = round_to(pose.tx + pose.scale * x3 + jitter_px * jitter(rng), 0.01);
    out[i].y = round_to(pose.ty + pose.scale * y3 + jitter_px * jitter(rng), 0.01);
  }
  return out;
}

struct DayPlan {
  bool depressive = false;
};

std::vector<FrameRecord> generate_participant(const SynthConfig& cfg, const std::string& pid, LocalDate enroll,
                                              int tz, const std::vector<DayPlan>& days, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  const double d = cfg.effect_size, nz = cfg.noise;
  const auto base = neutral_face_template();
  static constexpr std::array<const char*, 5> kApps = {"social", "messaging", "productivity", "games", "news"};
  constexpr std::int64_t kEpochMs = 6LL * 3600 * 1000;
  const std::int64_t session_span = static_cast<std::int64_t>(cfg.max_frames) * (cfg.frame_interval_ms + cfg.frame_jitter_ms);

  std::vector<FrameRecord> frames;
  int session_no = 0;
  for (std::size_t day = 0; day < days.size(); ++day) {
    if (u01(rng) < cfg.day_skip) continue;
    const bool dep = days[day].depressive;
    const double day_ap = kDayAperture * z(rng) * nz, day_smile = kDaySmile * z(rng) * nz, day_eye = kDayEye * z(rng) * nz;
    const LocalDate date = enroll + static_cast<int>(day);
    const std::int64_t midnight_local = static_cast<std::int64_t>(date.days()) * kMsPerDay;
    for (int e = 0; e < 4; ++e) {
      const bool morning = e == static_cast<int>(Epoch::morning), evening = e == static_cast<int>(Epoch::evening);
      double rate = cfg.session_rate[static_cast<std::size_t>(e)];
      if (dep && morning) rate *= 1.0 + kMorningCount * d;
      const int count = rate > 0.0 ? std::poisson_distribution<int>(rate)(rng) : 0;
      std::vector<std::int64_t> starts;
      std::uniform_int_distribution<std::int64_t> when(0, kEpochMs - session_span - 2000);
      for (int s = 0; s < count; ++s) starts.push_back(e * kEpochMs + when(rng));
      std::sort(starts.begin(), starts.end());
      for (std::size_t s = 1; s < starts.size(); ++s)
        starts[s] = std::max(starts[s], starts[s - 1] + session_span + 1000);

      for (std::int64_t start : starts) {
        if (start + session_span >= (e + 1) * kEpochMs) break;
        const int n = std::uniform_int_distribution<int>(cfg.min_frames, cfg.max_frames)(rng);
        const std::string sid = pid + "-s" + std::to_string(session_no++);
        const bool dm = dep && morning, de = dep && evening;
        Pose pose0{z(rng) * 6.0 * nz - (dm ? kYaw * d : 0.0), -4.0 + z(rng) * 4.0 * nz, z(rng) * 3.0 * nz,
                   1.0 + 0.1 * z(rng) * nz, 240.0 + 20.0 * z(rng) * nz, 320.0 + 20.0 * z(rng) * nz};
        const double ap0 = 0.30 + day_ap + 0.025 * z(rng) * nz + (dm ? kAperture * d : 0.0);
        const double smile0 = 0.12 + day_smile + std::fabs(0.08 * z(rng) * nz) + (dm ? kSmileLevel * d : 0.0);
        const double eye_level = day_eye + (dm ? kEyeOpenLevel * d : 0.0);
        const double smile_sd = 0.03 * nz * (de ? 1.0 + kSmileSpread * d : 1.0);
        const double eye_sd = 0.04 * nz * (de ? 1.0 + kEyeSpread * d : 1.0);
        std::array<double, kAuCount> au_off{};
        for (auto& o : au_off) o = 0.05 * z(rng) * nz;
        const auto trigger = u01(rng) < 0.7 ? Trigger::unlock : Trigger::app_open;
        std::optional<std::string> app;
        if (trigger == Trigger::app_open) app = kApps[std::uniform_int_distribution<std::size_t>(0, kApps.size() - 1)(rng)];

        std::int64_t t_local = midnight_local + start;
        for (int f = 0; f < n; ++f) {
          if (f > 0)
            t_local += cfg.frame_interval_ms +
                       std::uniform_int_distribution<int>(-cfg.frame_jitter_ms, cfg.frame_jitter_ms)(rng);
          FrameRecord r;
          r.participant_id = pid;
          r.session_id = sid;
          r.captured_at = t_local - static_cast<std::int64_t>(tz) * 60'000;
          r.tz_offset_minutes = tz;
          r.trigger = trigger;
          r.app_category = app;
          Pose pose = pose0;
          pose.yaw += 1.5 * z(rng) * nz;
          pose.pitch += 1.0 * z(rng) * nz;
          pose.roll += 1.0 * z(rng) * nz;
          const bool blink = u01(rng) < 0.04;
          double ap_l = std::max(0.02, ap0 + 0.015 * z(rng) * nz);
          double ap_r = std::max(0.02, ap0 + 0.015 * z(rng) * nz);
          if (blink) {
            ap_l *= 0.15;
            ap_r *= 0.15;
          }
          const double smile = clamp01(smile0 + 0.05 * nz * z(rng));
          r.landmarks = render_face(base, ap_l, ap_r, smile, pose, 0.3 * nz, rng);
          r.eye_open_left = round_to(clamp01(0.1 + 1.6 * ap_l + eye_level + 0.04 * nz * z(rng)), 1e-4);
          r.eye_open_right = round_to(clamp01(0.1 + 1.6 * ap_r + eye_level + eye_sd * z(rng)), 1e-4);
          r.smile_prob = round_to(clamp01(smile + smile_sd * z(rng)), 1e-4);
          r.head_yaw = round_to(std::clamp(pose.yaw, -180.0, 180.0), 0.01);
          r.head_pitch = round_to(std::clamp(pose.pitch, -180.0, 180.0), 0.01);
          r.head_roll = round_to(std::clamp(pose.roll, -180.0, 180.0), 0.01);
          std::array<std::optional<double>, kAuCount> au;
          for (std::size_t a = 0; a < kAuCount; ++a) {
            double mean = kAuMean[a] + au_off[a];
            double sd = kAuFrameSd * nz;
            if (a == kAu12Slot && dm) mean -= kAu12 * d;
            if (a == kAu07 && de) sd *= 1.0 + kAu07Spread * d;
            au[a] = round_to(clamp01(mean + sd * z(rng)), 1e-4);
          }
          if (u01(rng) >= cfg.au_failure) r.au = au;
          frames.push_back(std::move(r));
        }
      }
    }
  }
  return frames;
}

// Random split of a total over nine items scored 0..3.
std::array<int, 9> spread_items(int total, std::mt19937_64& rng) {
  std::array<int, 9> items{};
  std::uniform_int_distribution<int> pick(0, 8);
  for (int left = total; left > 0;) {
    const int i = pick(rng);
    if (items[static_cast<std::size_t>(i)] < 3) {
      ++items[static_cast<std::size_t>(i)];
      --left;
    }
  }
  return items;
}

}  // namespace

SynthCohort generate_cohort(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SynthCohort c;
  c.config = cfg;
  c.seed = seed;
  const std::size_t n = cfg.n_participants;
  const LocalDate start = LocalDate::parse(cfg.start_date);
  std::mt19937_64 meta(derive_seed(seed, 0x5eed));

  char buf[16];
  for (std::size_t p = 0; p < n; ++p) {
    std::snprintf(buf, sizeof buf, n > 99 ? "P%03zu" : "P%02zu", p + 1);
    c.participants.emplace_back(buf);
  }
  std::vector<LocalDate> enroll(n);
  std::vector<int> tz(n);
  for (std::size_t p = 0; p < n; ++p) {
    enroll[p] = start + std::uniform_int_distribution<int>(0, cfg.enrollment_spread_days)(meta);
    tz[p] = cfg.tz_offsets_minutes[std::uniform_int_distribution<std::size_t>(0, cfg.tz_offsets_minutes.size() - 1)(meta)];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), meta);
  std::vector<char> compliant(n, 1);
  for (std::size_t i = 0; i < cfg.noncompliant; ++i) compliant[order[i]] = 0;

  // Windows: [day 0, day 13] and, for compliant participants, [day 14, day 27].
  struct WinRef {
    std::size_t participant;
    int index;
  };
  std::vector<WinRef> wins;
  for (std::size_t p = 0; p < n; ++p) {
    wins.push_back({p, 0});
    if (compliant[p]) wins.push_back({p, 1});
  }
  const auto n_dep = static_cast<std::size_t>(std::llround(cfg.depressive_fraction * static_cast<double>(wins.size())));
  std::vector<std::size_t> wo(wins.size());
  std::iota(wo.begin(), wo.end(), 0);
  std::shuffle(wo.begin(), wo.end(), meta);
  std::vector<char> wdep(wins.size(), 0);
  for (std::size_t i = 0; i < n_dep; ++i) wdep[wo[i]] = 1;

  std::vector<std::vector<char>> dep_of(n);
  for (std::size_t w = 0; w < wins.size(); ++w) dep_of[wins[w].participant].push_back(wdep[w]);

  std::uniform_int_distribution<int> high(6, 14), low(0, 4);
  std::vector<std::vector<DayPlan>> plans(n);
  for (std::size_t p = 0; p < n; ++p) {
    const auto& dw = dep_of[p];
    const std::size_t admins = dw.size() + 1;
    // 1 = must be >= 5, 0 = must be < 5, -1 = free
    std::vector<int> need(admins, -1);
    for (std::size_t w = 0; w < dw.size(); ++w)
      if (dw[w]) need[w] = need[w + 1] = 1;
    for (std::size_t w = 0; w < dw.size(); ++w) {
      if (dw[w] || need[w] == 0 || need[w + 1] == 0) continue;
      if (need[w] == 1) need[w + 1] = 0;
      else if (need[w + 1] == 1) need[w] = 0;
      else need[std::uniform_int_distribution<int>(0, 1)(meta) ? w + 1 : w] = 0;
    }
    std::vector<int> score(admins);
    for (std::size_t a = 0; a < admins; ++a) {
      const bool hi = need[a] == 1 || (need[a] == -1 && std::uniform_real_distribution<double>(0, 1)(meta) < 0.3);
      score[a] = hi ? high(meta) : low(meta);
    }
    static constexpr Wave kWaves[] = {Wave::baseline, Wave::midpoint, Wave::endpoint};
    for (std::size_t a = 0; a < admins; ++a) {
      PhqAdministration adm;
      adm.participant_id = c.participants[p];
      adm.administered_on = enroll[p] + static_cast<int>(14 * a);
      adm.total = score[a];
      adm.items = spread_items(score[a], meta);
      adm.wave = kWaves[a];
      c.phq.push_back(adm);
    }
    for (std::size_t w = 0; w < dw.size(); ++w)
      c.windows.push_back({c.participants[p], enroll[p] + static_cast<int>(14 * w),
                           enroll[p] + static_cast<int>(14 * w + 13), dw[w] != 0, score[w], score[w + 1]});
    plans[p].resize(static_cast<std::size_t>(cfg.study_days));
    for (int day = 0; day < cfg.study_days; ++day) {
      const auto w = static_cast<std::size_t>(day / 14);
      plans[p][static_cast<std::size_t>(day)].depressive = w < dw.size() && dw[w];
    }
  }

  c.frames.resize(n);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t p = 0; p < n; ++p)
    c.frames[p] = generate_participant(cfg, c.participants[p], enroll[p], tz[p], plans[p], derive_seed(seed, 1000 + p));
  return c;
}

std::string manifest_to_text(const SynthCohort& c) {
  nlohmann::ordered_json j;
  j["format_version"] = "1";
  j["kind"] = "synth_truth";
  j["seed"] = c.seed;
  const auto& cfg = c.config;
  j["config"] = {{"n_participants", cfg.n_participants},
                 {"study_days", cfg.study_days},
                 {"noncompliant", cfg.noncompliant},
                 {"depressive_fraction", cfg.depressive_fraction},
                 {"session_rate", cfg.session_rate},
                 {"min_frames", cfg.min_frames},
                 {"max_frames", cfg.max_frames},
                 {"frame_interval_ms", cfg.frame_interval_ms},
                 {"frame_jitter_ms", cfg.frame_jitter_ms},
                 {"au_failure", cfg.au_failure},
                 {"day_skip", cfg.day_skip},
                 {"enrollment_spread_days", cfg.enrollment_spread_days},
                 {"effect_size", cfg.effect_size},
                 {"noise", cfg.noise},
                 {"start_date", cfg.start_date},
                 {"tz_offsets_minutes", cfg.tz_offsets_minutes}};
  auto planted = nlohmann::ordered_json::array();
  for (const auto& e : planted_effects())
    planted.push_back({{"feature", e.feature}, {"sign", e.sign}, {"mechanism", e.mechanism}});
  j["planted"] = planted;
  j["coupled_channels"] = coupled_channels();
  j["coupled_epochs"] = {"morning"};
  auto wins = nlohmann::ordered_json::array();
  for (const auto& w : c.windows)
    wins.push_back({{"participant_id", w.participant_id},
                    {"window_start", w.start.to_string()},
                    {"window_end", w.end.to_string()},
                    {"depressive", w.depressive},
                    {"phq_start", w.phq_start},
                    {"phq_end", w.phq_end}});
  j["windows"] = wins;
  return j.dump(1) + "\n";
}

std::vector<PlantedTruth> planted_truth(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("kind").get<std::string>() != "synth_truth") throw DataError("not a synth truth manifest");
    std::vector<PlantedTruth> out;
    for (const auto& e : j.at("planted")) out.push_back({e.at("feature").get<std::string>(), e.at("sign").get<int>()});
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed truth manifest: ") + e.what());
  }
}

void write_cohort(const SynthCohort& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "frames");
  for (std::size_t p = 0; p < c.participants.size(); ++p)
    write_frame_stream(dir / "frames" / (c.participants[p] + ".ndjson"), c.frames[p]);
  write_phq_csv(dir / "phq.csv", c.phq);
  std::ofstream out(dir / "manifest.truth", std::ios::binary);
  if (!out) throw DataError("cannot write " + (dir / "manifest.truth").string());
  out << manifest_to_text(c);
}

}  // namespace facepsy
