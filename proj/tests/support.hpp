#pragma once

// Generators and fixtures shared by the unit tests.

#include <cmath>
#include <filesystem>
#include <random>
#include <unistd.h>
#include <string>
#include <vector>

#include "facepsy/eval.hpp"
#include "facepsy/featurize.hpp"
#include "facepsy/labeling.hpp"
#include "facepsy/records.hpp"
#include "facepsy/synth.hpp"

namespace facepsy::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double a = 0.0, double b = 1.0) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}
inline double normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }
inline int uniform_int(Rng& rng, int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); }

// Neutral template with per-point jitter, in pixels.
inline std::vector<Point> random_face(Rng& rng, double jitter = 2.0) {
  std::vector<Point> pts;
  for (const auto& p : neutral_face_template()) pts.push_back({p[0] + jitter * normal(rng), p[1] + jitter * normal(rng)});
  return pts;
}

// Scattered landmarks with no facial structure at all.
inline std::vector<Point> random_points(Rng& rng) {
  std::vector<Point> pts(kLandmarkCount);
  for (auto& p : pts) p = {uniform(rng, -100, 100), uniform(rng, -100, 100)};
  return pts;
}

inline FrameRecord make_frame(Rng& rng, std::string pid, std::string session, std::int64_t captured_at,
                              std::int32_t tz = 0) {
  FrameRecord f;
  f.participant_id = std::move(pid);
  f.session_id = std::move(session);
  f.captured_at = captured_at;
  f.tz_offset_minutes = tz;
  f.trigger = Trigger::unlock;
  f.landmarks = random_face(rng);
  std::array<std::optional<double>, kAuCount> au;
  for (auto& a : au) a = uniform(rng, 0.0, 1.0);
  f.au = au;
  f.smile_prob = uniform(rng);
  f.eye_open_left = uniform(rng);
  f.eye_open_right = uniform(rng);
  f.head_yaw = uniform(rng, -30, 30);
  f.head_pitch = uniform(rng, -30, 30);
  f.head_roll = uniform(rng, -30, 30);
  return f;
}

// UTC milliseconds of a local clock time on a date, for tz offset 0.
inline std::int64_t at(LocalDate d, int hour, int minute = 0, int second = 0) {
  return static_cast<std::int64_t>(d.days()) * kMsPerDay + ((hour * 60LL + minute) * 60LL + second) * 1000LL;
}

inline SynthConfig small_config() {
  SynthConfig c;
  c.n_participants = 6;
  c.study_days = 20;
  c.noncompliant = 1;
  return c;
}

inline const SynthCohort& small_cohort() {
  static const SynthCohort c = generate_cohort(small_config(), 11);
  return c;
}

inline EvalDataset dataset_of(const SynthCohort& c) {
  std::vector<FrameTable> tables;
  for (const auto& f : c.frames)
    if (!f.empty()) tables.push_back(prepare_frames(f));
  return make_dataset(std::move(tables), label_cohort(c.phq));
}

inline const EvalDataset& small_dataset() {
  static const EvalDataset ds = dataset_of(small_cohort());
  return ds;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("facepsy_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace facepsy::testing
