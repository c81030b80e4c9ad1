#pragma once

// Seeded synthetic cohort with planted effects: frame streams, PHQ-9
// administrations and a truth manifest.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "facepsy/records.hpp"

namespace facepsy {

struct SynthConfig {
  std::size_t n_participants = 25;
  int study_days = 28;
  std::size_t noncompliant = 6;  // participants missing the endpoint PHQ
  double depressive_fraction = 14.0 / 44.0;  // of labeled windows
  std::array<double, 4> session_rate = {0.5, 2.0, 3.0, 3.0};  // Poisson mean per epoch
  int min_frames = 5;
  int max_frames = 25;
  int frame_interval_ms = 400;
  int frame_jitter_ms = 40;
  double au_failure = 0.17;
  double day_skip = 0.09;
  int enrollment_spread_days = 21;
  double effect_size = 1.0;  // d; 0 disables every planted effect
  double noise = 1.0;  // multiplies every per-frame noise scale
  std::string start_date = "2024-01-08";
  std::vector<int> tz_offsets_minutes = {-300, -240, 0, 60, 330};

  void validate() const;
};

struct PlantedEffect {
  std::string feature;
  int sign = 0;  // +1 depressive higher, −1 lower
  std::string mechanism;
};

// The ten headline effects realised by the generator.
const std::vector<PlantedEffect>& planted_effects();

// Channels whose distribution any knob moves (planted channels plus the IVA
// channels that inherit landmark geometry). Every morning feature is also
// coupled to the label through the session-count knob.
const std::vector<std::string>& coupled_channels();

struct SynthWindow {
  std::string participant_id;
  LocalDate start;
  LocalDate end;
  bool depressive = false;
  int phq_start = 0;
  int phq_end = 0;
};

struct SynthCohort {
  SynthConfig config;
  std::uint64_t seed = 0;
  std::vector<std::string> participants;
  std::vector<std::vector<FrameRecord>> frames;  // per participant, time-ordered
  std::vector<PhqAdministration> phq;
  std::vector<SynthWindow> windows;
};

SynthCohort generate_cohort(const SynthConfig& config, std::uint64_t seed);

// frames/<pid>.ndjson, phq.csv, manifest.truth
void write_cohort(const SynthCohort& cohort, const std::filesystem::path& dir);

std::string manifest_to_text(const SynthCohort& cohort);

struct PlantedTruth {
  std::string feature;
  int sign = 0;
};

// Expected sign per planted feature, read back from manifest.truth text.
std::vector<PlantedTruth> planted_truth(std::string_view manifest_text);

// A 133-point neutral face in contour order (x right, y down, z toward the
// camera), used as the generator's base template.
std::vector<std::array<double, 3>> neutral_face_template();

}  // namespace facepsy
