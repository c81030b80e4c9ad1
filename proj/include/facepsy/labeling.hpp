#pragma once

// PHQ-9 severity bands, two-week episode windows and per-day targets.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "facepsy/featurize.hpp"
#include "facepsy/records.hpp"

namespace facepsy {

enum class Severity { none, mild, moderate, moderately_severe, severe };
std::string_view to_string(Severity s);

// 0–4 none, 5–9 mild, 10–14 moderate, 15–19 moderately severe, 20–27 severe.
Severity severity(int total);

inline constexpr int kEpisodeThreshold = 5;
inline constexpr int kWindowDays = 14;

enum class TargetRule { window_end, window_start };

struct EpisodeLabel {
  std::string participant_id;
  LocalDate window_start;
  LocalDate window_end;  // inclusive, window_start + 13
  bool depressive = false;
  int phq_start = 0;
  int phq_end = 0;
  int target = 0;

  bool contains(LocalDate d) const { return d >= window_start && d <= window_end; }
};

inline bool is_depressive(int phq_start, int phq_end) {
  return phq_start >= kEpisodeThreshold && phq_end >= kEpisodeThreshold;
}

struct WindowResult {
  std::vector<EpisodeLabel> labels;
  std::vector<std::string> warnings;
};

// One window per consecutive pair of administrations (sorted by date),
// anchored at the earlier one. Fewer than two administrations yields no
// windows and a warning.
WindowResult label_windows(std::span<const PhqAdministration> admins,
                           TargetRule rule = TargetRule::window_end);

struct LabeledDataset {
  std::vector<DayInstance> instances;  // label and target set
  std::size_t dropped = 0;  // instances outside every window
};

// Throws DataError when one participant's windows overlap.
LabeledDataset attach_targets(std::vector<DayInstance> instances, std::span<const EpisodeLabel> labels);

// Convenience: label every participant of a PHQ table.
std::vector<EpisodeLabel> label_cohort(std::span<const PhqAdministration> admins,
                                       TargetRule rule = TargetRule::window_end,
                                       std::vector<std::string>* warnings = nullptr);

// participant_id,window_start,window_end,depressive,target
void write_labels_csv(const std::filesystem::path& path, std::span<const EpisodeLabel> labels);
std::vector<EpisodeLabel> read_labels_csv(const std::filesystem::path& path);

}  // namespace facepsy
