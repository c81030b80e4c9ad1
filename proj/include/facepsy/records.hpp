#pragma once

// Canonical record types for the frame stream, PHQ-9 administrations and
// the cohort index, plus the 133-slot landmark layout shared by every module.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "facepsy/common.hpp"

namespace facepsy {

inline constexpr std::size_t kLandmarkCount = 133;
inline constexpr std::size_t kAuCount = 12;
inline constexpr std::array<int, kAuCount> kAuCodes = {1, 2, 4, 6, 7, 10, 12, 14, 15, 17, 23, 24};

// "AU01", "AU02", ... for slot i of kAuCodes.
std::string au_name(std::size_t slot);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Coarse facial areas used to build inter-vector-angle pairs. Nose points
// define the centroid and never take part in a pair.
enum class MacroRegion { jawline, left_eyebrow, right_eyebrow, left_eye, right_eye, mouth, cheeks, nose };

struct LandmarkRegion {
  std::string_view name;
  std::size_t begin;
  std::size_t size;
  MacroRegion macro;
  std::size_t end() const { return begin + size; }
};

class LandmarkMap {
 public:
  // Contour layout: face oval, brows, eyes, lips, nose, cheeks.
  static const LandmarkMap& standard();

  std::span<const LandmarkRegion> regions() const { return regions_; }
  const LandmarkRegion& region(std::string_view name) const;
  MacroRegion macro_of(std::size_t index) const;
  std::size_t point_count() const;

  // Throws InvariantError unless regions are disjoint, ordered and cover 0..N-1.
  void validate() const;

  explicit LandmarkMap(std::vector<LandmarkRegion> regions);

 private:
  std::vector<LandmarkRegion> regions_;
};

enum class Trigger { unlock, app_open };

struct FrameRecord {
  std::string participant_id;
  std::string session_id;
  std::int64_t captured_at = 0;  // UTC epoch milliseconds
  std::int32_t tz_offset_minutes = 0;
  Trigger trigger = Trigger::unlock;
  std::optional<std::string> app_category;
  std::optional<std::vector<Point>> landmarks;
  std::optional<std::array<std::optional<double>, kAuCount>> au;
  std::optional<double> smile_prob;
  std::optional<double> eye_open_left;
  std::optional<double> eye_open_right;
  std::optional<double> head_yaw;
  std::optional<double> head_pitch;
  std::optional<double> head_roll;

  std::int64_t local_ms() const {
    return captured_at + static_cast<std::int64_t>(tz_offset_minutes) * 60'000;
  }
  LocalDate local_date() const { return LocalDate::from_local_ms(local_ms()); }

  // Throws DataError describing the first violated invariant.
  void validate() const;
};

enum class Wave { baseline, midpoint, endpoint };

std::string_view to_string(Wave w);
Wave parse_wave(std::string_view s);

struct PhqAdministration {
  std::string participant_id;
  LocalDate administered_on;
  std::array<int, 9> items{};
  int total = 0;
  Wave wave = Wave::baseline;

  void validate() const;
};

struct ParticipantSummary {
  std::string id;
  std::optional<LocalDate> first_date;
  std::optional<LocalDate> last_date;
  std::size_t session_count = 0;
  std::size_t frame_count = 0;
  bool labeled = false;  // has at least two administrations
};

struct CohortIndex {
  std::vector<ParticipantSummary> participants;  // sorted by id
  std::map<std::string, std::vector<PhqAdministration>> phq_by_participant;

  std::vector<std::string> unlabeled() const;
  const ParticipantSummary* find(std::string_view id) const;
};

// Builds the index. Participants with fewer than two administrations are
// kept but flagged unlabeled. Duplicate (participant, wave) is a DataError.
CohortIndex validate_cohort(std::span<const FrameRecord> frames,
                            std::span<const PhqAdministration> phq);

}  // namespace facepsy
