#pragma once

// Epoch segmentation and day-level aggregation: 40 channels × 8 statistics
// × 4 epochs = 1280 features per participant-day.

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "facepsy/geometry.hpp"
#include "facepsy/records.hpp"

namespace facepsy {

enum class Epoch : int { midnight = 0, morning = 1, afternoon = 2, evening = 3 };
enum class Stat : int { min = 0, max, mean, median, sum, std, q1, q3 };

inline constexpr std::array<std::string_view, 4> kEpochNames = {"midnight", "morning", "afternoon", "evening"};
inline constexpr std::array<std::string_view, 8> kStatNames = {"min", "max", "mean", "median",
                                                               "sum", "std", "q1",   "q3"};

inline constexpr std::size_t kChannelCount = 40;
inline constexpr std::size_t kStatCount = 8;
inline constexpr std::size_t kEpochCount = 4;
inline constexpr std::size_t kEpochBlock = kChannelCount * kStatCount;  // 320
inline constexpr std::size_t kDayFeatureCount = kEpochBlock * kEpochCount;  // 1280
inline constexpr std::size_t kIvaComponents = 10;
// Channels [0, kStaticChannels) come straight from the frame record and eye
// contours; the remaining 20 are PCA scores and their velocities.
inline constexpr std::size_t kStaticChannels = 20;
inline constexpr std::size_t kIvaScoreChannel = 20;
inline constexpr std::size_t kIvaVelocityChannel = 30;

// AU01..AU24, smilingProbability, left/rightEyeOpenProbability,
// headEulerAngle_X/Y/Z, ear_left, ear_right, iva_pc1..10, iva_vel1..10.
const std::vector<std::string>& channel_inventory();
// "{channel}_{stat}_{epoch}", epoch-major, then channel, then statistic.
const std::vector<std::string>& feature_names();
std::optional<std::size_t> find_feature(std::string_view name);

constexpr std::size_t feature_index(Epoch e, std::size_t channel, Stat s) {
  return static_cast<std::size_t>(e) * kEpochBlock + channel * kStatCount + static_cast<std::size_t>(s);
}
constexpr std::size_t channel_of_feature(std::size_t f) { return (f % kEpochBlock) / kStatCount; }

// [00,06) midnight, [06,12) morning, [12,18) afternoon, [18,24) evening.
Epoch assign_epoch(std::int64_t ms_since_local_midnight);

// min, max, mean, median, sum, population std, q1, q3 (linear interpolation
// at rank p·(n−1)). NaN inputs are skipped; no samples gives 8 NaNs.
std::array<double, kStatCount> aggregate_epoch(std::span<const double> values);

struct DayInstance {
  std::string participant_id;
  LocalDate date;
  std::vector<double> features;  // kDayFeatureCount, NaN = missing
  std::array<int, kEpochCount> frame_count{};
  std::optional<bool> label;
  std::optional<int> target;
};

// Fold-independent per-participant frame cache: everything except the PCA
// projection is computed once here.
struct FrameTable {
  std::string participant_id;
  std::vector<std::int64_t> captured_at;  // sorted ascending
  std::vector<LocalDate> date;
  std::vector<Epoch> epoch;
  std::vector<int> session;  // dense index into session_frames
  RowMatrix static_channels;  // frames × kStaticChannels
  RowMatrix bearings;  // frames × 133, NaN rows for frames without landmarks
  std::vector<char> has_landmarks;
  std::vector<LocalDate> days;  // distinct, ascending
  std::vector<std::vector<int>> day_frames;
  std::vector<std::vector<int>> session_frames;  // time-ordered

  std::size_t frame_count() const { return captured_at.size(); }
  std::optional<std::size_t> day_index(LocalDate d) const;
};

// Sorts by capture time and derives all fold-independent channels. All
// frames must belong to one participant.
FrameTable prepare_frames(std::span<const FrameRecord> frames,
                          const LandmarkMap& map = LandmarkMap::standard());

// Angle rows for PCA fitting / projection.
RowMatrix angle_rows(const FrameTable& t, std::span<const int> frames, const IvaPairList& pairs);

struct IvaChannels {
  RowMatrix scores;  // frames × k, NaN where not computed
  RowMatrix velocity;
};

// Scores and velocities for the given sessions (all sessions when empty).
IvaChannels compute_iva_channels(const FrameTable& t, const PcaModel& pca, const IvaPairList& pairs,
                                 std::span<const int> sessions = {});

// Sessions touching any of the given days.
std::vector<int> sessions_for_days(const FrameTable& t, std::span<const std::size_t> day_indices);

// Feature row for one day with the IVA columns left NaN.
std::vector<double> static_day_features(const FrameTable& t, std::size_t day_index);
// Writes the 640 IVA columns of a day's feature row.
void fill_iva_features(const FrameTable& t, std::size_t day_index, const IvaChannels& iva,
                       std::span<double> row);
// Optional IVA acceleration (off by default, outside the 1280-column layout):
// per-session derivative of the velocities, same units-per-second rule.
RowMatrix iva_acceleration_channels(const FrameTable& t, const IvaChannels& iva);
// "iva_acc{1..10}_{stat}_{epoch}", epoch-major like the main layout.
const std::vector<std::string>& acceleration_feature_names();
std::vector<double> acceleration_day_features(const FrameTable& t, std::size_t day_index, const RowMatrix& acceleration);

std::array<int, kEpochCount> epoch_frame_counts(const FrameTable& t, std::size_t day_index);

// One instance per local date with at least one frame.
std::vector<DayInstance> build_day_instances(const FrameTable& t, const PcaModel& pca, const IvaPairList& pairs);
std::vector<DayInstance> build_day_instances(std::span<const FrameRecord> frames, const PcaModel& pca,
                                             const IvaPairList& pairs);

// Participants in parallel; output order follows the input order.
std::vector<DayInstance> featurize_cohort(std::span<const FrameTable> tables, const PcaModel& pca,
                                          const IvaPairList& pairs);

// Deterministic subsample of complete-landmark frames for PCA fitting:
// evenly strided over the given frames, at most max_rows.
RowMatrix pca_training_rows(std::span<const FrameTable> tables, std::span<const std::vector<int>> frames,
                            const IvaPairList& pairs, std::size_t max_rows);

// participant_id,local_date,<1280 features>; missing = empty cell.
void write_feature_csv(const std::filesystem::path& path, std::span<const DayInstance> rows);
std::vector<DayInstance> read_feature_csv(const std::filesystem::path& path);

}  // namespace facepsy
