#include "facepsy/records.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>

namespace facepsy {

std::string au_name(std::size_t slot) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "AU%02d", kAuCodes.at(slot));
  return buf;
}

LandmarkMap::LandmarkMap(std::vector<LandmarkRegion> regions) : regions_(std::move(regions)) {}

const LandmarkMap& LandmarkMap::standard() {
  static const LandmarkMap map = [] {
    struct Def {
      std::string_view name;
      std::size_t size;
      MacroRegion macro;
    };
    const Def defs[] = {
        {"face_oval", 36, MacroRegion::jawline},
        {"left_eyebrow_top", 5, MacroRegion::left_eyebrow},
        {"left_eyebrow_bottom", 5, MacroRegion::left_eyebrow},
        {"right_eyebrow_top", 5, MacroRegion::right_eyebrow},
        {"right_eyebrow_bottom", 5, MacroRegion::right_eyebrow},
        {"left_eye", 16, MacroRegion::left_eye},
        {"right_eye", 16, MacroRegion::right_eye},
        {"upper_lip_top", 11, MacroRegion::mouth},
        {"upper_lip_bottom", 9, MacroRegion::mouth},
        {"lower_lip_top", 9, MacroRegion::mouth},
        {"lower_lip_bottom", 9, MacroRegion::mouth},
        {"nose_bridge", 2, MacroRegion::nose},
        {"nose_bottom", 3, MacroRegion::nose},
        {"left_cheek", 1, MacroRegion::cheeks},
        {"right_cheek", 1, MacroRegion::cheeks},
    };
    std::vector<LandmarkRegion> regions;
    std::size_t at = 0;
    for (const auto& d : defs) {
      regions.push_back({d.name, at, d.size, d.macro});
      at += d.size;
    }
    LandmarkMap m(std::move(regions));
    m.validate();
    return m;
  }();
  return map;
}

const LandmarkRegion& LandmarkMap::region(std::string_view name) const {
  for (const auto& r : regions_)
    if (r.name == name) return r;
  throw InvariantError("unknown landmark region '" + std::string(name) + "'");
}

MacroRegion LandmarkMap::macro_of(std::size_t index) const {
  for (const auto& r : regions_)
    if (index >= r.begin && index < r.end()) return r.macro;
  throw DataError("landmark index " + std::to_string(index) + " out of range");
}

std::size_t LandmarkMap::point_count() const {
  return regions_.empty() ? 0 : regions_.back().end();
}

void LandmarkMap::validate() const {
  std::size_t expect = 0;
  for (const auto& r : regions_) {
    FACEPSY_ENSURE(r.size > 0, "empty landmark region");
    FACEPSY_ENSURE(r.begin == expect, "landmark regions must be contiguous and ordered");
    expect = r.end();
  }
  FACEPSY_ENSURE(expect == kLandmarkCount, "landmark regions must cover exactly 133 slots");
}

namespace {

void check_unit(const std::optional<double>& v, const char* what) {
  if (v && !(*v >= 0.0 && *v <= 1.0))
    throw DataError(std::string(what) + " out of range [0,1]: " + std::to_string(*v));
}

void check_angle(const std::optional<double>& v, const char* what) {
  if (v && !(*v >= -180.0 && *v <= 180.0))
    throw DataError(std::string(what) + " out of range [-180,180]: " + std::to_string(*v));
}

}  // namespace

void FrameRecord::validate() const {
  if (participant_id.empty()) throw DataError("participant_id is empty");
  if (session_id.empty()) throw DataError("session_id is empty");
  if (captured_at <= 0) throw DataError("captured_at must be strictly positive");
  if (landmarks) {
    if (landmarks->size() != kLandmarkCount)
      throw DataError("landmarks must have exactly 133 points, got " +
                      std::to_string(landmarks->size()));
    for (const auto& p : *landmarks)
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DataError("non-finite landmark");
  }
  if (au)
    for (std::size_t i = 0; i < kAuCount; ++i) check_unit((*au)[i], au_name(i).c_str());
  check_unit(smile_prob, "smile_prob");
  check_unit(eye_open_left, "eye_open_left");
  check_unit(eye_open_right, "eye_open_right");
  check_angle(head_yaw, "head_yaw");
  check_angle(head_pitch, "head_pitch");
  check_angle(head_roll, "head_roll");
}

std::string_view to_string(Wave w) {
  switch (w) {
    case Wave::baseline: return "baseline";
    case Wave::midpoint: return "midpoint";
    case Wave::endpoint: return "endpoint";
  }
  return "?";
}

Wave parse_wave(std::string_view s) {
  if (s == "baseline") return Wave::baseline;
  if (s == "midpoint") return Wave::midpoint;
  if (s == "endpoint") return Wave::endpoint;
  throw DataError("unknown wave '" + std::string(s) + "'");
}

void PhqAdministration::validate() const {
  if (participant_id.empty()) throw DataError("PHQ participant_id is empty");
  for (int v : items)
    if (v < 0 || v > 3) throw DataError("PHQ-9 item out of range 0..3");
  if (std::accumulate(items.begin(), items.end(), 0) != total)
    throw DataError("PHQ-9 total does not equal the sum of items");
}

std::vector<std::string> CohortIndex::unlabeled() const {
  std::vector<std::string> out;
  for (const auto& p : participants)
    if (!p.labeled) out.push_back(p.id);
  return out;
}

const ParticipantSummary* CohortIndex::find(std::string_view id) const {
  auto it = std::lower_bound(participants.begin(), participants.end(), id,
                             [](const ParticipantSummary& p, std::string_view v) { return p.id < v; });
  return (it != participants.end() && it->id == id) ? &*it : nullptr;
}

CohortIndex validate_cohort(std::span<const FrameRecord> frames,
                            std::span<const PhqAdministration> phq) {
  std::map<std::string, ParticipantSummary> by_id;
  std::map<std::string, std::set<std::string>> sessions;
  for (const auto& f : frames) {
    auto& s = by_id[f.participant_id];
    s.id = f.participant_id;
    const LocalDate d = f.local_date();
    if (!s.first_date || d < *s.first_date) s.first_date = d;
    if (!s.last_date || d > *s.last_date) s.last_date = d;
    ++s.frame_count;
    sessions[f.participant_id].insert(f.session_id);
  }
  for (auto& [id, ss] : sessions) by_id[id].session_count = ss.size();

  CohortIndex index;
  std::set<std::pair<std::string, Wave>> seen;
  for (const auto& a : phq) {
    a.validate();
    if (!seen.emplace(a.participant_id, a.wave).second)
      throw DataError("duplicate PHQ-9 administration for participant '" + a.participant_id +
                      "' wave " + std::string(to_string(a.wave)));
    index.phq_by_participant[a.participant_id].push_back(a);
    by_id[a.participant_id].id = a.participant_id;
  }
  for (auto& [id, list] : index.phq_by_participant) {
    std::stable_sort(list.begin(), list.end(), [](const auto& x, const auto& y) {
      return x.administered_on < y.administered_on;
    });
    by_id[id].labeled = list.size() >= 2;
  }
  for (auto& [id, s] : by_id) index.participants.push_back(std::move(s));
  return index;
}

}  // namespace facepsy
