#include "facepsy/labeling.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "facepsy/io.hpp"

namespace facepsy {

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::none: return "none";
    case Severity::mild: return "mild";
    case Severity::moderate: return "moderate";
    case Severity::moderately_severe: return "moderately_severe";
    case Severity::severe: return "severe";
  }
  return "?";
}

Severity severity(int total) {
  if (total < 0 || total > 27) throw DataError("PHQ-9 total out of range 0..27: " + std::to_string(total));
  if (total <= 4) return Severity::none;
  if (total <= 9) return Severity::mild;
  if (total <= 14) return Severity::moderate;
  if (total <= 19) return Severity::moderately_severe;
  return Severity::severe;
}

WindowResult label_windows(std::span<const PhqAdministration> admins, TargetRule rule) {
  WindowResult out;
  if (admins.size() < 2) {
    out.warnings.push_back("participant '" + (admins.empty() ? std::string("?") : admins[0].participant_id) +
                           "' has fewer than two PHQ-9 administrations; no episode window");
    return out;
  }
  std::vector<PhqAdministration> sorted(admins.begin(), admins.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.administered_on < b.administered_on; });
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    const auto& a = sorted[i];
    const auto& b = sorted[i + 1];
    if (a.participant_id != b.participant_id) throw DataError("label_windows given mixed participants");
    (void)severity(a.total);
    (void)severity(b.total);
    EpisodeLabel l;
    l.participant_id = a.participant_id;
    l.window_start = a.administered_on;
    l.window_end = a.administered_on + (kWindowDays - 1);
    l.phq_start = a.total;
    l.phq_end = b.total;
    l.depressive = is_depressive(a.total, b.total);
    l.target = rule == TargetRule::window_end ? b.total : a.total;
    out.labels.push_back(std::move(l));
  }
  return out;
}

std::vector<EpisodeLabel> label_cohort(std::span<const PhqAdministration> admins, TargetRule rule,
                                       std::vector<std::string>* warnings) {
  std::map<std::string, std::vector<PhqAdministration>> by;
  for (const auto& a : admins) by[a.participant_id].push_back(a);
  std::vector<EpisodeLabel> out;
  for (const auto& [id, list] : by) {
    auto r = label_windows(list, rule);
    out.insert(out.end(), r.labels.begin(), r.labels.end());
    if (warnings) warnings->insert(warnings->end(), r.warnings.begin(), r.warnings.end());
  }
  return out;
}

LabeledDataset attach_targets(std::vector<DayInstance> instances, std::span<const EpisodeLabel> labels) {
  std::map<std::string, std::vector<const EpisodeLabel*>> by;
  for (const auto& l : labels) by[l.participant_id].push_back(&l);
  for (auto& [id, list] : by) {
    std::sort(list.begin(), list.end(),
              [](const EpisodeLabel* a, const EpisodeLabel* b) { return a->window_start < b->window_start; });
    for (std::size_t i = 1; i < list.size(); ++i)
      if (list[i]->window_start <= list[i - 1]->window_end)
        throw DataError("overlapping episode windows for participant '" + id + "'");
  }
  LabeledDataset out;
  for (auto& inst : instances) {
    const EpisodeLabel* hit = nullptr;
    if (auto it = by.find(inst.participant_id); it != by.end())
      for (const auto* l : it->second)
        if (l->contains(inst.date)) hit = l;
    if (!hit) {
      ++out.dropped;
      continue;
    }
    inst.label = hit->depressive;
    inst.target = hit->target;
    out.instances.push_back(std::move(inst));
  }
  return out;
}

void write_labels_csv(const std::filesystem::path& path, std::span<const EpisodeLabel> labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "participant_id,window_start,window_end,depressive,target\n";
  for (const auto& l : labels)
    out << l.participant_id << ',' << l.window_start.to_string() << ',' << l.window_end.to_string() << ','
        << (l.depressive ? 1 : 0) << ',' << l.target << '\n';
}

std::vector<EpisodeLabel> read_labels_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      split_csv_line(line) !=
          std::vector<std::string>{"participant_id", "window_start", "window_end", "depressive", "target"})
    throw DataError(path.string() + ": unexpected label header");
  std::vector<EpisodeLabel> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto c = split_csv_line(line);
    if (c.size() != 5) throw DataError(path.string() + ": bad label row");
    EpisodeLabel l;
    l.participant_id = c[0];
    l.window_start = LocalDate::parse(c[1]);
    l.window_end = LocalDate::parse(c[2]);
    if (c[3] != "0" && c[3] != "1") throw DataError(path.string() + ": depressive must be 0 or 1");
    l.depressive = c[3] == "1";
    l.target = static_cast<int>(parse_double(c[4]));
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace facepsy
