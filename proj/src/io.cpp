#include "facepsy/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace facepsy {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::optional<double> opt_number(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw DataError(std::string(key) + " must be a number");
  return it->get<double>();
}

const std::string& require_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) throw DataError(std::string("missing string field ") + key);
  return it->get_ref<const std::string&>();
}

std::int64_t require_integer(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number_integer())
    throw DataError(std::string("missing integer field ") + key);
  return it->get<std::int64_t>();
}

const std::array<const char*, 14> kFrameKeys = {
    "participant_id", "session_id", "captured_at", "tz_offset_minutes", "trigger",
    "app_category",   "landmarks",  "au",          "smile_prob",        "eye_open_left",
    "eye_open_right", "head_yaw",   "head_pitch",  "head_roll"};

void check_header(const std::string& line, std::string_view kind) {
  json h;
  try {
    h = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(std::string("line 1: unreadable header: ") + e.what());
  }
  if (!h.is_object() || !h.contains("format_version") || h["format_version"] != kFormatVersion)
    throw DataError("line 1: missing or unsupported format_version (expected \"1\")");
  if (h.contains("kind") && h["kind"] != kind)
    throw DataError("line 1: expected kind \"" + std::string(kind) + "\"");
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

}  // namespace

FrameRecord parse_frame_line(std::string_view line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed record: ") + e.what());
  }
  if (!obj.is_object()) throw DataError("record is not a JSON object");
  for (const auto& [k, v] : obj.items()) {
    (void)v;
    if (std::find_if(kFrameKeys.begin(), kFrameKeys.end(), [&](const char* s) { return k == s; }) ==
        kFrameKeys.end())
      throw DataError("unknown field '" + k + "'");
  }

  FrameRecord f;
  f.participant_id = require_string(obj, "participant_id");
  f.session_id = require_string(obj, "session_id");
  f.captured_at = require_integer(obj, "captured_at");
  f.tz_offset_minutes = static_cast<std::int32_t>(require_integer(obj, "tz_offset_minutes"));
  const auto& trig = require_string(obj, "trigger");
  if (trig == "unlock") {
    f.trigger = Trigger::unlock;
  } else if (trig == "app_open") {
    f.trigger = Trigger::app_open;
  } else {
    throw DataError("unknown trigger '" + trig + "'");
  }
  if (auto it = obj.find("app_category"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) throw DataError("app_category must be a string");
    f.app_category = it->get<std::string>();
  }
  if (auto it = obj.find("landmarks"); it != obj.end() && !it->is_null()) {
    if (!it->is_array()) throw DataError("landmarks must be an array");
    if (it->size() != kLandmarkCount)
      throw DataError("landmarks must have exactly 133 points, got " + std::to_string(it->size()));
    std::vector<Point> pts;
    pts.reserve(kLandmarkCount);
    for (const auto& p : *it) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
        throw DataError("landmark must be a [x, y] pair");
      pts.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    f.landmarks = std::move(pts);
  }
  if (auto it = obj.find("au"); it != obj.end() && !it->is_null()) {
    if (!it->is_object()) throw DataError("au must be an object");
    std::array<std::optional<double>, kAuCount> au{};
    for (const auto& [k, v] : it->items()) {
      std::size_t slot = kAuCount;
      for (std::size_t i = 0; i < kAuCount; ++i)
        if (k == au_name(i)) slot = i;
      if (slot == kAuCount) throw DataError("unknown action unit '" + k + "'");
      if (v.is_null()) continue;
      if (!v.is_number()) throw DataError(k + " must be a number");
      au[slot] = v.get<double>();
    }
    f.au = au;
  }
  f.smile_prob = opt_number(obj, "smile_prob");
  f.eye_open_left = opt_number(obj, "eye_open_left");
  f.eye_open_right = opt_number(obj, "eye_open_right");
  f.head_yaw = opt_number(obj, "head_yaw");
  f.head_pitch = opt_number(obj, "head_pitch");
  f.head_roll = opt_number(obj, "head_roll");
  f.validate();
  return f;
}

std::string serialize_frame(const FrameRecord& f) {
  ordered_json o;
  o["participant_id"] = f.participant_id;
  o["session_id"] = f.session_id;
  o["captured_at"] = f.captured_at;
  o["tz_offset_minutes"] = f.tz_offset_minutes;
  o["trigger"] = f.trigger == Trigger::unlock ? "unlock" : "app_open";
  if (f.app_category) o["app_category"] = *f.app_category;
  if (f.landmarks) {
    ordered_json pts = ordered_json::array();
    for (const auto& p : *f.landmarks) pts.push_back({p.x, p.y});
    o["landmarks"] = std::move(pts);
  }
  if (f.au) {
    ordered_json au = ordered_json::object();
    for (std::size_t i = 0; i < kAuCount; ++i)
      if ((*f.au)[i]) au[au_name(i)] = *(*f.au)[i];
    o["au"] = std::move(au);
  }
  auto put = [&](const char* k, const std::optional<double>& v) {
    if (v) o[k] = *v;
  };
  put("smile_prob", f.smile_prob);
  put("eye_open_left", f.eye_open_left);
  put("eye_open_right", f.eye_open_right);
  put("head_yaw", f.head_yaw);
  put("head_pitch", f.head_pitch);
  put("head_roll", f.head_roll);
  return o.dump();
}

FrameParseResult parse_frame_stream_lenient(std::istream& in) {
  FrameParseResult out;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    if (!header) {
      check_header(line, "frames");
      header = true;
      continue;
    }
    ++out.data_lines;
    try {
      out.records.push_back(parse_frame_line(line));
    } catch (const DataError& e) {
      out.errors.push_back({lineno, e.what()});
    }
  }
  if (!header) throw DataError("line 1: missing format_version header");
  return out;
}

std::vector<FrameRecord> parse_frame_stream(std::istream& in) {
  auto res = parse_frame_stream_lenient(in);
  if (!res.errors.empty()) {
    const auto& e = res.errors.front();
    throw DataError("line " + std::to_string(e.line) + ": " + e.message);
  }
  return std::move(res.records);
}

std::vector<FrameRecord> parse_frame_stream(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open frame file " + path.string());
  try {
    return parse_frame_stream(in);
  } catch (const DataError& e) {
    throw DataError(path.filename().string() + ": " + e.what());
  }
}

void write_frame_stream(std::ostream& out, std::span<const FrameRecord> frames) {
  out << R"({"format_version":"1","kind":"frames"})" << '\n';
  for (const auto& f : frames) out << serialize_frame(f) << '\n';
}

void write_frame_stream(const std::filesystem::path& path, std::span<const FrameRecord> frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_frame_stream(out, frames);
}

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.emplace_back(line.substr(start));
      break;
    }
    cells.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

std::vector<PhqAdministration> parse_phq_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!blank(line)) return true;
    }
    return false;
  };
  if (!next() || split_csv_line(line) != std::vector<std::string>{"format_version", kFormatVersion})
    throw DataError("line 1: PHQ file must start with 'format_version,1'");
  const std::vector<std::string> header = {"participant_id", "wave",  "administered_on", "item1",
                                           "item2",          "item3", "item4",           "item5",
                                           "item6",          "item7", "item8",           "item9"};
  if (!next() || split_csv_line(line) != header)
    throw DataError("line " + std::to_string(lineno) + ": unexpected PHQ header");
  std::vector<PhqAdministration> out;
  while (next()) {
    try {
      auto cells = split_csv_line(line);
      if (cells.size() != header.size()) throw DataError("expected 12 columns");
      PhqAdministration a;
      a.participant_id = cells[0];
      a.wave = parse_wave(cells[1]);
      a.administered_on = LocalDate::parse(cells[2]);
      for (int i = 0; i < 9; ++i) {
        const auto& c = cells[3 + i];
        auto [p, ec] = std::from_chars(c.data(), c.data() + c.size(), a.items[i]);
        if (ec != std::errc() || p != c.data() + c.size()) throw DataError("item is not an integer");
      }
      a.total = 0;
      for (int v : a.items) a.total += v;
      a.validate();
      out.push_back(std::move(a));
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<PhqAdministration> parse_phq_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open PHQ file " + path.string());
  return parse_phq_csv(in);
}

void write_phq_csv(std::ostream& out, std::span<const PhqAdministration> admins) {
  out << "format_version," << kFormatVersion << '\n';
  out << "participant_id,wave,administered_on,item1,item2,item3,item4,item5,item6,item7,item8,item9\n";
  for (const auto& a : admins) {
    out << a.participant_id << ',' << to_string(a.wave) << ',' << a.administered_on.to_string();
    for (int v : a.items) out << ',' << v;
    out << '\n';
  }
}

void write_phq_csv(const std::filesystem::path& path, std::span<const PhqAdministration> admins) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_phq_csv(out, admins);
}

std::vector<std::vector<FrameRecord>> read_frame_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ndjson") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<std::vector<FrameRecord>> out(files.size());
  std::vector<std::string> errors(files.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < files.size(); ++i) {
    try {
      out[i] = parse_frame_stream(files[i]);
    } catch (const DataError& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw DataError(e);
  return out;
}

}  // namespace facepsy
