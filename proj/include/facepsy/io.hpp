#pragma once

// File formats.
//
// Frame stream: UTF-8, one JSON object per line. The first line is the
// header {"format_version":"1","kind":"frames"}. Absent fields are omitted
// (or null); they are never encoded as sentinel numbers.
//
// PHQ file: CSV. First line "format_version,1", then the header
// participant_id,wave,administered_on,item1,...,item9.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "facepsy/records.hpp"

namespace facepsy {

inline constexpr const char* kFormatVersion = "1";

struct ParseIssue {
  std::size_t line = 0;  // 1-based, counting the header line
  std::string message;
};

struct FrameParseResult {
  std::vector<FrameRecord> records;
  std::vector<ParseIssue> errors;
  std::size_t data_lines = 0;  // non-blank lines after the header
};

// Collects one issue per bad line and keeps going; a bad header is fatal.
FrameParseResult parse_frame_stream_lenient(std::istream& in);

// Strict: throws DataError("line N: ...") on the first bad line.
std::vector<FrameRecord> parse_frame_stream(std::istream& in);
std::vector<FrameRecord> parse_frame_stream(const std::filesystem::path& path);

// Single record parse (no header). Throws DataError.
FrameRecord parse_frame_line(std::string_view line);

std::string serialize_frame(const FrameRecord& f);
void write_frame_stream(std::ostream& out, std::span<const FrameRecord> frames);
void write_frame_stream(const std::filesystem::path& path, std::span<const FrameRecord> frames);

std::vector<PhqAdministration> parse_phq_csv(std::istream& in);
std::vector<PhqAdministration> parse_phq_csv(const std::filesystem::path& path);
void write_phq_csv(std::ostream& out, std::span<const PhqAdministration> admins);
void write_phq_csv(const std::filesystem::path& path, std::span<const PhqAdministration> admins);

// Every *.ndjson file in a directory, sorted by file name; each file is
// parsed independently (concurrently when OpenMP threads are available).
std::vector<std::vector<FrameRecord>> read_frame_directory(const std::filesystem::path& dir);

// Minimal CSV support for the artifacts this project writes (no quoting).
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace facepsy
