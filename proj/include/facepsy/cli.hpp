#pragma once

// Single-binary front end. Subcommands: synth, featurize, label, screen,
// train, evaluate, min-days, report.
//
// Every option can also come from a plain-text config file given with
// --config FILE: "key = value" lines, '#' comments, optional [subcommand]
// sections. Keys name long options without the dashes. Flags on the command
// line win over the file.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace facepsy::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitInternal = 4;

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// sha256 over "label sha256\n" lines, in the given order.
std::string combined_hash(const std::vector<std::pair<std::string, std::string>>& labelled_hashes);

// sha256(kind + "\n" + canonical options JSON).
std::string config_hash(std::string_view kind, std::string_view options_json);

const char* version();

}  // namespace facepsy::cli
