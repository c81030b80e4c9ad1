#pragma once

// Independent leakage checker. It reads only a serialized fold manifest and
// recomputes every check from the instance table it carries.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace facepsy {

struct AuditViolation {
  std::string fold;
  std::string stage;
  std::size_t row = 0;
  std::string rule;
};

struct AuditReport {
  std::string scheme;
  std::string time_rule;
  std::size_t folds_checked = 0;
  std::size_t rows_checked = 0;  // (stage, row, test) triples examined
  std::vector<AuditViolation> violations;
  bool passed() const { return violations.empty(); }
};

// lopo: no training-side row may belong to a test participant.
// lopdo/calendar_global: every training-side row is dated strictly before
// every test row's date. lopdo/per_participant: the same, for rows of the
// test participant. Test rows never appear on the training side.
AuditReport audit_manifest(std::string_view manifest_json);
AuditReport audit_manifest_file(const std::filesystem::path& path);

std::string audit_to_json(const AuditReport& a);

}  // namespace facepsy
