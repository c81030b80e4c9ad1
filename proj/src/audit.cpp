#include "facepsy/audit.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "facepsy/common.hpp"

namespace facepsy {

AuditReport audit_manifest(std::string_view manifest_json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(manifest_json);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (j.value("kind", "") != "fold_manifest") throw DataError("not a fold manifest");
  AuditReport a;
  a.scheme = j.at("scheme").get<std::string>();
  a.time_rule = j.at("time_rule").get<std::string>();
  struct Row {
    std::string participant;
    std::string date;  // ISO dates compare correctly as strings
  };
  std::vector<Row> rows;
  for (const auto& r : j.at("instances")) {
    if (r.at("row").get<std::size_t>() != rows.size()) throw DataError("manifest instance rows out of order");
    rows.push_back({r.at("participant").get<std::string>(), r.at("date").get<std::string>()});
  }
  const bool lopo = a.scheme == "lopo";
  const bool global = a.time_rule == "calendar_global";
  for (const auto& f : j.at("folds")) {
    const auto fold = f.at("fold").get<std::string>();
    const auto test = f.at("test").get<std::vector<std::size_t>>();
    const std::set<std::size_t> test_set(test.begin(), test.end());
    for (auto t : test)
      if (t >= rows.size()) throw DataError("fold " + fold + " references unknown row");
    ++a.folds_checked;
    for (const auto& [stage, list] : f.at("stages").items()) {
      for (auto r : list.get<std::vector<std::size_t>>()) {
        if (r >= rows.size()) throw DataError("fold " + fold + " references unknown row");
        if (test_set.count(r)) a.violations.push_back({fold, stage, r, "test row on training side"});
        for (auto t : test) {
          ++a.rows_checked;
          const auto& tr = rows[r];
          const auto& te = rows[t];
          if (lopo) {
            if (tr.participant == te.participant)
              a.violations.push_back({fold, stage, r, "test participant " + te.participant + " in training"});
          } else if (global || tr.participant == te.participant) {
            if (tr.date >= te.date)
              a.violations.push_back({fold, stage, r, "training row dated " + tr.date + " on/after test date " + te.date});
          }
        }
      }
    }
  }
  return a;
}

AuditReport audit_manifest_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return audit_manifest(ss.str());
}

std::string audit_to_json(const AuditReport& a) {
  nlohmann::ordered_json j;
  j["format_version"] = "1";
  j["kind"] = "leakage_audit";
  j["scheme"] = a.scheme;
  j["time_rule"] = a.time_rule;
  j["folds_checked"] = a.folds_checked;
  j["rows_checked"] = a.rows_checked;
  j["passed"] = a.passed();
  auto v = nlohmann::ordered_json::array();
  for (const auto& x : a.violations) v.push_back({{"fold", x.fold}, {"stage", x.stage}, {"row", x.row}, {"rule", x.rule}});
  j["violations"] = v;
  return j.dump(1) + "\n";
}

}  // namespace facepsy
