#pragma once

#include "invar/detector.hpp"
#include "invar/evaluation.hpp"
#include "invar/thresholding.hpp"
#include "invar/validation.hpp"

#include <json.hpp>

#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace invar::report {

using nlohmann::json;

json validation_json(const std::vector<ValidationRecord>& records, const RefinementReport& refinement);
json threshold_json(const ClusterResult& cluster, const std::vector<ValidationRecord>& records);

json alarms_json(const std::vector<AlarmSegment>& segments);
/// Throws Error(bad_config) on a malformed document.
std::vector<AlarmSegment> alarms_from_json(const json& doc);

json windows_json(const std::map<std::string, WindowChoice>& choices, WindowMode mode);
/// Invariant id → window size.
std::map<std::string, double> windows_from_json(const json& doc);

json evaluation_json(const EvaluationReport& report, const std::vector<AlarmSegment>& segments);

/// end_ts,ssr,z,coef_0,... one row per window.
void write_trace_csv(std::ostream& out, const SsrTrace& trace);

/// Pretty-printed with a trailing newline.
std::string dump(const json& doc);

/// Writes to a sibling temp file and renames it over `path`.
/// Throws Error(io).
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace invar::report
