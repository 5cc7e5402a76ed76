#pragma once

#include "stefan/experiment.hpp"

#include <json.hpp>

#include <ostream>

namespace stefan {

inline constexpr int report_schema_version = 1;

nlohmann::json to_json(const ValidationReport& report);
nlohmann::json to_json(const GainReport2& report);
nlohmann::json to_json(const GainReport3& report);
nlohmann::json to_json(const LyapunovCert& cert);
nlohmann::json to_json(const SafetyReport& report);
nlohmann::json to_json(const CheckResult& check);

/// Full report of `stefanctl run`; `check` reports reuse the same layout
/// without the run and safety sections.
nlohmann::json run_report(const RunConfig& config, const RunResult& result);
nlohmann::json check_report(const RunConfig& config, const CheckResult& check);

/// Header t,s,s_dot[,s_ddot],qc,T_boundary,V,Phi followed by one 0/1 column
/// per monitored constraint. Every `record_every`-th record is written, plus
/// the last one.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory, const SafetyReport* safety,
                          int record_every = 1);

} // namespace stefan
