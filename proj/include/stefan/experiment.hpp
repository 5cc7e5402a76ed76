#pragma once

#include "stefan/analysis.hpp"
#include "stefan/config.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace stefan {

/// Process exit codes of stefanctl.
enum ExitCode : int {
    exit_ok = 0,
    exit_constraint_violated = 1,
    exit_config = 2,
    exit_validation = 3,
    exit_numerical = 4,
};

/// Admissibility of a config, computed without simulating.
struct CheckResult {
    Order order = Order::Second;
    ValidationReport validation;
    /// Setpoint restriction (Assumption 3 for second order, 7 for third).
    std::optional<double> min_setpoint;
    Verdict setpoint_verdict = Verdict::Violated;
    std::optional<GainReport2> gains2;
    std::optional<GainReport3> gains3;
    std::optional<LyapunovCert> certificate;
    std::optional<std::string> certificate_error;
    std::vector<std::string> warnings;

    /// Validation failures that stop a run: initial-data assumptions and the
    /// setpoint restriction when it can be evaluated. Gain conditions only warn.
    bool admissible() const { return blocking().empty(); }
    std::vector<Violation> blocking() const;
};

/// `config` must be in SI units.
CheckResult check_config(const RunConfig& config);

struct RunResult {
    CheckResult check;
    std::optional<Trajectory> trajectory;
    std::optional<SafetyReport> safety;
    std::optional<double> phi_rate;
    double runtime_s = 0.0;
    int exit_code = exit_ok;
    std::string status;
    std::string diagnostic;
};

/// Checks and, when admissible, simulates. Never throws for validation or
/// numerical failures; they land in `exit_code` and `diagnostic`.
RunResult execute_run(const RunConfig& config);

/// Writes trajectory.csv and report.json into `dir`.
void write_run_outputs(const std::filesystem::path& dir, const RunConfig& config, const RunResult& result);
void write_check_output(const std::filesystem::path& dir, const RunConfig& config, const CheckResult& result);

struct SweepAxis {
    std::string key;
    std::vector<std::string> values;
};

/// Parses `key=v1,v2,...`. Throws ConfigError.
SweepAxis parse_axis(const std::string& text);

struct SweepRow {
    std::vector<std::string> params;
    std::string run_dir;
    int exit_code = exit_ok;
    std::string status;
    std::vector<std::pair<std::string, std::string>> verdicts;
    std::optional<double> final_s;
    std::optional<double> final_error;
    std::optional<double> phi_rate;
    double runtime_s = 0.0;
    /// Richardson estimate from this row and the two preceding rows along the nx axis.
    std::optional<double> observed_order;
    std::string diagnostic;
};

struct SweepResult {
    std::vector<std::string> axis_keys;
    std::vector<SweepRow> rows;
};

/// Runs the cross product of `axes` over `base`, at most `jobs` at a time, each
/// into its own directory under `out`. Rows are in lexicographic parameter
/// order. Throws ConfigError for an empty sweep or an unknown key; failures of
/// individual runs are recorded in their rows.
SweepResult run_sweep(const ConfigEntries& base, const std::vector<SweepAxis>& axes, const std::filesystem::path& out,
                      unsigned jobs);

void write_sweep_summary(const std::filesystem::path& path, const SweepResult& result);

} // namespace stefan
