#include "stefan/report.hpp"

#include <cmath>

namespace stefan {

namespace {

using nlohmann::json;

json opt(const std::optional<double>& v)
{
    return v ? json(*v) : json(nullptr);
}

// JSON has no infinity; unbounded values are written as null.
json finite_or_null(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

json matrix(const Eigen::MatrixXd& m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(finite_or_null(m(i, j)));
        }
        rows.push_back(row);
    }
    return rows;
}

json verdict(Verdict v)
{
    return to_string(v);
}

json config_summary(const RunConfig& c)
{
    json j;
    j["order"] = dimension(c.order);
    j["units"] = to_string(c.units);
    j["mode"] = std::holds_alternative<OpenLoop>(c.mode) ? "open-loop" : "closed-loop";
    j["gains"] = {{"c1", c.gains.c1}, {"c2", c.gains.c2}, {"c3", opt(c.gains.c3)}, {"setpoint", c.gains.setpoint}};
    j["solver"] = {{"nx", c.solver.nx}, {"dt", c.solver.dt}, {"t_final", c.solver.t_final}};
    return j;
}

void put_csv(std::ostream& out, double v)
{
    out << format_double(v);
}

} // namespace

json to_json(const ValidationReport& report)
{
    json violations = json::array();
    for (const auto& v : report.violations) {
        violations.push_back({{"assumption", v.assumption}, {"detail", v.detail}, {"value", finite_or_null(v.value)}});
    }
    return {{"ok", report.ok()}, {"violations", violations}};
}

json to_json(const GainReport2& r)
{
    json j;
    j["min_setpoint"] = r.min_setpoint;
    j["assumption3_ok"] = r.assumption3_ok;
    j["safety_upper"] = r.safety_upper ? finite_or_null(*r.safety_upper) : json(nullptr);
    j["assumption4"] = verdict(r.assumption4);
    j["assumption4_ok"] = r.assumption4_ok;
    j["small_setpoint_branch"] = r.small_setpoint_branch;
    j["c2_bar"] = r.c2_bar ? finite_or_null(*r.c2_bar) : json(nullptr);
    j["c2_barbar"] = r.c2_barbar ? finite_or_null(*r.c2_barbar) : json(nullptr);
    j["stability_upper"] = r.stability_upper ? finite_or_null(*r.stability_upper) : json(nullptr);
    j["stability_condition"] = verdict(r.theorem_cond);
    j["stability_condition_ok"] = r.theorem_cond_ok;
    j["hurwitz"] = r.hurwitz;
    j["units_note"] =
        "second bound (alpha eps c1 + alpha)/(12 s_r^2 - alpha eps): numerator m^2/s over denominator m^2, "
        "so 1/s like c2; evaluated as written";
    return j;
}

json to_json(const GainReport3& r)
{
    json j;
    j["relaxation"] = to_string(r.relaxation);
    j["assumption6"] = verdict(r.assumption6);
    j["min_setpoint"] = opt(r.min_setpoint);
    j["assumption7"] = verdict(r.assumption7);
    j["ratio_term"] = r.ratio_term;
    j["c3_bar"] = opt(r.c3_bar);
    j["ratio_term2"] = r.ratio_term2;
    j["c3_lower"] = r.c3_lower;
    j["c3_upper"] = opt(r.c3_upper);
    j["assumption8"] = verdict(r.assumption8);
    j["hurwitz"] = r.hurwitz;
    j["ok"] = r.ok();
    return j;
}

json to_json(const LyapunovCert& c)
{
    json j;
    j["order"] = dimension(c.order);
    j["P"] = matrix(c.P);
    j["Q"] = matrix(c.Q);
    j["S"] = matrix(c.S);
    j["Lambda"] = matrix(c.Lambda);
    j["lambda1"] = c.lambda1;
    j["kappa"] = c.kappa;
    j["residual_max_eig"] = c.residual_max_eig;
    j["lambda_min_eig"] = finite_or_null(c.lambda_min_eig);
    j["lyapunov_inequality_ok"] = c.lyap_ineq_ok;
    j["lambda_positive_definite"] = c.lambda_pd_ok;
    if (c.order == Order::Second) {
        j["pd_lhs"] = opt(c.pd_lhs);
        j["pd_rhs"] = opt(c.pd_rhs);
        j["limit_test"] = c.limit_test ? json(*c.limit_test) : json(nullptr);
    } else {
        j["equal_gain_case"] = c.sufficient_case;
    }
    return j;
}

json to_json(const SafetyReport& r)
{
    json constraints = json::array();
    for (const auto& c : r.constraints) {
        constraints.push_back({{"name", c.name},
                               {"satisfied", c.satisfied},
                               {"worst_margin", finite_or_null(c.worst_margin)},
                               {"first_violation", opt(c.first_violation)}});
    }
    return {{"all_satisfied", r.all_satisfied()}, {"constraints", constraints}};
}

json to_json(const CheckResult& c)
{
    json j;
    j["validation"] = to_json(c.validation);
    j["min_setpoint"] = {
        {"assumption", c.order == Order::Second ? "Assumption 3" : "Assumption 7"},
        {"value", opt(c.min_setpoint)},
        {"verdict", verdict(c.setpoint_verdict)},
    };
    if (c.gains3) {
        j["min_setpoint"]["relaxation"] = to_string(c.gains3->relaxation);
    }
    if (c.gains2) {
        j["gain_check"] = to_json(*c.gains2);
    } else if (c.gains3) {
        j["gain_check"] = to_json(*c.gains3);
    } else {
        j["gain_check"] = nullptr;
    }
    if (c.certificate) {
        j["certificate"] = to_json(*c.certificate);
    } else {
        j["certificate"] = {{"error", c.certificate_error.value_or("not computed")}};
    }
    j["admissible"] = c.admissible();
    j["warnings"] = c.warnings;
    return j;
}

json check_report(const RunConfig& config, const CheckResult& check)
{
    json j = to_json(check);
    j["schema_version"] = report_schema_version;
    j["command"] = "check";
    j["config"] = config_summary(config);
    j["exit_code"] = check.admissible() ? exit_ok : exit_validation;
    return j;
}

json run_report(const RunConfig& config, const RunResult& result)
{
    json j = to_json(result.check);
    j["schema_version"] = report_schema_version;
    j["command"] = "run";
    j["config"] = config_summary(config);
    j["safety"] = result.safety ? to_json(*result.safety) : json(nullptr);
    j["phi_decay_rate"] = opt(result.phi_rate);

    json run;
    run["status"] = result.status;
    run["diagnostic"] = result.diagnostic;
    run["runtime_s"] = result.runtime_s;
    if (result.trajectory) {
        const auto& traj = *result.trajectory;
        run["termination"] = to_string(traj.termination);
        run["violation_time"] = opt(traj.violation_time);
        run["records"] = traj.records.size();
        if (!traj.records.empty()) {
            const auto& last = traj.records.back();
            run["final"] = {{"t", last.t},
                            {"s", last.s},
                            {"s_dot", last.s_dot},
                            {"qc", last.qc},
                            {"abs_setpoint_error", std::abs(last.s - to_si(config).gains.setpoint)}};
        }
    }
    j["run"] = run;
    j["exit_code"] = result.exit_code;
    return j;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory, const SafetyReport* safety,
                          int record_every)
{
    const bool third = trajectory.order == Order::Third;
    out << "t,s,s_dot";
    if (third) {
        out << ",s_ddot";
    }
    out << ",qc,T_boundary,V,Phi";
    if (safety) {
        for (const auto& c : safety->constraints) {
            out << ",flag_" << c.name;
        }
    }
    out << '\n';

    const auto& rec = trajectory.records;
    const auto every = static_cast<std::size_t>(std::max(1, record_every));
    for (std::size_t n = 0; n < rec.size(); ++n) {
        if (n % every != 0 && n + 1 != rec.size()) {
            continue;
        }
        const auto& r = rec[n];
        put_csv(out, r.t);
        out << ',';
        put_csv(out, r.s);
        out << ',';
        put_csv(out, r.s_dot);
        if (third) {
            out << ',';
            put_csv(out, r.s_ddot.value_or(0.0));
        }
        out << ',';
        put_csv(out, r.qc);
        out << ',';
        put_csv(out, r.t_boundary);
        out << ',';
        if (r.lyapunov_v) {
            put_csv(out, *r.lyapunov_v);
        }
        out << ',';
        if (r.phi) {
            put_csv(out, *r.phi);
        }
        if (safety) {
            for (std::size_t c = 0; c < safety->constraints.size(); ++c) {
                out << ',' << ((safety->flags[n] >> c) & 1U);
            }
        }
        out << '\n';
    }
}

} // namespace stefan
