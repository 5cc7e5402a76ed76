#include "stefan/experiment.hpp"
#include "stefan/report.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace {

using namespace stefan;
namespace fs = std::filesystem;

struct Globals {
    std::string out;
    bool quiet = false;
};

void diagnose(const char* kind, const std::string& message, const std::vector<Violation>& violations = {})
{
    nlohmann::json j{{"error", kind}, {"message", message}};
    if (!violations.empty()) {
        j["violations"] = nlohmann::json::array();
        for (const auto& v : violations) {
            j["violations"].push_back({{"assumption", v.assumption}, {"detail", v.detail}});
        }
    }
    std::cerr << j.dump() << std::endl;
}

fs::path output_dir(const Globals& g, const RunConfig& cfg)
{
    if (!g.out.empty()) {
        return g.out;
    }
    return cfg.output_dir.empty() ? fs::path("out") : fs::path(cfg.output_dir);
}

void print_check(std::ostream& os, const CheckResult& c)
{
    os << "initial data: " << (c.validation.ok() ? "ok" : "violations") << '\n';
    for (const auto& v : c.validation.violations) {
        os << "  " << v.assumption << ": " << v.detail << '\n';
    }
    os << (c.order == Order::Second ? "Assumption 3" : "Assumption 7") << " (setpoint restriction): "
       << (c.min_setpoint ? to_string(c.setpoint_verdict) : "not evaluated");
    if (c.min_setpoint) {
        os << ", minimum setpoint " << format_double(*c.min_setpoint);
    }
    os << '\n';
    if (c.gains2) {
        const auto& g = *c.gains2;
        if (g.assumption3_ok) {
            os << "Assumption 4 (flux positivity): " << to_string(g.assumption4) << ", c2 < "
               << format_double(g.safety_upper.value_or(0.0)) << '\n';
            os << "stability condition: " << to_string(g.theorem_cond) << ", c2 < "
               << format_double(g.stability_upper.value_or(0.0))
               << (g.small_setpoint_branch ? " (small-setpoint branch)" : "") << '\n';
        }
        os << "Hurwitz: " << (g.hurwitz ? "yes" : "no") << '\n';
    }
    if (c.gains3) {
        const auto& g = *c.gains3;
        os << "Assumption 6 (c1 <= c2): " << to_string(g.assumption6) << '\n';
        if (g.c3_upper) {
            os << "Assumption 8 (c3 window): " << to_string(g.assumption8) << ", " << format_double(g.c3_lower)
               << " <= c3 <= " << format_double(*g.c3_upper) << '\n';
        }
        os << "Hurwitz: " << (g.hurwitz ? "yes" : "no") << '\n';
    }
    if (c.certificate) {
        os << "certificate: Lyapunov residual " << format_double(c.certificate->residual_max_eig)
           << ", min eig Lambda " << format_double(c.certificate->lambda_min_eig) << " ("
           << (c.certificate->lambda_pd_ok ? "positive definite" : "not positive definite") << ")\n";
    } else {
        os << "certificate: " << c.certificate_error.value_or("not computed") << '\n';
    }
    for (const auto& w : c.warnings) {
        os << "warning: " << w << '\n';
    }
}

int cmd_run(const Globals& g, const std::string& path)
{
    const RunConfig cfg = load_config(path);
    const RunResult res = execute_run(to_si(cfg));
    const fs::path dir = output_dir(g, cfg);
    write_run_outputs(dir, cfg, res);

    if (!g.quiet) {
        for (const auto& w : res.check.warnings) {
            std::cout << "warning: " << w << '\n';
        }
        std::cout << "status: " << res.status << '\n';
        if (res.trajectory && !res.trajectory->records.empty()) {
            const auto& last = res.trajectory->records.back();
            std::cout << "final t = " << format_double(last.t) << " s, s = " << format_double(last.s) << " m\n";
        }
        std::cout << "wrote " << (dir / "report.json").string() << '\n';
    }
    switch (res.exit_code) {
    case exit_validation:
        diagnose("validation", res.diagnostic, res.check.blocking());
        break;
    case exit_numerical:
        diagnose("numerical", res.diagnostic);
        break;
    case exit_constraint_violated:
        diagnose("constraint", res.diagnostic);
        break;
    default:
        break;
    }
    return res.exit_code;
}

int cmd_check(const Globals& g, const std::string& path)
{
    const RunConfig cfg = load_config(path);
    CheckResult res;
    try {
        res = check_config(to_si(cfg));
    } catch (const ValidationError& e) {
        diagnose("validation", e.what());
        return exit_validation;
    }
    const fs::path dir = output_dir(g, cfg);
    write_check_output(dir, cfg, res);
    if (!g.quiet) {
        print_check(std::cout, res);
    }
    if (!res.admissible()) {
        diagnose("validation", "config is not admissible", res.blocking());
        return exit_validation;
    }
    return exit_ok;
}

int cmd_sweep(const Globals& g, const std::string& path, const std::vector<std::string>& axis_texts, unsigned jobs)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path);
    }
    std::ostringstream text;
    text << in.rdbuf();
    const ConfigEntries base = parse_entries(text.str());
    const RunConfig cfg = build_config(base);

    std::vector<SweepAxis> axes;
    for (const auto& a : axis_texts) {
        axes.push_back(parse_axis(a));
    }
    const fs::path dir = output_dir(g, cfg);
    const SweepResult res = run_sweep(base, axes, dir, jobs);
    write_sweep_summary(dir / "summary.csv", res);
    if (!g.quiet) {
        int failed = 0;
        for (const auto& row : res.rows) {
            failed += row.exit_code != exit_ok ? 1 : 0;
        }
        std::cout << res.rows.size() << " runs, " << failed << " with non-zero status; wrote "
                  << (dir / "summary.csv").string() << '\n';
    }
    return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Simulate and analyse boundary-controlled Stefan problems with high-order interface dynamics"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--out", g.out, "Output directory (default: config output.directory, else ./out)");
    app.add_flag("--quiet", g.quiet, "Suppress progress output");

    std::string run_path;
    auto* run = app.add_subcommand("run", "Simulate a config and write trajectory.csv and report.json");
    run->add_option("config", run_path, "Config file")->required();

    std::string check_path;
    auto* check = app.add_subcommand("check", "Report admissibility of a config without simulating");
    check->add_option("config", check_path, "Config file")->required();

    std::string sweep_path;
    std::vector<std::string> axes;
    unsigned jobs = std::max(1U, std::thread::hardware_concurrency());
    auto* sweep = app.add_subcommand("sweep", "Run the cross product of parameter axes");
    sweep->add_option("config", sweep_path, "Base config file")->required();
    sweep->add_option("--axis", axes, "Parameter axis key=v1,v2,... (repeatable)");
    sweep->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        if (*run) {
            return cmd_run(g, run_path);
        }
        if (*check) {
            return cmd_check(g, check_path);
        }
        return cmd_sweep(g, sweep_path, axes, jobs);
    } catch (const ConfigError& e) {
        diagnose("config", e.what());
        return exit_config;
    } catch (const ValidationError& e) {
        diagnose("validation", e.what());
        return exit_validation;
    } catch (const NumericalError& e) {
        diagnose("numerical", e.what());
        return exit_numerical;
    } catch (const std::exception& e) {
        diagnose("internal", e.what());
        return exit_numerical;
    }
}
