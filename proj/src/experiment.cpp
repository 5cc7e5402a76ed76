#include "stefan/experiment.hpp"

#include "stefan/report.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace stefan {

namespace {

namespace fs = std::filesystem;

std::optional<double> as_number(const std::string& text)
{
    double v = 0.0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || text.empty()) {
        return std::nullopt;
    }
    return v;
}

// Numbers compare numerically, anything else as text, numbers first.
bool value_less(const std::string& a, const std::string& b)
{
    const auto na = as_number(a);
    const auto nb = as_number(b);
    if (na && nb) {
        return *na < *nb;
    }
    if (na || nb) {
        return na.has_value();
    }
    return a < b;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << text;
}

std::string run_dir_name(std::size_t index, std::size_t total)
{
    const auto width = std::max<std::size_t>(3, std::to_string(total).size());
    std::ostringstream os;
    os << "run-" << std::setw(static_cast<int>(width)) << std::setfill('0') << index;
    return os.str();
}

} // namespace

std::vector<Violation> CheckResult::blocking() const
{
    std::vector<Violation> out = validation.violations;
    if (min_setpoint && setpoint_verdict != Verdict::Satisfied) {
        const char* name = order == Order::Second ? "Assumption 3" : "Assumption 7";
        std::ostringstream os;
        os << "setpoint must exceed the minimum reachable setpoint " << format_double(*min_setpoint) << " ("
           << to_string(setpoint_verdict) << ")";
        out.push_back({name, os.str(), *min_setpoint});
    }
    return out;
}

CheckResult check_config(const RunConfig& config)
{
    CheckResult r;
    r.order = config.order;
    r.validation = validate_initial(config.initial, config.physical, config.order, config.solver.tol);

    if (config.order == Order::Second) {
        r.gains2 = check_gains_2nd(config.gains, config.initial, config.physical);
        r.min_setpoint = r.gains2->min_setpoint;
        r.setpoint_verdict = check_strict_less(r.gains2->min_setpoint, config.gains.setpoint);
        if (r.gains2->assumption3_ok && !r.gains2->assumption4_ok) {
            r.warnings.push_back("Assumption 4 not satisfied: positivity of the boundary flux is not guaranteed");
        }
        if (r.gains2->assumption3_ok && !r.gains2->theorem_cond_ok) {
            r.warnings.push_back("gain stability condition not satisfied: exponential stability is not certified");
        }
    } else if (config.initial.a0) {
        r.gains3 = check_gains_3rd(config.gains, config.initial, config.physical, config.relaxation);
        r.min_setpoint = r.gains3->min_setpoint;
        r.setpoint_verdict = r.gains3->assumption7;
        if (r.gains3->assumption6 != Verdict::Satisfied) {
            r.warnings.push_back("Assumption 6 not satisfied: the setpoint restriction cannot be evaluated");
        }
        if (r.gains3->assumption8 != Verdict::Satisfied) {
            r.warnings.push_back("Assumption 8 not satisfied: c3 lies outside its admissible window");
        }
    }
    if (!is_hurwitz(closed_loop_matrix(config.physical, config.gains))) {
        r.warnings.push_back("A + B K^T is not Hurwitz");
    }

    try {
        r.certificate = certify(config.gains, config.physical);
        if (!r.certificate->lambda_pd_ok) {
            r.warnings.push_back("no positive definite Lambda found over the kappa grid");
        }
    } catch (const Error& e) {
        r.certificate_error = e.what();
    }
    return r;
}

RunResult execute_run(const RunConfig& config)
{
    RunResult res;
    const auto start = std::chrono::steady_clock::now();
    auto finish = [&](int code, std::string status, std::string diagnostic) {
        res.exit_code = code;
        res.status = std::move(status);
        res.diagnostic = std::move(diagnostic);
        res.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return res;
    };

    try {
        res.check = check_config(config);
    } catch (const ValidationError& e) {
        return finish(exit_validation, "invalid", e.what());
    }
    if (!res.check.admissible()) {
        std::string msg;
        for (const auto& v : res.check.blocking()) {
            msg += (msg.empty() ? "" : "; ") + v.assumption + ": " + v.detail;
        }
        return finish(exit_validation, "invalid", msg);
    }

    RecordHook hook;
    if (res.check.certificate) {
        hook = lyapunov_hook(config.physical, config.gains, *res.check.certificate, config.solver.flux_stencil);
    }
    try {
        res.trajectory =
            simulate(config.initial, config.physical, config.gains, config.solver, config.order, config.mode, hook);
    } catch (const NumericalError& e) {
        return finish(exit_numerical, "numerical-failure", e.what());
    } catch (const ValidationError& e) {
        return finish(exit_validation, "invalid", e.what());
    }

    res.safety = safety_monitor(*res.trajectory, config.initial, config.physical, config.gains, config.solver.tol);
    res.phi_rate = phi_decay_rate(*res.trajectory);
    if (!res.trajectory->completed()) {
        return finish(exit_constraint_violated, to_string(res.trajectory->termination), res.trajectory->diagnostic);
    }
    if (!res.safety->all_satisfied()) {
        std::string msg;
        for (const auto& c : res.safety->constraints) {
            if (!c.satisfied) {
                msg += (msg.empty() ? "" : ", ") + c.name;
            }
        }
        return finish(exit_constraint_violated, "constraint-violated", "violated: " + msg);
    }
    return finish(exit_ok, "completed", "");
}

void write_run_outputs(const fs::path& dir, const RunConfig& config, const RunResult& result)
{
    fs::create_directories(dir);
    write_text(dir / "config.cfg", render_config(config));
    if (result.trajectory) {
        std::ostringstream csv;
        write_trajectory_csv(csv, *result.trajectory, result.safety ? &*result.safety : nullptr,
                             config.record_every);
        write_text(dir / "trajectory.csv", csv.str());
    }
    write_text(dir / "report.json", run_report(config, result).dump(2) + "\n");
}

void write_check_output(const fs::path& dir, const RunConfig& config, const CheckResult& result)
{
    fs::create_directories(dir);
    write_text(dir / "check.json", check_report(config, result).dump(2) + "\n");
}

SweepAxis parse_axis(const std::string& text)
{
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("sweep axis must look like key=v1,v2,...: '" + text + "'");
    }
    SweepAxis axis;
    axis.key = text.substr(0, eq);
    if (!is_known_key(axis.key)) {
        throw ConfigError("sweep axis: unknown key " + axis.key);
    }
    std::stringstream ss(text.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            axis.values.push_back(item);
        }
    }
    if (axis.values.empty()) {
        throw ConfigError("sweep axis " + axis.key + " has no values");
    }
    return axis;
}

SweepResult run_sweep(const ConfigEntries& base, const std::vector<SweepAxis>& axes, const fs::path& out,
                      unsigned jobs)
{
    if (axes.empty()) {
        throw ConfigError("empty sweep: give at least one --axis key=v1,v2,...");
    }
    SweepResult result;
    std::set<std::string> seen;
    for (const auto& axis : axes) {
        if (!is_known_key(axis.key)) {
            throw ConfigError("sweep axis: unknown key " + axis.key);
        }
        if (axis.values.empty()) {
            throw ConfigError("empty sweep: axis " + axis.key + " has no values");
        }
        if (!seen.insert(axis.key).second) {
            throw ConfigError("sweep axis given twice: " + axis.key);
        }
        result.axis_keys.push_back(axis.key);
    }

    std::vector<std::vector<std::string>> combos{{}};
    for (const auto& axis : axes) {
        std::vector<std::vector<std::string>> next;
        for (const auto& combo : combos) {
            for (const auto& v : axis.values) {
                auto c = combo;
                c.push_back(v);
                next.push_back(std::move(c));
            }
        }
        combos = std::move(next);
    }
    std::sort(combos.begin(), combos.end(), [](const auto& a, const auto& b) {
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), value_less);
    });

    result.rows.resize(combos.size());
    for (std::size_t i = 0; i < combos.size(); ++i) {
        result.rows[i].params = combos[i];
        result.rows[i].run_dir = run_dir_name(i, combos.size());
    }

    auto run_one = [&](std::size_t i) {
        SweepRow& row = result.rows[i];
        try {
            ConfigEntries entries = base;
            for (std::size_t a = 0; a < axes.size(); ++a) {
                entries.set(axes[a].key, row.params[a]);
            }
            const RunConfig cfg = build_config(entries);
            const RunConfig si = to_si(cfg);
            const RunResult res = execute_run(si);
            write_run_outputs(out / row.run_dir, cfg, res);
            row.exit_code = res.exit_code;
            row.status = res.status;
            row.diagnostic = res.diagnostic;
            row.runtime_s = res.runtime_s;
            row.phi_rate = res.phi_rate;
            // Predicted verdicts from the gain check sit next to the observed ones.
            auto predicted = [&](const char* name, Verdict v) {
                row.verdicts.emplace_back(name, v == Verdict::Satisfied ? "ok" : to_string(v));
            };
            if (res.check.gains2) {
                predicted("Assumption 4", res.check.gains2->assumption4);
            }
            if (res.check.gains3) {
                predicted("Assumption 6", res.check.gains3->assumption6);
                predicted("Assumption 8", res.check.gains3->assumption8);
            }
            if (res.safety) {
                for (const auto& c : res.safety->constraints) {
                    row.verdicts.emplace_back(c.name, c.satisfied ? "ok" : "violated");
                }
            }
            if (res.trajectory && !res.trajectory->records.empty()) {
                row.final_s = res.trajectory->records.back().s;
                row.final_error = std::abs(*row.final_s - si.gains.setpoint);
            }
        } catch (const ConfigError& e) {
            row.exit_code = exit_config;
            row.status = "config-error";
            row.diagnostic = e.what();
        } catch (const std::exception& e) {
            row.exit_code = exit_numerical;
            row.status = "error";
            row.diagnostic = e.what();
        }
    };

    fs::create_directories(out);
    const unsigned workers = std::max(1U, std::min<unsigned>(jobs, static_cast<unsigned>(combos.size())));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < combos.size(); i = next++) {
                run_one(i);
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }

    // Richardson estimate along nx: rows that differ only in nx, in increasing nx.
    const auto nx_axis = std::find(result.axis_keys.begin(), result.axis_keys.end(), "solver.nx");
    if (nx_axis != result.axis_keys.end()) {
        const auto k = static_cast<std::size_t>(nx_axis - result.axis_keys.begin());
        std::map<std::vector<std::string>, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < result.rows.size(); ++i) {
            auto key = result.rows[i].params;
            key.erase(key.begin() + static_cast<std::ptrdiff_t>(k));
            groups[key].push_back(i);
        }
        for (const auto& [key, idx] : groups) {
            for (std::size_t j = 2; j < idx.size(); ++j) {
                const auto& a = result.rows[idx[j - 2]];
                const auto& b = result.rows[idx[j - 1]];
                auto& c = result.rows[idx[j]];
                const auto na = as_number(a.params[k]);
                const auto nb = as_number(b.params[k]);
                const auto nc = as_number(c.params[k]);
                if (!a.final_s || !b.final_s || !c.final_s || !na || !nb || !nc) {
                    continue;
                }
                const double d1 = std::abs(*a.final_s - *b.final_s);
                const double d2 = std::abs(*b.final_s - *c.final_s);
                const double r1 = *nb / *na;
                const double r2 = *nc / *nb;
                if (d1 > 0.0 && d2 > 0.0 && r1 > 1.0 && std::abs(r1 - r2) <= 1e-12 * r1) {
                    c.observed_order = std::log(d1 / d2) / std::log(r1);
                }
            }
        }
    }
    return result;
}

void write_sweep_summary(const fs::path& path, const SweepResult& result)
{
    std::set<std::string> names;
    for (const auto& row : result.rows) {
        for (const auto& [name, v] : row.verdicts) {
            names.insert(name);
        }
    }
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    auto quote = [](const std::string& s) {
        std::string q = "\"";
        for (char ch : s) {
            q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        }
        return q + "\"";
    };

    std::ostringstream os;
    os << "run";
    for (const auto& key : result.axis_keys) {
        os << ',' << key;
    }
    os << ",exit_code,status";
    for (const auto& name : names) {
        os << ',' << name;
    }
    os << ",final_s,final_abs_error,phi_rate,runtime_s,observed_order,diagnostic\n";

    for (const auto& row : result.rows) {
        os << row.run_dir;
        for (const auto& p : row.params) {
            os << ',' << quote(p);
        }
        os << ',' << row.exit_code << ',' << row.status;
        for (const auto& name : names) {
            const auto it = std::find_if(row.verdicts.begin(), row.verdicts.end(),
                                         [&](const auto& v) { return v.first == name; });
            os << ',' << (it == row.verdicts.end() ? std::string() : it->second);
        }
        os << ',' << opt(row.final_s) << ',' << opt(row.final_error) << ',' << opt(row.phi_rate) << ','
           << format_double(row.runtime_s) << ',' << opt(row.observed_order) << ',' << quote(row.diagnostic)
           << '\n';
    }
    write_text(path, os.str());
}

} // namespace stefan
