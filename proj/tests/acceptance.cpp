#include "fixtures.hpp"

#include "stefan/analysis.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

using namespace stefan;
using fixtures::melt;
using fixtures::zinc;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

SolverConfig solver(int nx, double dt, double t_final)
{
    SolverConfig cfg;
    cfg.nx = nx;
    cfg.dt = dt;
    cfg.t_final = t_final;
    return cfg;
}

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

const ControlGains demo_gains{0.1, 0.2, std::nullopt, 0.2};

// The zinc melt at nx = 128, dt = 0.25 s, shared by several criteria.
struct DemoRun {
    Trajectory traj;
    double runtime = 0.0;
};

const DemoRun& demo_run()
{
    static const DemoRun run = [] {
        const auto start = Clock::now();
        DemoRun r;
        r.traj = simulate(melt(), zinc(), demo_gains, solver(128, 0.25, 4000.0), Order::Second, ClosedLoop{});
        r.runtime = seconds_since(start);
        return r;
    }();
    return run;
}

// Boundary temperature rises to one interior peak and then falls. Wiggles
// smaller than `tol` (K) are ignored.
bool single_interior_peak(const std::vector<double>& v, double tol)
{
    std::size_t peak = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[peak]) {
            peak = i;
        }
    }
    if (peak == 0 || peak + 1 == v.size()) {
        return false;
    }
    double run_max = v.front();
    for (std::size_t i = 1; i <= peak; ++i) {
        if (v[i] < run_max - tol) {
            return false;
        }
        run_max = std::max(run_max, v[i]);
    }
    double run_min = v[peak];
    for (std::size_t i = peak + 1; i < v.size(); ++i) {
        if (v[i] > run_min + tol) {
            return false;
        }
        run_min = std::min(run_min, v[i]);
    }
    return true;
}

Outcome reproduction()
{
    const auto& run = demo_run();
    const auto& traj = run.traj;
    if (!traj.completed()) {
        return {false, std::string("terminated early: ") + traj.diagnostic};
    }
    const Tolerances tol;
    const auto safety = safety_monitor(traj, melt(), zinc(), demo_gains, tol);
    std::vector<double> tb;
    for (const auto& r : traj.records) {
        tb.push_back(r.t_boundary);
    }
    const double err = std::abs(traj.records.back().s - demo_gains.setpoint);
    const bool mono = safety.get("sdot-nonneg").satisfied;
    const bool qc = safety.get("qc-nonneg").satisfied;
    const bool temp = safety.get("temp-valid").satisfied;
    const bool peak = single_interior_peak(tb, 1e-3);
    const bool pass = mono && qc && temp && peak && err <= 2e-3 && run.runtime <= 60.0;
    return {pass, fmt("|s-s_r| = %.3g m, sdot-nonneg %d, qc-nonneg %d, temp-valid %d, single T(0) peak %d, %.2f s",
                      err, mono, qc, temp, peak, run.runtime)};
}

Outcome energy_balance_order()
{
    std::vector<double> sums;
    for (auto [nx, dt] : {std::pair{32, 1.0}, std::pair{64, 0.5}, std::pair{128, 0.25}}) {
        const auto traj = simulate(melt(), zinc(), demo_gains, solver(nx, dt, 1000.0), Order::Second, ClosedLoop{});
        if (!traj.completed()) {
            return {false, "run terminated early"};
        }
        sums.push_back(energy_balance(traj, zinc()).sum_abs);
    }
    const double o1 = std::log2(sums[0] / sums[1]);
    const double o2 = std::log2(sums[1] / sums[2]);
    return {std::min(o1, o2) >= 1.6, fmt("observed orders %.3f, %.3f", o1, o2)};
}

Outcome flux_ode()
{
    const auto coarse = simulate(melt(), zinc(), demo_gains, solver(64, 0.5, 4000.0), Order::Second, ClosedLoop{});
    const auto& fine = demo_run().traj;
    const double rc = qc_ode_residual(coarse, demo_gains, zinc()).rms;
    const double rf = qc_ode_residual(fine, demo_gains, zinc()).rms;
    return {rc / rf >= 3.0, fmt("rms %.4g -> %.4g, ratio %.3f", rc, rf, rc / rf)};
}

Outcome target_system()
{
    const auto cert = certify(demo_gains, zinc());
    double w_interface = 0.0;
    double max_u = 0.0;
    std::vector<double> wx;
    for (auto [nx, dt] : {std::pair{32, 1.0}, std::pair{64, 0.5}, std::pair{128, 0.25}}) {
        TransformDiagnostics diag;
        simulate(melt(), zinc(), demo_gains, solver(nx, dt, 4000.0), Order::Second, ClosedLoop{},
                 lyapunov_hook(zinc(), demo_gains, cert, 2, &diag));
        double m = 0.0;
        for (std::size_t i = 0; i < diag.t.size(); ++i) {
            w_interface = std::max(w_interface, std::abs(diag.w_interface[i]));
            max_u = std::max(max_u, diag.max_u[i]);
            // The initial profile does not satisfy the boundary condition the
            // control law imposes, so the first second is a startup layer.
            if (diag.t[i] >= 1.0) {
                m = std::max(m, std::abs(diag.wx_origin[i]));
            }
        }
        wx.push_back(m);
    }
    const double o1 = std::log2(wx[0] / wx[1]);
    const double o2 = std::log2(wx[1] / wx[2]);
    const bool pass = w_interface <= 1e-8 * max_u && std::min(o1, o2) >= 1.6;
    return {pass, fmt("max|w(s)| = %.3g (max|u| = %.3g), max|w_x(0)| over t >= 1 s: %.4g, %.4g, %.4g, orders %.3f, %.3f",
                      w_interface, max_u, wx[0], wx[1], wx[2], o1, o2)};
}

Outcome certificates()
{
    int tuples = 0;
    int eq43 = 0;
    int counterexamples = 0;
    double worst_residual = 0.0;
    while (tuples < 50) {
        const auto p = zinc(fixtures::uniform(5.0, 50.0));
        const auto data = melt(fixtures::uniform(2.0, 30.0), fixtures::uniform(0.05, 0.15));
        const double c1 = fixtures::log_uniform(0.02, 0.5);
        const double sr = fixtures::uniform(0.15, 0.35);
        // Put c2 - c1 on the scale where the limit test changes sign.
        const double d2 = 1.0 / p.eps + c1;
        const double scale = d2 * p.alpha * p.eps / (12.0 * sr * sr);
        const ControlGains g{c1, c1 + fixtures::log_uniform(0.01, 2.0) * scale, std::nullopt, sr};
        const auto report = check_gains_2nd(g, data, p);
        if (!report.assumption3_ok || !report.assumption4_ok) {
            continue;
        }
        ++tuples;
        for (double kappa : kappa_grid()) {
            // Unit largest weight; Lambda does not depend on the scale of Q.
            const auto cert = solve_P(g, p, 1.0 / std::max(1.0, kappa), kappa);
            worst_residual = std::max(worst_residual, cert.residual_max_eig);
        }
        const double rhs = lambda_pd_rhs(g, p);
        if (d2 * d2 > rhs) {
            ++eq43;
            if (!certify(g, p).lambda_pd_ok) {
                ++counterexamples;
            }
        }
    }
    const bool pass = worst_residual <= 1e-10 && counterexamples == 0 && eq43 > 0;
    return {pass, fmt("%d tuples, max residual eigenvalue %.3g, limit test held for %d, counterexamples %d", tuples,
                      worst_residual, eq43, counterexamples)};
}

Outcome lyapunov_decay()
{
    const ControlGains g{0.1, 0.1, std::nullopt, 0.2};
    const auto p = zinc();
    const auto report = check_gains_2nd(g, melt(), p);
    if (!report.theorem_cond_ok) {
        return {false, "constructed gains do not pass the stability condition"};
    }
    const auto cert = certify(g, p);
    const auto traj = simulate(melt(), p, g, solver(128, 0.25, 4000.0), Order::Second, ClosedLoop{},
                               lyapunov_hook(p, g, cert, 2));
    const Tolerances tol;
    double worst = 0.0;
    for (std::size_t i = 1; i < traj.records.size(); ++i) {
        const double prev = *traj.records[i - 1].phi;
        worst = std::max(worst, (*traj.records[i].phi - prev) / prev);
    }
    const auto rate = phi_decay_rate(traj);
    const bool pass = traj.completed() && worst <= tol.lyap && rate && *rate < 0.0;
    return {pass, fmt("largest relative step increase of Phi %.3g, fitted rate %.4g 1/s, Lambda positive definite %d",
                      worst, rate.value_or(0.0), cert.lambda_pd_ok)};
}

Outcome safety_implication()
{
    int admissible = 0;
    int antecedent = 0;
    int counterexamples = 0;
    for (double c2 : {0.1, 0.2, 0.5}) {
        for (double eps : {5.0, 20.0, 50.0}) {
            for (double surplus : {5.0, 10.0, 20.0}) {
                const auto p = zinc(eps);
                const auto data = melt(surplus);
                const ControlGains g{0.1, c2, std::nullopt, 0.2};
                if (!validate_initial(data, p, Order::Second).ok() || !check_gains_2nd(g, data, p).assumption3_ok) {
                    continue;
                }
                ++admissible;
                const auto traj = simulate(data, p, g, solver(64, 0.5, 2000.0), Order::Second, ClosedLoop{});
                const auto rep = safety_monitor(traj, data, p, g);
                if (!rep.get("qc-nonneg").satisfied) {
                    continue;
                }
                ++antecedent;
                if (!rep.get("sdot-nonneg").satisfied || !rep.get("s-bounds").satisfied ||
                    !rep.get("temp-valid").satisfied || !traj.completed()) {
                    ++counterexamples;
                }
            }
        }
    }
    const bool pass = admissible == 27 && counterexamples == 0;
    return {pass, fmt("%d admissible runs, qc-nonneg held in %d, counterexamples %d", admissible, antecedent,
                      counterexamples)};
}

Outcome third_order()
{
    const auto p = fixtures::zinc3(10.0, 10.0);
    InitialData data = melt();
    data.a0 = 0.0;
    const ControlGains g{0.1, 0.2, 0.25, 0.2};
    const bool a5 = validate_initial(data, p, Order::Third).ok();
    const auto gains = check_gains_3rd(g, data, p);
    const bool a7 = gains.min_setpoint && check_strict_less(*gains.min_setpoint, g.setpoint) == Verdict::Satisfied;
    if (!a5 || gains.assumption6 != Verdict::Satisfied || !a7 || gains.assumption8 != Verdict::Satisfied) {
        return {false, "config does not satisfy Assumptions 5-8"};
    }
    const auto start = Clock::now();
    const auto traj = simulate(data, p, g, solver(128, 0.25, 6000.0), Order::Third, ClosedLoop{});
    const double runtime = seconds_since(start);
    const auto rep = safety_monitor(traj, data, p, g);
    const double err = std::abs(traj.records.back().s - g.setpoint);
    const bool h1 = rep.get("sdot-nonneg").satisfied;
    const bool h2 = rep.get("h2-nonneg").satisfied;
    const bool qc = rep.get("qc-nonneg").satisfied;
    const bool pass = traj.completed() && err <= 2e-3 && h1 && h2 && qc && runtime <= 60.0;
    return {pass, fmt("|s-s_r| = %.3g m, h1 >= 0 %d, h2 >= 0 %d, qc-nonneg %d, %.2f s", err, h1, h2, qc, runtime)};
}

Outcome open_loop()
{
    const auto p = zinc();
    const InitialData data{0.1, 2e-4, std::nullopt, LinearProfile{0.0}};
    const auto traj = simulate(data, p, solver(64, 0.5, 400.0), Order::Second, constant_flux(0.0));
    double worst = 0.0;
    for (const auto& r : traj.records) {
        const double exact = data.s0 + p.eps * data.v0 * (1.0 - std::exp(-r.t / p.eps));
        worst = std::max(worst, std::abs(r.s - exact) / exact);
    }
    return {traj.completed() && worst <= 1e-6, fmt("max relative error %.3g", worst)};
}

} // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"zinc melt reproduction", reproduction},
        {"energy balance convergence", energy_balance_order},
        {"boundary flux ODE", flux_ode},
        {"target system", target_system},
        {"Lyapunov certificates", certificates},
        {"Lyapunov decay", lyapunov_decay},
        {"safety implication", safety_implication},
        {"third-order run", third_order},
        {"open-loop relaxation", open_loop},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome out;
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        failed += out.pass ? 0 : 1;
        std::printf("%s %zu %s: %s\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, out.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
