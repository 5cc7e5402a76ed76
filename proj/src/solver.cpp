#include "stefan/solver.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stefan {

namespace {

/// Raised when the interface leaves (0, L) mid-step; simulate turns it into a
/// termination record instead of an error.
class DomainExit : public Error {
public:
    using Error::Error;
};

struct Interface {
    double s = 0.0;
    double v = 0.0;
    double a = 0.0;
};

/// Exact propagator of the interface ODE over one step when T_x(s, t) varies
/// linearly in time, g(t) = g0 + r (t - t_n). The forcing is appended to the
/// state so a single matrix exponential covers both orders:
///   second order  z = (s, v, g, r)
///   third order   z = (s, v, a, g, r)
class InterfacePropagator {
public:
    InterfacePropagator(const PhysicalParams& params, Order order, double dt)
        : order_(order)
    {
        const int n = dimension(order) + 2;
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        if (order == Order::Second) {
            const double eps = params.eps;
            m(0, 1) = 1.0;
            m(1, 1) = -1.0 / eps;
            m(1, 2) = -params.beta / eps;
            m(2, 3) = 1.0;
        } else {
            const double e1 = params.eps;
            const double e2 = *params.eps2;
            m(0, 1) = 1.0;
            m(1, 2) = 1.0;
            m(2, 1) = -1.0 / (e1 * e2);
            m(2, 2) = -(1.0 / e1 + 1.0 / e2);
            m(2, 3) = -params.beta / (e1 * e2);
            m(3, 4) = 1.0;
        }
        propagator_ = (m * dt).exp();
    }

    Interface advance(const Interface& from, double g0, double slope) const
    {
        const int n = static_cast<int>(propagator_.rows());
        Eigen::VectorXd z(n);
        if (order_ == Order::Second) {
            z << from.s, from.v, g0, slope;
        } else {
            z << from.s, from.v, from.a, g0, slope;
        }
        const Eigen::VectorXd out = propagator_ * z;
        Interface next;
        next.s = out(0);
        next.v = out(1);
        next.a = order_ == Order::Third ? out(2) : 0.0;
        return next;
    }

private:
    Order order_;
    Eigen::MatrixXd propagator_;
};

double right_gradient_xi(const std::vector<double>& u, int stencil)
{
    const std::size_t n = u.size() - 1;
    const double h = 1.0 / static_cast<double>(n);
    if (stencil == 3) {
        return (11.0 * u[n] - 18.0 * u[n - 1] + 9.0 * u[n - 2] - 2.0 * u[n - 3]) / (6.0 * h);
    }
    return (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * h);
}

double left_gradient_xi(const std::vector<double>& u, int stencil)
{
    const double h = 1.0 / static_cast<double>(u.size() - 1);
    if (stencil == 3) {
        return (-11.0 * u[0] + 18.0 * u[1] - 9.0 * u[2] + 2.0 * u[3]) / (6.0 * h);
    }
    return (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
}

/// Tridiagonal solve, arrays indexed 0..n-1; lower[0] and upper[n-1] unused.
void thomas(std::vector<double>& lower, std::vector<double>& diag, std::vector<double>& upper,
            std::vector<double>& rhs)
{
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
}

struct Level {
    ImmobilizedCoefficients coeff;
    double neumann_xi = 0.0; // u_xi(0) = -s qc / k
};

/// Spatial operator applied to u (u[nx] = 0 is the Dirichlet value), Neumann
/// condition folded in through the ghost value u[-1] = u[1] - 2 h u_xi(0).
std::vector<double> apply_operator(const std::vector<double>& u, const Level& lvl)
{
    const std::size_t n = u.size() - 1;
    const double h = 1.0 / static_cast<double>(n);
    const double d = lvl.coeff.diffusion / (h * h);
    std::vector<double> out(n, 0.0);
    out[0] = d * (2.0 * u[1] - 2.0 * u[0] - 2.0 * h * lvl.neumann_xi);
    for (std::size_t i = 1; i < n; ++i) {
        const double xi = static_cast<double>(i) * h;
        const double adv = lvl.coeff.advection(xi) / (2.0 * h);
        out[i] = d * (u[i + 1] - 2.0 * u[i] + u[i - 1]) + adv * (u[i + 1] - u[i - 1]);
    }
    return out;
}

/// (I - theta dt L_new) u_new = u_old + (1 - theta) dt L_old u_old  (+ Neumann terms).
std::vector<double> theta_solve(const std::vector<double>& u_old, const Level& old_lvl, const Level& new_lvl,
                                double dt, double theta)
{
    const std::size_t n = u_old.size() - 1;
    const double h = 1.0 / static_cast<double>(n);
    std::vector<double> rhs(u_old.begin(), u_old.end() - 1);
    if (theta < 1.0) {
        const std::vector<double> lu = apply_operator(u_old, old_lvl);
        for (std::size_t i = 0; i < n; ++i) {
            rhs[i] += (1.0 - theta) * dt * lu[i];
        }
    }
    std::vector<double> u_new(n + 1, 0.0);
    if (theta == 0.0) {
        std::copy(rhs.begin(), rhs.end(), u_new.begin());
        return u_new;
    }

    const double td = theta * dt;
    const double d = new_lvl.coeff.diffusion / (h * h);
    std::vector<double> lower(n, 0.0), diag(n, 0.0), upper(n, 0.0);
    diag[0] = 1.0 + td * 2.0 * d;
    upper[0] = -td * 2.0 * d;
    rhs[0] += td * d * (-2.0 * h * new_lvl.neumann_xi);
    for (std::size_t i = 1; i < n; ++i) {
        const double xi = static_cast<double>(i) * h;
        const double adv = new_lvl.coeff.advection(xi) / (2.0 * h);
        lower[i] = -td * (d - adv);
        diag[i] = 1.0 + td * 2.0 * d;
        upper[i] = -td * (d + adv);
    }
    thomas(lower, diag, upper, rhs);
    std::copy(rhs.begin(), rhs.end(), u_new.begin());
    return u_new;
}

bool all_finite(const std::vector<double>& v)
{
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void check_interface(const Interface& iface, const PhysicalParams& params, double t)
{
    if (!std::isfinite(iface.s) || !std::isfinite(iface.v) || !std::isfinite(iface.a)) {
        throw NumericalError("interface state became non-finite");
    }
    if (!(iface.s > 0.0 && iface.s < params.length)) {
        std::ostringstream os;
        os << "interface left (0, L): s = " << iface.s << " at t = " << t;
        throw DomainExit(os.str());
    }
}

SimState make_state(const std::vector<double>& u, const Interface& iface, double t, Order order,
                    const PhysicalParams& params)
{
    SimState st;
    st.t = t;
    st.temp.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        st.temp[i] = u[i] + params.t_melt;
    }
    st.temp.back() = params.t_melt;
    st.s = iface.s;
    st.s_dot = iface.v;
    if (order == Order::Third) {
        st.s_ddot = iface.a;
    }
    return st;
}

Level level_of(const SimState& st, double qc, const PhysicalParams& params)
{
    return {transform_pde(st, params), -st.s * qc / params.k_cond};
}

/// One step of length dt. theta = 1/2 is Crank-Nicolson with a predictor and
/// corrector passes; theta = 1 is backward Euler; theta = 0 is explicit Euler
/// with the interface forcing frozen at t_n.
SimState advance(const SimState& state, const FluxLaw& flux, const PhysicalParams& params, const SolverConfig& cfg,
                 Order order, double dt, double theta)
{
    if (state.nx() < cfg.flux_stencil + 1) {
        throw ValidationError("grid too coarse for the flux stencil");
    }
    const int nx = state.nx();
    if (theta == 0.0) {
        const double ratio = params.alpha * dt * (nx / state.s) * (nx / state.s);
        if (ratio > 0.5) {
            std::ostringstream os;
            os << "explicit scheme unstable: alpha dt (nx/s)^2 = " << ratio << " > 0.5";
            throw NumericalError(os.str());
        }
    }

    std::vector<double> u0(state.temp.size());
    for (std::size_t i = 0; i < u0.size(); ++i) {
        u0[i] = state.temp[i] - params.t_melt;
    }
    u0.back() = 0.0;

    const InterfacePropagator prop(params, order, dt);
    const Interface iface0{state.s, state.s_dot, state.s_ddot.value_or(0.0)};
    const double q0 = flux(state);
    if (!std::isfinite(q0)) {
        throw NumericalError("boundary flux is not finite");
    }
    const Level lvl0 = level_of(state, q0, params);
    const double g0 = right_gradient_xi(u0, cfg.flux_stencil) / state.s;
    const double t1 = state.t + dt;

    // Predictor: coefficients and forcing frozen at t_n.
    Interface iface1 = prop.advance(iface0, g0, 0.0);
    check_interface(iface1, params, t1);
    std::vector<double> u1 = theta_solve(u0, lvl0, lvl0, dt, theta);

    if (theta > 0.0) {
        for (int pass = 0; pass < cfg.corrector_passes; ++pass) {
            const SimState guess = make_state(u1, iface1, t1, order, params);
            const double q1 = flux(guess);
            if (!std::isfinite(q1)) {
                throw NumericalError("boundary flux is not finite");
            }
            u1 = theta_solve(u0, lvl0, level_of(guess, q1, params), dt, theta);
            const double g1 = right_gradient_xi(u1, cfg.flux_stencil) / iface1.s;
            iface1 = prop.advance(iface0, g0, (g1 - g0) / dt);
            check_interface(iface1, params, t1);
        }
    }

    if (!all_finite(u1)) {
        throw NumericalError("temperature became non-finite");
    }
    return make_state(u1, iface1, t1, order, params);
}

Record make_record(const SimState& st, const FluxLaw& flux, const PhysicalParams& params, int stencil)
{
    Record rec;
    rec.t = st.t;
    rec.s = st.s;
    rec.s_dot = st.s_dot;
    rec.s_ddot = st.s_ddot;
    rec.qc = flux(st);
    rec.t_boundary = st.temp.front();
    rec.t_min = *std::min_element(st.temp.begin(), st.temp.end());
    rec.tx_interface = boundary_flux_gradient(st, params, stencil).second;
    rec.surplus = surplus_integral(st, params);
    return rec;
}

} // namespace

const char* to_string(Termination termination)
{
    switch (termination) {
    case Termination::Completed:
        return "completed";
    case Termination::TemperatureBelowMelting:
        return "temperature_below_melting";
    case Termination::InterfaceLeftDomain:
        return "interface_left_domain";
    }
    return "completed";
}

ImmobilizedCoefficients transform_pde(const SimState& state, const PhysicalParams& params)
{
    if (!(state.s > 0.0)) {
        throw ValidationError("immobilization needs s > 0");
    }
    return {params.alpha / (state.s * state.s), state.s_dot / state.s};
}

std::pair<double, double> boundary_flux_gradient(const SimState& state, const PhysicalParams& params,
                                                 int stencil)
{
    if (stencil != 2 && stencil != 3) {
        throw ValidationError("flux stencil order must be 2 or 3");
    }
    if (state.nx() < stencil + 1) {
        throw ValidationError("grid too coarse for the flux stencil");
    }
    if (!(state.s > 0.0)) {
        throw ValidationError("gradient needs s > 0");
    }
    std::vector<double> u(state.temp.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] = state.temp[i] - params.t_melt;
    }
    return {left_gradient_xi(u, stencil) / state.s, right_gradient_xi(u, stencil) / state.s};
}

FluxLaw constant_flux(double qc)
{
    return [qc](const SimState&) { return qc; };
}

FluxLaw scheduled_flux(std::vector<std::pair<double, double>> schedule)
{
    if (schedule.empty()) {
        throw ValidationError("flux schedule is empty");
    }
    std::sort(schedule.begin(), schedule.end());
    return [table = std::move(schedule)](const SimState& st) {
        if (st.t <= table.front().first) {
            return table.front().second;
        }
        if (st.t >= table.back().first) {
            return table.back().second;
        }
        auto it = std::upper_bound(table.begin(), table.end(), st.t,
                                   [](double t, const auto& p) { return t < p.first; });
        const auto& hi = *it;
        const auto& lo = *(it - 1);
        const double w = (st.t - lo.first) / (hi.first - lo.first);
        return lo.second + w * (hi.second - lo.second);
    };
}

FluxLaw feedback_flux(const PhysicalParams& params, const ControlGains& gains)
{
    return [params, gains](const SimState& st) { return control(st, params, gains); };
}

SimState step(const SimState& state, const FluxLaw& flux, const PhysicalParams& params, const SolverConfig& cfg,
              Order order)
{
    const double theta = cfg.scheme == Scheme::CrankNicolson ? 0.5 : 0.0;
    try {
        return advance(state, flux, params, cfg, order, cfg.dt, theta);
    } catch (const DomainExit& e) {
        throw NumericalError(e.what());
    }
}

SimState step(const SimState& state, double qc, const PhysicalParams& params, const SolverConfig& cfg,
              Order order)
{
    return step(state, constant_flux(qc), params, cfg, order);
}

Trajectory simulate(const InitialData& data, const PhysicalParams& params, const SolverConfig& cfg, Order order,
                    const FluxLaw& flux, const RecordHook& hook)
{
    params.validate(order);
    if (cfg.nx < 16) {
        throw ValidationError("nx must be >= 16");
    }
    if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt) || !(cfg.t_final >= 0.0)) {
        throw ValidationError("dt must be > 0 and t_final >= 0");
    }

    Trajectory traj;
    traj.order = order;
    traj.nx = cfg.nx;
    traj.dt = cfg.dt;

    const auto full_steps = static_cast<long>(std::floor(cfg.t_final / cfg.dt + 1e-9));
    const double remainder = cfg.t_final - static_cast<double>(full_steps) * cfg.dt;
    const long total_steps = full_steps + (remainder > 1e-9 * cfg.dt ? 1 : 0);
    const long decimation = std::max(1L, static_cast<long>(std::floor(0.1 / cfg.dt)));
    traj.records.reserve(static_cast<std::size_t>(total_steps) + 1);

    SimState state = initial_state(data, params, cfg.nx, order);
    auto push = [&](const SimState& st, long index) {
        Record rec = make_record(st, flux, params, cfg.flux_stencil);
        if (hook) {
            hook(st, rec);
        }
        traj.records.push_back(rec);
        if (index % decimation == 0 || index == total_steps) {
            traj.snapshots.push_back({traj.records.size() - 1, st.temp});
        }
    };
    push(state, 0);

    const double theta = cfg.scheme == Scheme::CrankNicolson ? 0.5 : 0.0;
    for (long n = 0; n < total_steps; ++n) {
        const double h = n < full_steps ? cfg.dt : remainder;
        try {
            if (n == 0 && theta > 0.0 && cfg.startup_mesh_ratio > 0.0) {
                const double ratio = params.alpha * h * (cfg.nx / state.s) * (cfg.nx / state.s);
                const int substeps = std::max(1, static_cast<int>(std::ceil(ratio / cfg.startup_mesh_ratio)));
                SimState sub = state;
                for (int k = 0; k < substeps; ++k) {
                    sub = advance(sub, flux, params, cfg, order, h / substeps, theta);
                }
                sub.t = state.t + h;
                state = std::move(sub);
            } else {
                state = advance(state, flux, params, cfg, order, h, theta);
            }
        } catch (const DomainExit& e) {
            traj.termination = Termination::InterfaceLeftDomain;
            traj.diagnostic = e.what();
            traj.violation_time = state.t + h;
            break;
        }
        push(state, n + 1);
        if (traj.records.back().t_min < params.t_melt - cfg.tol.temp) {
            std::ostringstream os;
            os << "temperature fell below melting: min T - Tm = " << traj.records.back().t_min - params.t_melt
               << " at t = " << state.t;
            traj.termination = Termination::TemperatureBelowMelting;
            traj.diagnostic = os.str();
            traj.violation_time = state.t;
            break;
        }
    }
    return traj;
}

Trajectory simulate(const InitialData& data, const PhysicalParams& params, const ControlGains& gains,
                    const SolverConfig& cfg, Order order, const ControllerMode& mode, const RecordHook& hook)
{
    if (std::holds_alternative<ClosedLoop>(mode)) {
        if (gains.order() != order) {
            throw ValidationError("gain vector does not match the interface order");
        }
        return simulate(data, params, cfg, order, feedback_flux(params, gains), hook);
    }
    return simulate(data, params, cfg, order, scheduled_flux(std::get<OpenLoop>(mode).schedule), hook);
}

double stored_energy(const Record& record, const PhysicalParams& params, Order order)
{
    double interface = record.s;
    if (order == Order::Second) {
        interface += params.eps * record.s_dot;
    } else {
        const double e1 = params.eps;
        const double e2 = params.eps2.value_or(0.0);
        interface += (e1 + e2) * record.s_dot + e1 * e2 * record.s_ddot.value_or(0.0);
    }
    return params.k_cond / params.alpha * record.surplus + params.k_cond / params.beta * interface;
}

EnergyBalance energy_balance(const Trajectory& trajectory, const PhysicalParams& params)
{
    EnergyBalance out;
    const auto& rec = trajectory.records;
    const double ka = params.k_cond / params.alpha;
    const double kb = params.k_cond / params.beta;
    double e1 = params.eps;
    double e2 = params.eps2.value_or(0.0);
    for (std::size_t n = 0; n + 1 < rec.size(); ++n) {
        const Record& a = rec[n];
        const Record& b = rec[n + 1];
        double d_iface = (b.s - a.s);
        if (trajectory.order == Order::Second) {
            d_iface += e1 * (b.s_dot - a.s_dot);
        } else {
            d_iface += (e1 + e2) * (b.s_dot - a.s_dot) +
                       e1 * e2 * (b.s_ddot.value_or(0.0) - a.s_ddot.value_or(0.0));
        }
        const double d_energy = ka * (b.surplus - a.surplus) + kb * d_iface;
        const double supplied = 0.5 * (a.qc + b.qc) * (b.t - a.t);
        const double r = d_energy - supplied;
        out.t.push_back(b.t);
        out.residual.push_back(r);
        out.max_abs = std::max(out.max_abs, std::abs(r));
        out.sum_abs += std::abs(r);
    }
    return out;
}

} // namespace stefan
