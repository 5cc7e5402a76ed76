#include "stefan/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stefan {

namespace {

constexpr double tie_margin = 1e-12;
constexpr double inf = std::numeric_limits<double>::infinity();

bool is_tie(double lhs, double rhs)
{
    if (!std::isfinite(lhs) || !std::isfinite(rhs)) {
        return lhs == rhs;
    }
    return std::abs(lhs - rhs) <= tie_margin * std::max(std::abs(lhs), std::abs(rhs));
}

Verdict worst(Verdict a, Verdict b)
{
    return static_cast<int>(a) > static_cast<int>(b) ? a : b;
}

void require_finite_state(const SimState& state)
{
    bool finite = std::isfinite(state.s) && std::isfinite(state.s_dot) &&
                  (!state.s_ddot || std::isfinite(*state.s_ddot));
    for (double temp : state.temp) {
        finite = finite && std::isfinite(temp);
    }
    if (!finite) {
        throw NumericalError("control law evaluated on a non-finite state");
    }
}

} // namespace

Eigen::VectorXd ControlGains::gain_vector(const PhysicalParams& params) const
{
    if (c3) {
        const double e1 = params.eps;
        const double e2 = params.eps2.value_or(0.0);
        Eigen::VectorXd k(3);
        k << c1, (e1 + e2) * c2, e1 * e2 * *c3;
        return k / params.beta;
    }
    Eigen::VectorXd k(2);
    k << c1, params.eps * c2;
    return k / params.beta;
}

SystemMatrices system_matrices(const PhysicalParams& params, Order order)
{
    SystemMatrices sys;
    if (order == Order::Second) {
        sys.A.resize(2, 2);
        sys.A << 0.0, 1.0, 0.0, -1.0 / params.eps;
        sys.B.resize(2);
        sys.B << 0.0, -params.beta / params.eps;
        return sys;
    }
    const double e1 = params.eps;
    const double e2 = params.eps2.value_or(0.0);
    sys.A.resize(3, 3);
    sys.A << 0.0, 1.0, 0.0,
             0.0, 0.0, 1.0,
             0.0, -1.0 / (e1 * e2), -(1.0 / e1 + 1.0 / e2);
    sys.B.resize(3);
    sys.B << 0.0, 0.0, -params.beta / (e1 * e2);
    return sys;
}

Eigen::MatrixXd closed_loop_matrix(const PhysicalParams& params, const ControlGains& gains)
{
    const SystemMatrices sys = system_matrices(params, gains.order());
    return sys.A + sys.B * gains.gain_vector(params).transpose();
}

bool is_hurwitz(const Eigen::MatrixXd& m)
{
    const Eigen::VectorXcd eig = m.eigenvalues();
    return (eig.real().array() < 0.0).all();
}

Eigen::VectorXd kernel_phi(double x, const ControlGains& gains, const PhysicalParams& params)
{
    return gains.gain_vector(params) * x;
}

double kernel_k(double x, const ControlGains& gains, const PhysicalParams& params)
{
    const SystemMatrices sys = system_matrices(params, gains.order());
    return -kernel_phi(x, gains, params).dot(sys.B) / params.alpha;
}

double control_2nd(const SimState& state, const PhysicalParams& params, const ControlGains& gains)
{
    require_finite_state(state);
    const double energy = surplus_integral(state, params);
    return -params.k_cond * gains.c2 / params.alpha * energy -
           params.k_cond / params.beta *
               (gains.c1 * (state.s - gains.setpoint) + gains.c2 * params.eps * state.s_dot);
}

double control_3rd(const SimState& state, const PhysicalParams& params, const ControlGains& gains)
{
    if (!state.s_ddot) {
        throw ValidationError("third-order control law needs the interface acceleration");
    }
    if (!gains.c3) {
        throw ValidationError("third-order control law needs c3");
    }
    require_finite_state(state);
    const double e1 = params.eps;
    const double e2 = params.eps2.value_or(0.0);
    const double c3 = *gains.c3;
    const double energy = surplus_integral(state, params);
    return -params.k_cond * c3 / params.alpha * energy -
           params.k_cond / params.beta *
               (gains.c1 * (state.s - gains.setpoint) + gains.c2 * (e1 + e2) * state.s_dot +
                c3 * e1 * e2 * *state.s_ddot);
}

double control(const SimState& state, const PhysicalParams& params, const ControlGains& gains)
{
    return gains.order() == Order::Third ? control_3rd(state, params, gains)
                                         : control_2nd(state, params, gains);
}

const char* to_string(Verdict verdict)
{
    switch (verdict) {
    case Verdict::Satisfied:
        return "satisfied";
    case Verdict::Boundary:
        return "boundary";
    case Verdict::Violated:
        return "violated";
    }
    return "violated";
}

Verdict check_strict_less(double lhs, double rhs)
{
    if (is_tie(lhs, rhs)) {
        return Verdict::Boundary;
    }
    return lhs < rhs ? Verdict::Satisfied : Verdict::Violated;
}

Verdict check_less_equal(double lhs, double rhs)
{
    if (is_tie(lhs, rhs)) {
        return Verdict::Satisfied;
    }
    return lhs < rhs ? Verdict::Satisfied : Verdict::Violated;
}

GainReport2 check_gains_2nd(const ControlGains& gains, const InitialData& data, const PhysicalParams& params)
{
    GainReport2 report;
    report.min_setpoint = min_setpoint_2nd(data, params);
    report.assumption3_ok = check_strict_less(report.min_setpoint, gains.setpoint) == Verdict::Satisfied;
    report.hurwitz = is_hurwitz(closed_loop_matrix(params, gains));
    if (!report.assumption3_ok) {
        return report;
    }

    const double sr = gains.setpoint;
    const double lo = report.min_setpoint;
    const double headroom = lo - data.s0;
    const double ratio = headroom > 0.0 ? (sr - lo) / headroom : inf;

    report.safety_upper = gains.c1 * (1.0 + ratio);
    Verdict a4 = gains.c1 > 0.0 ? Verdict::Satisfied : Verdict::Violated;
    a4 = worst(a4, check_less_equal(gains.c1, gains.c2));
    a4 = worst(a4, check_strict_less(gains.c2, *report.safety_upper));
    report.assumption4 = a4;
    report.assumption4_ok = a4 == Verdict::Satisfied;

    const double alpha_eps = params.alpha * params.eps;
    report.small_setpoint_branch = 12.0 * sr * sr <= alpha_eps;
    report.c2_bar = gains.c1 * ratio;
    if (report.small_setpoint_branch) {
        report.stability_upper = gains.c1 + *report.c2_bar;
    } else {
        const double second = (alpha_eps * gains.c1 + params.alpha) / (12.0 * sr * sr - alpha_eps);
        report.c2_barbar = std::min(*report.c2_bar, second);
        report.stability_upper = gains.c1 + *report.c2_barbar;
    }
    Verdict thm = gains.c1 > 0.0 ? Verdict::Satisfied : Verdict::Violated;
    thm = worst(thm, check_less_equal(gains.c1, gains.c2));
    thm = worst(thm, check_strict_less(gains.c2, *report.stability_upper));
    report.theorem_cond = thm;
    report.theorem_cond_ok = thm == Verdict::Satisfied;
    return report;
}

GainReport3 check_gains_3rd(const ControlGains& gains, const InitialData& data, const PhysicalParams& params,
                            SetpointRelaxation relaxation)
{
    if (!data.a0) {
        throw ValidationError("third-order gain check needs a0");
    }
    if (!gains.c3) {
        throw ValidationError("third-order gain check needs c3");
    }
    const double e1 = params.eps;
    const double e2 = params.eps2.value_or(0.0);
    const double c1 = gains.c1;
    const double c2 = gains.c2;
    const double c3 = *gains.c3;

    GainReport3 report;
    report.relaxation = relaxation;
    report.hurwitz = is_hurwitz(closed_loop_matrix(params, gains));
    report.assumption6 = c1 > 0.0 ? check_less_equal(c1, c2) : Verdict::Violated;
    if (report.assumption6 != Verdict::Satisfied) {
        return report;
    }

    report.min_setpoint = min_setpoint_3rd(data, params, c1, c2, relaxation);
    report.assumption7 = check_strict_less(*report.min_setpoint, gains.setpoint);

    report.ratio_term = e1 / e2 * (c2 - c1);
    report.ratio_term2 = e2 / e1 * c2;
    const double denom = e1 * e2 * *data.a0 + params.beta / params.alpha * data.surplus_integral(params);
    if (denom != 0.0) {
        report.c3_bar = c1 * (gains.setpoint - *report.min_setpoint) / denom;
    }
    double room = std::min(report.ratio_term, report.ratio_term2);
    if (report.c3_bar) {
        room = std::min(room, *report.c3_bar);
    }
    report.c3_lower = c2;
    report.c3_upper = c2 + room;
    report.assumption8 = worst(check_less_equal(c2, c3), check_less_equal(c3, *report.c3_upper));
    return report;
}

ResidualSeries qc_ode_residual(const Trajectory& trajectory, const ControlGains& gains,
                                const PhysicalParams& params, double t_from)
{
    const auto& rec = trajectory.records;
    if (rec.size() < 3) {
        throw ValidationError("flux residual needs at least three records");
    }
    const double dt = trajectory.dt;
    const double coupling = params.k_cond / params.beta * (gains.c2 - gains.c1);
    auto uniform = [&](std::size_t a, std::size_t b) {
        return std::abs((rec[b].t - rec[a].t) - dt) <= 1e-9 * dt;
    };

    ResidualSeries out;
    double sum_sq = 0.0;
    for (std::size_t n = 1; n + 1 < rec.size(); ++n) {
        if (rec[n - 1].t < t_from || !uniform(n - 1, n) || !uniform(n, n + 1)) {
            continue;
        }
        const double qdot = (rec[n + 1].qc - rec[n - 1].qc) / (2.0 * dt);
        const double r = qdot - (-gains.c2 * rec[n].qc + coupling * rec[n].s_dot);
        out.t.push_back(rec[n].t);
        out.residual.push_back(r);
        out.max_abs = std::max(out.max_abs, std::abs(r));
        sum_sq += r * r;
    }
    if (!out.residual.empty()) {
        out.rms = std::sqrt(sum_sq / static_cast<double>(out.residual.size()));
    }
    return out;
}

} // namespace stefan
