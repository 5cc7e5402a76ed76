#include "stefan/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stefan {

namespace {

void require_positive(double value, const char* name)
{
    if (!std::isfinite(value) || value <= 0.0) {
        std::ostringstream os;
        os << name << " must be finite and > 0, got " << value;
        throw ValidationError(os.str());
    }
}

void require_finite(double value, const char* name)
{
    if (!std::isfinite(value)) {
        std::ostringstream os;
        os << name << " must be finite, got " << value;
        throw ValidationError(os.str());
    }
}

double interpolate(const TabulatedProfile& table, double x)
{
    const auto& pts = table.samples;
    if (x <= pts.front().first) {
        return pts.front().second;
    }
    if (x >= pts.back().first) {
        return pts.back().second;
    }
    auto it = std::upper_bound(pts.begin(), pts.end(), x,
                               [](double v, const auto& p) { return v < p.first; });
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double w = (x - lo.first) / (hi.first - lo.first);
    return lo.second + w * (hi.second - lo.second);
}

} // namespace

void PhysicalParams::validate(Order order) const
{
    require_positive(alpha, "alpha");
    require_positive(beta, "beta");
    require_positive(k_cond, "k_cond");
    require_finite(t_melt, "t_melt");
    require_positive(length, "length");
    require_positive(eps, order == Order::Third ? "eps1" : "eps");
    if (order == Order::Third) {
        if (!eps2) {
            throw ValidationError("third-order dynamics need eps2");
        }
        require_positive(*eps2, "eps2");
    } else if (eps2) {
        throw ValidationError("second-order dynamics take a single relaxation time; eps2 must be absent");
    }
}

double InitialData::temperature(double x, const PhysicalParams& params) const
{
    if (const auto* lin = std::get_if<LinearProfile>(&profile)) {
        return params.t_melt + lin->surplus * (1.0 - x / s0);
    }
    return interpolate(std::get<TabulatedProfile>(profile), x);
}

double InitialData::surplus_integral(const PhysicalParams& params) const
{
    if (const auto* lin = std::get_if<LinearProfile>(&profile)) {
        return 0.5 * lin->surplus * s0;
    }
    const auto& pts = std::get<TabulatedProfile>(profile).samples;
    double acc = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double h = pts[i].first - pts[i - 1].first;
        acc += 0.5 * h * ((pts[i].second - params.t_melt) + (pts[i - 1].second - params.t_melt));
    }
    return acc;
}

TabulatedProfile tabulate(const LinearProfile& profile, double s0, double t_melt, int samples)
{
    if (samples < 2) {
        throw ValidationError("tabulated profile needs at least two samples");
    }
    TabulatedProfile table;
    table.samples.reserve(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) {
        const double x = i == samples - 1 ? s0 : s0 * i / (samples - 1);
        table.samples.emplace_back(x, t_melt + profile.surplus * (1.0 - x / s0));
    }
    return table;
}

ValidationReport validate_initial(const InitialData& data, const PhysicalParams& params, Order order,
                                  const Tolerances& tol)
{
    params.validate(order);
    require_finite(data.s0, "s0");
    require_finite(data.v0, "v0");
    if (data.a0) {
        require_finite(*data.a0, "a0");
    }

    ValidationReport report;
    auto violate = [&](const char* assumption, std::string detail, double value) {
        report.violations.push_back({assumption, std::move(detail), value});
    };

    if (!(data.s0 > 0.0 && data.s0 < params.length)) {
        violate("Assumption 1", "interface must satisfy 0 < s0 < L", data.s0);
    }

    if (const auto* lin = std::get_if<LinearProfile>(&data.profile)) {
        require_finite(lin->surplus, "surplus");
        if (lin->surplus < 0.0) {
            violate("Assumption 1", "initial temperature below melting (negative surplus)", lin->surplus);
        }
    } else {
        const auto& pts = std::get<TabulatedProfile>(data.profile).samples;
        if (pts.empty()) {
            throw ValidationError("initial temperature profile is empty");
        }
        for (const auto& [x, temp] : pts) {
            require_finite(x, "profile x");
            require_finite(temp, "profile temperature");
        }
        for (std::size_t i = 1; i < pts.size(); ++i) {
            if (!(pts[i].first > pts[i - 1].first)) {
                throw ValidationError("profile samples must be strictly increasing in x");
            }
        }
        const double span_tol = 1e-12 * std::max(1.0, std::abs(data.s0));
        if (std::abs(pts.front().first) > span_tol || std::abs(pts.back().first - data.s0) > span_tol) {
            throw ValidationError("profile samples must cover exactly [0, s0]");
        }
        for (const auto& [x, temp] : pts) {
            if (temp < params.t_melt - tol.bc) {
                violate("Assumption 1", "initial temperature below melting at x = " + std::to_string(x),
                        temp - params.t_melt);
                break;
            }
        }
        const double mismatch = pts.back().second - params.t_melt;
        if (std::abs(mismatch) > tol.bc) {
            violate("Assumption 1", "boundary compatibility T0(s0) = Tm", mismatch);
        }
    }

    if (data.v0 < 0.0) {
        violate("Assumption 2", "initial interface velocity must be >= 0", data.v0);
    }

    if (order == Order::Third) {
        if (!data.a0) {
            violate("Assumption 5", "third-order run needs an initial acceleration a0", 0.0);
        } else if (*data.a0 < -data.v0 / params.eps) {
            violate("Assumption 5", "a0 must be >= -v0 / eps1", *data.a0);
        }
    }
    return report;
}

double min_setpoint_2nd(const InitialData& data, const PhysicalParams& params)
{
    return data.s0 + params.eps * data.v0 + params.beta / params.alpha * data.surplus_integral(params);
}

double relaxation_value(const PhysicalParams& params, SetpointRelaxation relaxation)
{
    switch (relaxation) {
    case SetpointRelaxation::Eps1:
        return params.eps;
    case SetpointRelaxation::Eps2:
        return params.eps2.value_or(params.eps);
    case SetpointRelaxation::Sum:
        return params.eps + params.eps2.value_or(0.0);
    }
    return params.eps;
}

double min_setpoint_3rd(const InitialData& data, const PhysicalParams& params, double c1, double c2,
                        SetpointRelaxation relaxation)
{
    if (!(c1 > 0.0 && c1 <= c2)) {
        throw ValidationError("third-order setpoint bound needs 0 < c1 <= c2");
    }
    const double eps = relaxation_value(params, relaxation);
    return data.s0 +
           c2 / c1 * (eps * data.v0 + params.beta / params.alpha * data.surplus_integral(params));
}

double trapezoid(std::span<const double> values, double spacing)
{
    if (values.size() < 2) {
        return 0.0;
    }
    double acc = 0.5 * (values.front() + values.back());
    for (std::size_t i = 1; i + 1 < values.size(); ++i) {
        acc += values[i];
    }
    return acc * spacing;
}

std::vector<double> SimState::xi_grid() const
{
    std::vector<double> grid(temp.size());
    for (int i = 0; i <= nx(); ++i) {
        grid[static_cast<std::size_t>(i)] = xi(i);
    }
    return grid;
}

SimState initial_state(const InitialData& data, const PhysicalParams& params, int nx, Order order)
{
    if (nx < 2) {
        throw ValidationError("grid needs at least two cells");
    }
    SimState state;
    state.s = data.s0;
    state.s_dot = data.v0;
    if (order == Order::Third) {
        state.s_ddot = data.a0.value_or(0.0);
    }
    state.temp.resize(static_cast<std::size_t>(nx) + 1);
    for (int i = 0; i <= nx; ++i) {
        state.temp[static_cast<std::size_t>(i)] = data.temperature(data.s0 * i / nx, params);
    }
    state.temp.back() = params.t_melt;
    return state;
}

double surplus_integral(const SimState& state, const PhysicalParams& params)
{
    const std::size_t n = state.temp.size();
    if (n < 2) {
        return 0.0;
    }
    double acc = 0.5 * ((state.temp.front() - params.t_melt) + (state.temp.back() - params.t_melt));
    for (std::size_t i = 1; i + 1 < n; ++i) {
        acc += state.temp[i] - params.t_melt;
    }
    return acc * state.dx();
}

ReferenceError reference_error(const SimState& state, const PhysicalParams& params, double setpoint)
{
    ReferenceError err;
    err.u.reserve(state.temp.size());
    for (double temp : state.temp) {
        err.u.push_back(temp - params.t_melt);
    }
    err.X.resize(state.s_ddot ? 3 : 2);
    err.X(0) = state.s - setpoint;
    err.X(1) = state.s_dot;
    if (state.s_ddot) {
        err.X(2) = *state.s_ddot;
    }
    return err;
}

} // namespace stefan
