#include "stefan/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace stefan {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

/// S built from the closed forms: (c1 - c2)^2 / beta^2 e2 e2^T for second
/// order, blockdiag(0, Gamma) / beta^2 for third order.
Eigen::MatrixXd coupling_matrix(const ControlGains& gains, const PhysicalParams& params)
{
    const double b2 = params.beta * params.beta;
    if (gains.order() == Order::Second) {
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2, 2);
        s(1, 1) = (gains.c1 - gains.c2) * (gains.c1 - gains.c2) / b2;
        return s;
    }
    const double g1 = *gains.c3 - gains.c1;
    const double g2 = (params.eps + params.eps2.value_or(0.0)) * (*gains.c3 - gains.c2);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3, 3);
    s(1, 1) = g1 * g1 / b2;
    s(1, 2) = g1 * g2 / b2;
    s(2, 1) = g1 * g2 / b2;
    s(2, 2) = g2 * g2 / b2;
    return s;
}

double residual_max_eig(const Eigen::MatrixXd& p, const Eigen::MatrixXd& m, const Eigen::MatrixXd& q)
{
    Eigen::MatrixXd r = p * m + m.transpose() * p + q;
    r = 0.5 * (r + r.transpose());
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(r).eigenvalues().maxCoeff();
}

double min_eig(const Eigen::MatrixXd& m)
{
    const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym).eigenvalues().minCoeff();
}

void finish_lyapunov(LyapunovCert& cert, const Eigen::MatrixXd& m)
{
    cert.residual_max_eig = residual_max_eig(cert.P, m, cert.Q);
    const double scale = 1.0 + cert.Q.norm();
    cert.lyap_ineq_ok = cert.residual_max_eig <= 1e-10 * scale && min_eig(cert.P) > 0.0;
}

std::vector<double> u_of(const SimState& state, const PhysicalParams& params)
{
    std::vector<double> u(state.temp.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] = state.temp[i] - params.t_melt;
    }
    return u;
}

ResidualSeries summarize(std::vector<double> t, std::vector<double> r)
{
    ResidualSeries out;
    double sum_sq = 0.0;
    for (double v : r) {
        out.max_abs = std::max(out.max_abs, std::abs(v));
        sum_sq += v * v;
    }
    if (!r.empty()) {
        out.rms = std::sqrt(sum_sq / static_cast<double>(r.size()));
    }
    out.t = std::move(t);
    out.residual = std::move(r);
    return out;
}

} // namespace

TransformedState backstepping_transform(const SimState& state, const ControlGains& gains,
                                        const PhysicalParams& params, int stencil)
{
    const int n = state.nx();
    const double dx = state.dx();
    const std::vector<double> u = u_of(state, params);
    const Eigen::VectorXd K = gains.gain_vector(params);
    const double slope = kernel_k(1.0, gains, params); // k(z) = slope * z

    TransformedState out;
    out.s = state.s;
    out.X = reference_error(state, params, gains.setpoint).X;
    if (out.X.size() != K.size()) {
        throw ValidationError("state and gains have different orders");
    }
    const double kx = K.dot(out.X);
    const auto [ux0, uxs] = boundary_flux_gradient(state, params, stencil);

    const auto size = static_cast<std::size_t>(n) + 1;
    out.x.resize(size);
    out.w.resize(size);
    out.w_x.resize(size);

    // Right-to-left trapezoid sums of u and y u over [x_i, s].
    double i0 = 0.0;
    double i1 = 0.0;
    for (int i = n; i >= 0; --i) {
        const auto ii = static_cast<std::size_t>(i);
        const double x = i == n ? state.s : i * dx;
        if (i < n) {
            const double xr = (i + 1 == n) ? state.s : (i + 1) * dx;
            i0 += 0.5 * dx * (u[ii] + u[ii + 1]);
            i1 += 0.5 * dx * (x * u[ii] + xr * u[ii + 1]);
        }
        double ux = 0.0;
        if (i == 0) {
            ux = ux0;
        } else if (i == n) {
            ux = uxs;
        } else {
            ux = (u[ii + 1] - u[ii - 1]) / (2.0 * dx);
        }
        out.x[ii] = x;
        out.w[ii] = u[ii] - slope * (x * i0 - i1) - (x - state.s) * kx;
        out.w_x[ii] = ux - slope * i0 - kx;
    }
    return out;
}

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& m, const Eigen::MatrixXd& q)
{
    const auto n = m.rows();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    // vec(M^T P + P M) = (I kron M^T + M^T kron I) vec(P)
    Eigen::MatrixXd op = Eigen::MatrixXd::Zero(n * n, n * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            op.block(i * n, j * n, n, n) += id(i, j) * m.transpose();
            op.block(i * n, j * n, n, n) += m(j, i) * id;
        }
    }
    const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(q.data(), n * n);
    const Eigen::VectorXd vec = op.fullPivLu().solve(rhs);
    Eigen::MatrixXd p = Eigen::Map<const Eigen::MatrixXd>(vec.data(), n, n);
    return 0.5 * (p + p.transpose());
}

LyapunovCert solve_P_weights(const ControlGains& gains, const PhysicalParams& params, double lambda1,
                             double lambda2)
{
    if (gains.order() != Order::Second) {
        throw ValidationError("closed-form P is for second-order dynamics");
    }
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) {
        throw ValidationError("Q weights must be >= 0");
    }
    const double d1 = gains.c1 / params.eps;
    const double d2 = 1.0 / params.eps + gains.c2;
    if (d1 == 0.0 || d2 == 0.0) {
        throw ValidationError("degenerate gains: d1 or d2 is zero");
    }
    const double l1 = lambda1;
    const double l2 = lambda2;

    LyapunovCert cert;
    cert.order = Order::Second;
    cert.lambda1 = lambda1;
    cert.kappa = {lambda1 > 0.0 ? lambda2 / lambda1 : std::numeric_limits<double>::infinity()};
    cert.Q = Eigen::MatrixXd::Zero(2, 2);
    cert.Q(0, 0) = l1;
    cert.Q(1, 1) = l2;
    cert.P.resize(2, 2);
    cert.P(0, 0) = 0.5 * (l1 / d2 + d1 * l2 / d2 + d2 * l1 / d1);
    cert.P(0, 1) = 0.5 * l1 / d1;
    cert.P(1, 0) = cert.P(0, 1);
    cert.P(1, 1) = 0.5 * (l1 / (d1 * d2) + l2 / d2);
    finish_lyapunov(cert, closed_loop_matrix(params, gains));
    return cert;
}

LyapunovCert solve_P(const ControlGains& gains, const PhysicalParams& params, double lambda1, double kappa2)
{
    if (!(kappa2 >= 0.0)) {
        throw ValidationError("kappa2 must be >= 0");
    }
    LyapunovCert cert = solve_P_weights(gains, params, lambda1, kappa2 * lambda1);
    cert.kappa = {kappa2};
    return cert;
}

double lambda_pd_lhs(double d1, double d2, double kappa2)
{
    if (kappa2 == inf) {
        return d2 * d2;
    }
    return d1 * d1 * d2 * d2 / ((d2 * d2 + 2.0 * d1) / kappa2 + 1.0 / (kappa2 * kappa2) + d1 * d1);
}

double lambda_pd_rhs(const ControlGains& gains, const PhysicalParams& params)
{
    const double sr = gains.setpoint;
    const double gap = gains.c1 - gains.c2;
    return 144.0 * std::pow(sr, 4) * gap * gap / (params.alpha * params.alpha * params.eps * params.eps);
}

void lambda_certificate(LyapunovCert& cert, const ControlGains& gains, const PhysicalParams& params)
{
    const double sr = gains.setpoint;
    const SystemMatrices sys = system_matrices(params, gains.order());
    const Eigen::VectorXd pb = cert.P * sys.B;

    if (cert.Q.diagonal().isZero(0.0)) {
        throw ValidationError("Lambda needs a non-zero Q");
    }
    // |Q^{-1/2} P B|^2 with zero diagonal entries of Q treated as a
    // pseudo-inverse; they must then meet a zero component of P B.
    double weighted = 0.0;
    for (Eigen::Index i = 0; i < pb.size(); ++i) {
        const double qi = cert.Q(i, i);
        if (qi == 0.0) {
            if (pb(i) != 0.0) {
                throw ValidationError("singular Q: zero weight on a non-zero component of P B");
            }
            continue;
        }
        weighted += pb(i) * pb(i) / qi;
    }

    cert.S = coupling_matrix(gains, params);
    cert.Lambda = params.alpha / (64.0 * sr * weighted) * cert.Q - 9.0 * std::pow(sr, 3) / params.alpha * cert.S;
    cert.lambda_min_eig = min_eig(cert.Lambda);
    cert.lambda_pd_ok = cert.lambda_min_eig > 0.0;

    if (gains.order() == Order::Second) {
        const double d1 = gains.c1 / params.eps;
        const double d2 = 1.0 / params.eps + gains.c2;
        cert.pd_lhs = lambda_pd_lhs(d1, d2, cert.kappa.empty() ? 0.0 : cert.kappa.front());
        cert.pd_rhs = lambda_pd_rhs(gains, params);
        cert.limit_test = d2 * d2 > *cert.pd_rhs;
    } else {
        cert.sufficient_case = gains.c1 == gains.c2 && gains.c2 == *gains.c3;
    }
}

const std::vector<double>& kappa_grid()
{
    static const std::vector<double> grid{1.0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8};
    return grid;
}

LyapunovCert certify(const ControlGains& gains, const PhysicalParams& params)
{
    std::optional<LyapunovCert> best;
    auto consider = [&](LyapunovCert cand) {
        lambda_certificate(cand, gains, params);
        if (!best || cand.lambda_min_eig > best->lambda_min_eig) {
            best = std::move(cand);
        }
    };

    if (gains.order() == Order::Second) {
        for (double kappa : kappa_grid()) {
            consider(solve_P(gains, params, 1.0, kappa));
        }
        return *best;
    }

    const Eigen::MatrixXd m = closed_loop_matrix(params, gains);
    for (double k2 : kappa_grid()) {
        for (double k3 : kappa_grid()) {
            LyapunovCert cert;
            cert.order = Order::Third;
            cert.lambda1 = 1.0;
            cert.kappa = {k2, k3};
            cert.Q = Eigen::Vector3d(1.0, k2, k3).asDiagonal();
            cert.P = solve_lyapunov(m, cert.Q);
            finish_lyapunov(cert, m);
            consider(std::move(cert));
        }
    }
    return *best;
}

LyapunovValues lyapunov_values(const TransformedState& transformed, const LyapunovCert& cert, double setpoint)
{
    const std::size_t n = transformed.w.size();
    std::vector<double> w2(n);
    std::vector<double> wx2(n);
    for (std::size_t i = 0; i < n; ++i) {
        w2[i] = transformed.w[i] * transformed.w[i];
        wx2[i] = transformed.w_x[i] * transformed.w_x[i];
    }
    const double dx = transformed.s / static_cast<double>(n - 1);
    const double norm_w = trapezoid(w2, dx);
    const double norm_wx = trapezoid(wx2, dx);
    const Eigen::VectorXd& X = transformed.X;

    LyapunovValues out;
    out.V = 3.0 / (4.0 * setpoint * setpoint) * norm_w + 0.5 * norm_wx + X.dot(cert.P * X);
    out.Phi = norm_w + norm_wx + X.squaredNorm();
    return out;
}

RecordHook lyapunov_hook(const PhysicalParams& params, const ControlGains& gains, const LyapunovCert& cert,
                         int stencil, TransformDiagnostics* diagnostics)
{
    return [params, gains, cert, stencil, diagnostics](const SimState& st, Record& rec) {
        const TransformedState ts = backstepping_transform(st, gains, params, stencil);
        const LyapunovValues lv = lyapunov_values(ts, cert, gains.setpoint);
        rec.lyapunov_v = lv.V;
        rec.phi = lv.Phi;
        if (diagnostics) {
            double max_u = 0.0;
            for (double temp : st.temp) {
                max_u = std::max(max_u, std::abs(temp - params.t_melt));
            }
            diagnostics->t.push_back(st.t);
            diagnostics->w_interface.push_back(ts.w.back());
            diagnostics->wx_origin.push_back(ts.w_x.front());
            diagnostics->max_u.push_back(max_u);
        }
    };
}

CbfValues cbf_chain(const SimState& state, const PhysicalParams& params)
{
    if (!state.s_ddot) {
        throw ValidationError("barrier chain needs the interface acceleration");
    }
    if (!(params.eps > 0.0)) {
        throw ValidationError("barrier chain needs eps1 > 0");
    }
    return {state.s_dot, params.eps * *state.s_ddot + state.s_dot};
}

ResidualSeries cbf_residual(const Trajectory& trajectory, const PhysicalParams& params)
{
    if (trajectory.order != Order::Third) {
        throw ValidationError("barrier residual is defined for third-order runs");
    }
    const auto& rec = trajectory.records;
    if (rec.size() < 3) {
        throw ValidationError("barrier residual needs at least three records");
    }
    const double e1 = params.eps;
    const double e2 = params.eps2.value_or(0.0);
    auto h2 = [&](const Record& r) { return e1 * r.s_ddot.value_or(0.0) + r.s_dot; };
    std::vector<double> t;
    std::vector<double> res;
    for (std::size_t n = 1; n + 1 < rec.size(); ++n) {
        const double span = rec[n + 1].t - rec[n - 1].t;
        const double dh2 = (h2(rec[n + 1]) - h2(rec[n - 1])) / span;
        t.push_back(rec[n].t);
        res.push_back(e2 * dh2 + h2(rec[n]) + params.beta * rec[n].tx_interface);
    }
    return summarize(std::move(t), std::move(res));
}

const ConstraintResult& SafetyReport::get(const std::string& name) const
{
    for (const auto& c : constraints) {
        if (c.name == name) {
            return c;
        }
    }
    throw std::out_of_range("no constraint named " + name);
}

bool SafetyReport::has(const std::string& name) const
{
    return std::any_of(constraints.begin(), constraints.end(), [&](const auto& c) { return c.name == name; });
}

bool SafetyReport::all_satisfied() const
{
    return std::all_of(constraints.begin(), constraints.end(), [](const auto& c) { return c.satisfied; });
}

SafetyReport safety_monitor(const Trajectory& trajectory, const InitialData& data, const PhysicalParams& params,
                            const ControlGains& gains, const Tolerances& tol)
{
    const auto& rec = trajectory.records;
    double max_qc = 0.0;
    for (const auto& r : rec) {
        max_qc = std::max(max_qc, std::abs(r.qc));
    }
    const double tol_qc = tol.qc_rel * max_qc;
    const bool third = trajectory.order == Order::Third;

    struct Check {
        const char* name;
        double slack;
        double (*margin)(const Record&, const InitialData&, const PhysicalParams&, const ControlGains&);
    };
    std::vector<Check> checks{
        {"temp-valid", tol.temp,
         [](const Record& r, const InitialData&, const PhysicalParams& p, const ControlGains&) {
             return r.t_min - p.t_melt;
         }},
        {"interface-valid", 0.0,
         [](const Record& r, const InitialData&, const PhysicalParams& p, const ControlGains&) {
             return std::min(r.s, p.length - r.s);
         }},
        {"qc-nonneg", tol_qc,
         [](const Record& r, const InitialData&, const PhysicalParams&, const ControlGains&) { return r.qc; }},
        {"sdot-nonneg", tol.mono,
         [](const Record& r, const InitialData&, const PhysicalParams&, const ControlGains&) { return r.s_dot; }},
        {"s-bounds", tol.s_bound,
         [](const Record& r, const InitialData& d, const PhysicalParams&, const ControlGains& g) {
             return std::min(r.s - d.s0, g.setpoint - r.s);
         }},
    };
    if (third) {
        checks.push_back({"h2-nonneg", tol.mono,
                          [](const Record& r, const InitialData&, const PhysicalParams& p, const ControlGains&) {
                              return p.eps * r.s_ddot.value_or(0.0) + r.s_dot;
                          }});
    } else {
        checks.push_back({"sdot-gronwall", tol.mono,
                          [](const Record& r, const InitialData& d, const PhysicalParams& p, const ControlGains&) {
                              return r.s_dot - d.v0 * std::exp(-r.t / p.eps);
                          }});
    }

    SafetyReport report;
    report.flags.assign(rec.size(), 0U);
    for (std::size_t c = 0; c < checks.size(); ++c) {
        ConstraintResult res;
        res.name = checks[c].name;
        res.worst_margin = inf;
        for (std::size_t n = 0; n < rec.size(); ++n) {
            const double m = checks[c].margin(rec[n], data, params, gains);
            res.worst_margin = std::min(res.worst_margin, m);
            const bool ok = res.name == std::string("interface-valid") ? m > 0.0 : m >= -checks[c].slack;
            if (!ok) {
                report.flags[n] |= 1U << c;
                if (res.satisfied) {
                    res.satisfied = false;
                    res.first_violation = rec[n].t;
                }
            }
        }
        report.constraints.push_back(res);
    }

    if (trajectory.termination == Termination::InterfaceLeftDomain) {
        for (auto& c : report.constraints) {
            if (c.name == "interface-valid" && c.satisfied) {
                c.satisfied = false;
                c.first_violation = trajectory.violation_time;
                c.worst_margin = std::min(c.worst_margin, 0.0);
            }
        }
    }
    return report;
}

std::optional<double> fit_decay_rate(const std::vector<double>& t, const std::vector<double>& values)
{
    double n = 0.0, st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    for (std::size_t i = 0; i < std::min(t.size(), values.size()); ++i) {
        if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
            continue;
        }
        const double y = std::log(values[i]);
        n += 1.0;
        st += t[i];
        sy += y;
        stt += t[i] * t[i];
        sty += t[i] * y;
    }
    const double denom = n * stt - st * st;
    if (n < 2.0 || denom <= 0.0) {
        return std::nullopt;
    }
    return (n * sty - st * sy) / denom;
}

std::optional<double> phi_decay_rate(const Trajectory& trajectory)
{
    std::vector<double> t;
    std::vector<double> phi;
    for (std::size_t n = 1; n < trajectory.records.size(); ++n) {
        const auto& r = trajectory.records[n];
        if (r.phi) {
            t.push_back(r.t);
            phi.push_back(*r.phi);
        }
    }
    return fit_decay_rate(t, phi);
}

} // namespace stefan
