#pragma once

#include "stefan/controller.hpp"
#include "stefan/model.hpp"
#include "stefan/solver.hpp"
#include "stefan/trajectory.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace stefan {

/// Target-system variables on the physical grid x_i = i s / nx.
struct TransformedState {
    std::vector<double> x;
    std::vector<double> w;
    std::vector<double> w_x;
    Eigen::VectorXd X;
    double s = 0.0;
};

/// w(x) = u(x) - int_x^s k(x - y) u(y) dy - phi(x - s)^T X.
///
/// The integral is the trapezoid rule on the nodes x_j >= x_i. Because k is
/// linear, w_x = u_x - k'(0) int_x^s u dy - K^T X exactly, with u_x taken from
/// central differences inside and the solver's one-sided stencils at both ends.
TransformedState backstepping_transform(const SimState& state, const ControlGains& gains,
                                        const PhysicalParams& params, int stencil = 2);

struct LyapunovCert {
    Order order = Order::Second;
    Eigen::MatrixXd P;
    Eigen::MatrixXd Q;
    Eigen::MatrixXd S;
    Eigen::MatrixXd Lambda;
    /// Diagonal weights of Q relative to lambda1: Q = lambda1 diag(1, kappa...).
    std::vector<double> kappa;
    double lambda1 = 1.0;
    /// Largest eigenvalue of P (A + BK) + (A + BK)^T P + Q.
    double residual_max_eig = 0.0;
    double lambda_min_eig = 0.0;
    bool lyap_ineq_ok = false;
    bool lambda_pd_ok = false;
    /// Scalar (2,2) test and its closed-form limit, second order only.
    std::optional<double> pd_lhs;
    std::optional<double> pd_rhs;
    std::optional<bool> limit_test;
    /// Third order with c1 = c2 = c3, where S vanishes.
    bool sufficient_case = false;
};

/// Closed-form P for Q = diag(lambda1, kappa2 lambda1), second order.
/// Throws ValidationError for degenerate gains (d1 = c1/eps or d2 = 1/eps + c2 zero).
LyapunovCert solve_P(const ControlGains& gains, const PhysicalParams& params, double lambda1, double kappa2);

/// Closed-form P for Q = diag(lambda1, lambda2) given directly, which also
/// covers the semidefinite case lambda1 = 0.
LyapunovCert solve_P_weights(const ControlGains& gains, const PhysicalParams& params, double lambda1,
                             double lambda2);

/// Solves M^T P + P M = -Q by Kronecker vectorization.
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& m, const Eigen::MatrixXd& q);

/// Builds S and Lambda for a certificate whose P and Q are already set.
/// Throws ValidationError when Q is zero or when a zero diagonal of Q meets a
/// non-zero component of P B.
void lambda_certificate(LyapunovCert& cert, const ControlGains& gains, const PhysicalParams& params);

/// d1^2 d2^2 / ((d2^2 + 2 d1)/kappa2 + 1/kappa2^2 + d1^2).
double lambda_pd_lhs(double d1, double d2, double kappa2);
/// 144 s_r^4 (c1 - c2)^2 / (alpha^2 eps^2).
double lambda_pd_rhs(const ControlGains& gains, const PhysicalParams& params);

/// Sweeps kappa over {1, 10, ..., 1e8} (both weights for third order) with
/// lambda1 = 1 and keeps the candidate with the largest min-eigenvalue of Lambda.
LyapunovCert certify(const ControlGains& gains, const PhysicalParams& params);

const std::vector<double>& kappa_grid();

struct LyapunovValues {
    double V = 0.0;
    double Phi = 0.0;
};

/// V = 3/(4 s_r^2) |w|^2 + 1/2 |w_x|^2 + X^T P X,  Phi = |w|^2 + |w_x|^2 + X^T X.
LyapunovValues lyapunov_values(const TransformedState& transformed, const LyapunovCert& cert, double setpoint);

struct TransformDiagnostics {
    std::vector<double> t;
    std::vector<double> w_interface;
    std::vector<double> wx_origin;
    std::vector<double> max_u;
};

/// Record hook filling V and Phi, optionally collecting transform diagnostics.
RecordHook lyapunov_hook(const PhysicalParams& params, const ControlGains& gains, const LyapunovCert& cert,
                         int stencil, TransformDiagnostics* diagnostics = nullptr);

struct CbfValues {
    double h1 = 0.0;
    double h2 = 0.0;
};

/// h1 = sdot, h2 = eps1 sddot + sdot. Third order only.
CbfValues cbf_chain(const SimState& state, const PhysicalParams& params);

/// eps2 h2' + h2 + beta T_x(s, t) along a third-order trajectory (central differences).
ResidualSeries cbf_residual(const Trajectory& trajectory, const PhysicalParams& params);

struct ConstraintResult {
    std::string name;
    bool satisfied = true;
    /// Smallest signed margin over the run; positive means safe.
    double worst_margin = 0.0;
    std::optional<double> first_violation;
};

struct SafetyReport {
    std::vector<ConstraintResult> constraints;
    /// Per record, bit i set when constraints[i] is violated there.
    std::vector<std::uint32_t> flags;

    const ConstraintResult& get(const std::string& name) const;
    bool has(const std::string& name) const;
    bool all_satisfied() const;
};

SafetyReport safety_monitor(const Trajectory& trajectory, const InitialData& data, const PhysicalParams& params,
                            const ControlGains& gains, const Tolerances& tol = {});

/// Slope of a least-squares line through (t, log value) over positive values.
std::optional<double> fit_decay_rate(const std::vector<double>& t, const std::vector<double>& values);

/// Decay rate of Phi over records after the first step.
std::optional<double> phi_decay_rate(const Trajectory& trajectory);

} // namespace stefan
