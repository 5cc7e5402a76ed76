#pragma once

#include "stefan/model.hpp"
#include "stefan/trajectory.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace stefan {

/// Feedback gains and setpoint. The gain vector K is always derived from
/// (c1, c2, c3) together with the relaxation times and beta.
struct ControlGains {
    double c1 = 0.0;
    double c2 = 0.0;
    std::optional<double> c3;
    double setpoint = 0.0;

    Order order() const { return c3 ? Order::Third : Order::Second; }

    /// K = (c1, eps c2) / beta for second order,
    /// K = (c1, (eps1 + eps2) c2, eps1 eps2 c3) / beta for third order.
    Eigen::VectorXd gain_vector(const PhysicalParams& params) const;

    bool operator==(const ControlGains&) const = default;
};

/// A and B of the reference-error ODE  X' = A X + B u_x(s, t).
struct SystemMatrices {
    Eigen::MatrixXd A;
    Eigen::VectorXd B;
};

SystemMatrices system_matrices(const PhysicalParams& params, Order order);

/// A + B K^T.
Eigen::MatrixXd closed_loop_matrix(const PhysicalParams& params, const ControlGains& gains);

bool is_hurwitz(const Eigen::MatrixXd& m);

/// phi(x) = K x.
Eigen::VectorXd kernel_phi(double x, const ControlGains& gains, const PhysicalParams& params);

/// k(x) = -phi(x)^T B / alpha.
double kernel_k(double x, const ControlGains& gains, const PhysicalParams& params);

double control_2nd(const SimState& state, const PhysicalParams& params, const ControlGains& gains);

/// Throws ValidationError when the state carries no acceleration.
double control_3rd(const SimState& state, const PhysicalParams& params, const ControlGains& gains);

/// Dispatches on the order of `gains`.
double control(const SimState& state, const PhysicalParams& params, const ControlGains& gains);

/// Outcome of a bound check. Strict bounds that are met with equality (to a
/// relative 1e-12) are reported as Boundary.
enum class Verdict { Satisfied, Boundary, Violated };

const char* to_string(Verdict verdict);

/// lhs < rhs with a relative tie margin.
Verdict check_strict_less(double lhs, double rhs);
/// lhs <= rhs with a relative tie margin.
Verdict check_less_equal(double lhs, double rhs);

struct GainReport2 {
    double min_setpoint = 0.0;
    bool assumption3_ok = false;
    /// Safety window for c2: c1 <= c2 < safety_upper.
    std::optional<double> safety_upper;
    Verdict assumption4 = Verdict::Violated;
    bool assumption4_ok = false;
    /// 12 s_r^2 <= alpha eps selects the first branch of the stability bound.
    bool small_setpoint_branch = false;
    std::optional<double> c2_bar;
    std::optional<double> c2_barbar;
    std::optional<double> stability_upper;
    Verdict theorem_cond = Verdict::Violated;
    bool theorem_cond_ok = false;
    bool hurwitz = false;
};

GainReport2 check_gains_2nd(const ControlGains& gains, const InitialData& data, const PhysicalParams& params);

struct GainReport3 {
    SetpointRelaxation relaxation = SetpointRelaxation::Eps1;
    Verdict assumption6 = Verdict::Violated;
    std::optional<double> min_setpoint;
    Verdict assumption7 = Verdict::Violated;
    /// Terms of the upper bound c3 <= c2 + min{eps1/eps2 (c2 - c1), c3_bar, eps2/eps1 c2}.
    double ratio_term = 0.0;
    /// Empty when the denominator vanishes (unbounded).
    std::optional<double> c3_bar;
    double ratio_term2 = 0.0;
    double c3_lower = 0.0;
    std::optional<double> c3_upper;
    Verdict assumption8 = Verdict::Violated;
    bool hurwitz = false;

    bool ok() const
    {
        return assumption6 == Verdict::Satisfied && assumption7 == Verdict::Satisfied &&
               assumption8 == Verdict::Satisfied;
    }
};

GainReport3 check_gains_3rd(const ControlGains& gains, const InitialData& data, const PhysicalParams& params,
                            SetpointRelaxation relaxation = SetpointRelaxation::Eps1);

struct ResidualSeries {
    std::vector<double> t;
    std::vector<double> residual;
    double max_abs = 0.0;
    double rms = 0.0;
};

/// Residual of  qc' = -c2 qc + (k / beta)(c2 - c1) sdot  along a second-order
/// closed-loop trajectory, using central differences over uniformly spaced
/// records with t >= t_from.
ResidualSeries qc_ode_residual(const Trajectory& trajectory, const ControlGains& gains,
                                const PhysicalParams& params, double t_from = 0.0);

} // namespace stefan
