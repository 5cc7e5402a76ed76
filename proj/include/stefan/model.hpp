#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace stefan {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unreadable configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Inputs that violate a precondition of the model (bad parameters, bad profile).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// The time integration produced something unusable (NaN, CFL breach).
class NumericalError : public Error {
public:
    using Error::Error;
};

enum class Order { Second = 2, Third = 3 };

inline int dimension(Order order) { return static_cast<int>(order); }

/// Thermophysical constants, SI units throughout.
///
/// `eps` is the single relaxation time for second-order interface dynamics and
/// the first relaxation time of the chain for third order; `eps2` is present
/// only for third order.
struct PhysicalParams {
    double alpha = 0.0;   // m^2/s
    double beta = 0.0;    // m^2/(s K)
    double k_cond = 0.0;  // W/(m K)
    double t_melt = 0.0;  // K
    double length = 0.0;  // m
    double eps = 0.0;     // s
    std::optional<double> eps2;

    /// Throws ValidationError when a constant is non-positive, non-finite, or the
    /// relaxation times do not match `order`.
    void validate(Order order) const;

    bool operator==(const PhysicalParams&) const = default;
};

struct Tolerances {
    double bc = 1e-9;      // K, boundary compatibility T0(s0) = Tm
    double temp = 1e-6;    // K, T >= Tm
    double mono = 1e-8;    // m/s, sdot >= 0
    double grad = 1e-6;    // K/m, T_x(s) <= 0
    double qc_rel = 1e-9;  // fraction of max|qc|
    double s_bound = 1e-9; // m, s0 <= s <= s_r
    double lyap = 1e-3;    // relative growth allowed per step for Phi

    bool operator==(const Tolerances&) const = default;
};

/// T0(x) - Tm = surplus * (1 - x / s0).
struct LinearProfile {
    double surplus = 0.0;
    bool operator==(const LinearProfile&) const = default;
};

/// Samples (x, T) of the initial temperature, sorted by x, covering [0, s0].
struct TabulatedProfile {
    std::vector<std::pair<double, double>> samples;
    bool operator==(const TabulatedProfile&) const = default;
};

using TemperatureProfile = std::variant<LinearProfile, TabulatedProfile>;

struct InitialData {
    double s0 = 0.0;
    double v0 = 0.0;
    std::optional<double> a0;
    TemperatureProfile profile = LinearProfile{};

    /// Initial temperature at x in [0, s0].
    double temperature(double x, const PhysicalParams& params) const;

    /// Integral of T0 - Tm over [0, s0]. Exact for a linear profile,
    /// trapezoid over the samples for a tabulated one.
    double surplus_integral(const PhysicalParams& params) const;

    bool operator==(const InitialData&) const = default;
};

/// Tabulate a linear profile at `samples` uniformly spaced points.
TabulatedProfile tabulate(const LinearProfile& profile, double s0, double t_melt, int samples);

struct Violation {
    std::string assumption;
    std::string detail;
    double value = 0.0;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

ValidationReport validate_initial(const InitialData& data, const PhysicalParams& params, Order order,
                                  const Tolerances& tol = {});

/// Which relaxation time enters the third-order setpoint bound.
enum class SetpointRelaxation { Eps1, Eps2, Sum };

double min_setpoint_2nd(const InitialData& data, const PhysicalParams& params);

/// Requires 0 < c1 <= c2.
double min_setpoint_3rd(const InitialData& data, const PhysicalParams& params, double c1, double c2,
                        SetpointRelaxation relaxation = SetpointRelaxation::Eps1);

double relaxation_value(const PhysicalParams& params, SetpointRelaxation relaxation);

/// Composite trapezoid rule over uniformly spaced samples.
double trapezoid(std::span<const double> values, double spacing);

/// Temperature on the immobilized grid xi_i = i / nx, together with the interface state.
struct SimState {
    double t = 0.0;
    std::vector<double> temp;
    double s = 0.0;
    double s_dot = 0.0;
    std::optional<double> s_ddot;

    int nx() const { return static_cast<int>(temp.size()) - 1; }
    double xi(int i) const { return static_cast<double>(i) / nx(); }
    std::vector<double> xi_grid() const;
    /// Physical spacing s / nx.
    double dx() const { return s / nx(); }
};

SimState initial_state(const InitialData& data, const PhysicalParams& params, int nx, Order order);

/// Integral of T - Tm over the liquid domain [0, s], trapezoid on the grid.
double surplus_integral(const SimState& state, const PhysicalParams& params);

struct ReferenceError {
    std::vector<double> u;
    Eigen::VectorXd X;
};

ReferenceError reference_error(const SimState& state, const PhysicalParams& params, double setpoint);

} // namespace stefan
