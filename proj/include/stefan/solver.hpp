#pragma once

#include "stefan/controller.hpp"
#include "stefan/model.hpp"
#include "stefan/trajectory.hpp"

#include <functional>
#include <utility>
#include <variant>
#include <vector>

namespace stefan {

enum class Scheme { ExplicitEuler, CrankNicolson };

struct SolverConfig {
    int nx = 128;
    double dt = 0.25;
    double t_final = 100.0;
    Scheme scheme = Scheme::CrankNicolson;
    /// Order of the one-sided difference used for T_x at both boundaries (2 or 3).
    int flux_stencil = 2;
    /// Extra passes of the Crank-Nicolson corrector after the frozen-coefficient predictor.
    int corrector_passes = 2;
    /// The first step is split into Crank-Nicolson substeps whose mesh ratio
    /// alpha dt_sub (nx / s0)^2 does not exceed this value (0 disables). Damps
    /// the odd-even ringing excited when the initial profile does not match
    /// the first boundary flux.
    double startup_mesh_ratio = 1.0;
    Tolerances tol{};

    bool operator==(const SolverConfig&) const = default;
};

/// Coefficients of the immobilized equation on xi = x / s in [0, 1]:
///   u_t = diffusion * u_xixi + advection_rate * xi * u_xi.
struct ImmobilizedCoefficients {
    double diffusion = 0.0;       // alpha / s^2, 1/s
    double advection_rate = 0.0;  // sdot / s, 1/s

    double advection(double xi) const { return advection_rate * xi; }
};

ImmobilizedCoefficients transform_pde(const SimState& state, const PhysicalParams& params);

/// One-sided estimates of (T_x(0, t), T_x(s(t), t)) in K/m.
std::pair<double, double> boundary_flux_gradient(const SimState& state, const PhysicalParams& params,
                                                 int stencil = 2);

/// Boundary heat flux as a function of the current state (closed loop) or
/// of time only (open loop).
using FluxLaw = std::function<double(const SimState&)>;

FluxLaw constant_flux(double qc);

/// Piecewise-linear interpolation of (t, qc) samples, held constant outside.
FluxLaw scheduled_flux(std::vector<std::pair<double, double>> schedule);

FluxLaw feedback_flux(const PhysicalParams& params, const ControlGains& gains);

/// Advance by cfg.dt with the configured scheme.
SimState step(const SimState& state, const FluxLaw& flux, const PhysicalParams& params, const SolverConfig& cfg,
              Order order);

SimState step(const SimState& state, double qc, const PhysicalParams& params, const SolverConfig& cfg,
              Order order);

struct ClosedLoop {
    bool operator==(const ClosedLoop&) const = default;
};
struct OpenLoop {
    std::vector<std::pair<double, double>> schedule;
    bool operator==(const OpenLoop&) const = default;
};
using ControllerMode = std::variant<ClosedLoop, OpenLoop>;

/// Called for every record with the state it was taken from, so post-processing
/// that needs the full field (Lyapunov values) can fill in the record.
using RecordHook = std::function<void(const SimState&, Record&)>;

Trajectory simulate(const InitialData& data, const PhysicalParams& params, const SolverConfig& cfg, Order order,
                    const FluxLaw& flux, const RecordHook& hook = {});

Trajectory simulate(const InitialData& data, const PhysicalParams& params, const ControlGains& gains,
                    const SolverConfig& cfg, Order order, const ControllerMode& mode,
                    const RecordHook& hook = {});

/// E = (k/alpha) int (T - Tm) dx + (k/beta)(s + eps sdot)           (second order)
/// E = (k/alpha) int (T - Tm) dx + (k/beta)(s + (e1+e2) sdot + e1 e2 sddot) (third order)
/// with dE/dt = qc along exact solutions.
double stored_energy(const Record& record, const PhysicalParams& params, Order order);

struct EnergyBalance {
    std::vector<double> t;
    /// E(t_{n+1}) - E(t_n) - trapezoid of qc over the step.
    std::vector<double> residual;
    double max_abs = 0.0;
    double sum_abs = 0.0;
};

EnergyBalance energy_balance(const Trajectory& trajectory, const PhysicalParams& params);

} // namespace stefan
