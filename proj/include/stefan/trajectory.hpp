#pragma once

#include "stefan/model.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace stefan {

/// Scalar channels recorded at every step.
struct Record {
    double t = 0.0;
    double s = 0.0;
    double s_dot = 0.0;
    std::optional<double> s_ddot;
    double qc = 0.0;
    double t_boundary = 0.0;   // T(0, t)
    double t_min = 0.0;        // min over the grid of T(., t)
    double tx_interface = 0.0; // T_x(s(t), t)
    double surplus = 0.0;      // integral of T - Tm over [0, s]
    std::optional<double> lyapunov_v;
    std::optional<double> phi;
};

struct Snapshot {
    std::size_t record = 0;
    std::vector<double> temp;
};

enum class Termination { Completed, TemperatureBelowMelting, InterfaceLeftDomain };

const char* to_string(Termination termination);

struct Trajectory {
    Order order = Order::Second;
    int nx = 0;
    double dt = 0.0;
    std::vector<Record> records;
    std::vector<Snapshot> snapshots;
    Termination termination = Termination::Completed;
    std::string diagnostic;
    /// Time of the step that triggered early termination.
    std::optional<double> violation_time;

    bool completed() const { return termination == Termination::Completed; }
};

} // namespace stefan
