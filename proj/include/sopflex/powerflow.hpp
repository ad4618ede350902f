#pragma once

#include <complex>
#include <vector>

#include <Eigen/Core>

#include "sopflex/netmodel.hpp"

namespace sopflex {

// Signed per-bus injections overlaid on the base network, in the network
// convention: positive = power fed into the bus. A device drawing P from a
// feeder bus therefore shows up here as -P.
class InjectionSet {
public:
    struct Entry {
        int bus = 0;
        double p_kw = 0.0;
        double q_kvar = 0.0;
    };

    InjectionSet() = default;

    // Accumulates onto any existing entry for the bus.
    void add(int bus_id, double p_kw, double q_kvar = 0.0);
    double p_kw(int bus_id) const;
    double q_kvar(int bus_id) const;
    const std::vector<Entry>& entries() const { return entries_; }

    // Throws ValidationError if an entry references a bus not in the network.
    void check_buses(const NetworkModel& net) const;

private:
    std::vector<Entry> entries_;
};

struct PowerFlowSolution {
    std::vector<double> v_mag;  // pu, indexed like NetworkModel::buses
    std::vector<double> v_ang;  // rad
    double p_slack_kw = 0.0;    // net slack injection balancing the system
    double q_slack_kvar = 0.0;
    double total_loss_kw = 0.0;  // sum of branch I^2 R
    int iterations = 0;
    double max_mismatch_pu = 0.0;
    std::vector<double> mismatch_history;  // max mismatch after each iteration

    std::complex<double> voltage(size_t bus_index) const {
        return std::polar(v_mag[bus_index], v_ang[bus_index]);
    }
};

// Full Newton-Raphson in polar form, flat start. Throws ConvergenceError
// after max_iter, SolverError on a singular Jacobian (message carries the
// iteration index).
PowerFlowSolution solve_newton(const NetworkModel& net, const InjectionSet& inj, double tol = 1e-8,
                               int max_iter = 30);

// Backward/forward sweep for radial networks; same contract as solve_newton.
// Kept as an independent cross-check of the Newton path (loss is accumulated
// per branch here, from the slack balance there).
PowerFlowSolution solve_sweep(const NetworkModel& net, const InjectionSet& inj, double tol = 1e-8,
                              int max_iter = 100);

// Sensitivity of every complex bus voltage to a real-power injection at each
// of the given buses, evaluated analytically at the converged base point.
// Result is n_bus x m, in pu per kW; the slack row is zero.
Eigen::MatrixXcd voltage_jacobian(const NetworkModel& net, const InjectionSet& base_inj,
                                  const std::vector<int>& at_buses, double tol = 1e-8,
                                  int max_iter = 30);

// Same, at the three SOP coupling buses.
Eigen::MatrixXcd voltage_jacobian(const NetworkModel& net, const InjectionSet& base_inj);

}  // namespace sopflex
