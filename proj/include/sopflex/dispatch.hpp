#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sopflex/lossmodel.hpp"
#include "sopflex/sopcore.hpp"

namespace sopflex {

// One operating decision: pick the selector state and the per-feeder power
// draws minimizing surrogate network loss plus converter loss.
struct DispatchProblem {
    SopDesign design;
    QuadLossModel loss_model;
    double kappa = 0.01;  // converter loss coefficient per conversion
    double big_m = 0.0;   // kW; must be >= 2*(1+kappa)*p_plus
    std::optional<SelectorState> fixed_state;  // freezes the selector binaries
};

// Problem with the smallest universally valid big-M, 2*(1+kappa)*p_plus.
DispatchProblem make_dispatch_problem(const SopDesign& design, const QuadLossModel& model,
                                      double kappa);

void validate_problem(const DispatchProblem& problem);

struct DispatchSolution {
    std::array<double, 3> p_inj{};  // kW, positive = drawn from feeder into device
    SelectorState state;
    // p_ac[j][i]: AC power drawn by converter j through its port on feeder i.
    std::array<std::array<double, 3>, 3> p_ac{};
    std::array<double, 3> p_ac_sigma{};  // AC-side power per converter (kW)
    std::array<double, 3> p_dc{};        // DC-side power per converter (kW)
    // z[j] = {z_j1, z_j2}: z_j1 = 1 marks the p_dc[j] >= 0 branch of the
    // converter-loss linearization, z_j2 the p_dc[j] <= 0 branch; at
    // p_dc[j] = 0 the z_j1 branch is assigned canonically.
    std::array<std::array<int, 2>, 3> z{};
    double tau = 0.0;              // epigraph of the quadratic network term (kW)
    double loss_network = 0.0;     // surrogate network loss (kW)
    double loss_converters = 0.0;  // kappa * sum |p_dc| (kW)
    double loss_total = 0.0;       // objective value (kW)
    double mip_gap_abs = 0.0;      // kW
    double mip_gap_rel = 0.0;
    double cone_residual = 0.0;  // |  ||H p_inj||^2 - tau | / max(tau, 1)
    double kkt_residual = 0.0;   // from the winning continuous subproblem
    int nodes_explored = 0;
    bool gap_reached = true;
};

// Global optimum with the selector frozen to `state`. The converter balance
// p_ac_sigma = p_dc + kappa*|p_dc| is an equality over a nonconvex V-shaped
// set, so the subproblem is solved exactly by enumerating the 8 sign
// patterns of p_dc, each a 3-variable convex QP.
DispatchSolution solve_fixed_state(const DispatchProblem& problem, const SelectorState& state);

// Exact oracle: best solve_fixed_state over all 27 selector states, ties
// resolved by canonical state order (identity first, then row-major).
DispatchSolution solve_enumerate(const DispatchProblem& problem);

// Branch-and-bound over selector assignments (then the 8 loss-branch sign
// patterns at each leaf), seeded with the identity-state solution and
// bounded by a converter-loss-free box relaxation. Exact at this scale.
DispatchSolution solve_micp(const DispatchProblem& problem, int node_budget = 100000);

// Re-evaluates every model constraint independently of the solvers; returns
// a description + magnitude per violation, empty when clean.
std::vector<std::string> validate_solution(const DispatchProblem& problem,
                                           const DispatchSolution& sol);

nlohmann::json solution_to_json(const DispatchSolution& sol);

}  // namespace sopflex
