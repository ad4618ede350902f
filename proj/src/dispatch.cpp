#include "sopflex/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sopflex/errors.hpp"
#include "sopflex/qp.hpp"

namespace sopflex {

namespace {

Eigen::Vector3d to_vec(const std::array<double, 3>& a) {
    return Eigen::Vector3d(a[0], a[1], a[2]);
}

double cone_residual_of(const QuadLossModel& model, const std::array<double, 3>& p_inj,
                        double tau) {
    Eigen::Vector3d p = to_vec(p_inj);
    double lhs = (model.H * p).squaredNorm();
    return std::abs(lhs - tau) / std::max(tau, 1.0);
}

}  // namespace

DispatchProblem make_dispatch_problem(const SopDesign& design, const QuadLossModel& model,
                                      double kappa) {
    DispatchProblem p;
    p.design = design;
    p.loss_model = model;
    p.kappa = kappa;
    p.big_m = 2.0 * (1.0 + kappa) * design.p_plus_kva;
    validate_problem(p);
    return p;
}

void validate_problem(const DispatchProblem& problem) {
    validate_design(problem.design);
    if (!(problem.kappa >= 0.0 && problem.kappa < 1.0))
        throw ValidationError("kappa must lie in [0, 1)");
    double m_min = 2.0 * (1.0 + problem.kappa) * problem.design.p_plus_kva;
    if (problem.big_m < m_min - 1e-9)
        throw ValidationError("big_m must be at least 2*(1+kappa)*p_plus");
    const Eigen::Matrix3d& q = problem.loss_model.Q;
    if ((q - q.transpose()).norm() > 1e-9 * std::max(1.0, q.norm()))
        throw ValidationError("loss matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(q);
    if (eig.eigenvalues().minCoeff() < -1e-9 * std::max(1.0, q.norm()))
        throw ValidationError("loss matrix must be positive semidefinite");
    if (problem.fixed_state) validate_state(*problem.fixed_state);
}

DispatchSolution solve_fixed_state(const DispatchProblem& problem, const SelectorState& state) {
    validate_problem(problem);
    validate_state(state);
    const double p_plus = problem.design.p_plus_kva;
    const double kappa = problem.kappa;
    const Eigen::Matrix3d& q_mat = problem.loss_model.Q;
    const Eigen::Vector3d q_lin = problem.loss_model.q;
    const double c0 = problem.loss_model.c;

    bool have_best = false;
    double best_obj = 0.0;
    Eigen::Vector3d best_x = Eigen::Vector3d::Zero();
    Eigen::Vector3d best_gamma = Eigen::Vector3d::Ones();
    double best_kkt = 0.0;

    // Sign patterns in canonical order, all-nonnegative first: for mask m,
    // converter j takes the p_dc >= 0 branch iff bit j of m is clear.
    for (int mask = 0; mask < 8; ++mask) {
        Eigen::Vector3d s, gamma;
        for (int j = 0; j < 3; ++j) {
            s(j) = (mask >> j) & 1 ? -1.0 : 1.0;
            gamma(j) = 1.0 + s(j) * kappa;
        }
        // Variables x = p_dc / p_plus. Feeder draw p_inj = p_plus * G x, with
        // G(i,j) = b[j][i] * gamma_j (converter j delivers gamma_j*p_dc_j AC
        // through its single port).
        Eigen::Matrix3d g_map = Eigen::Matrix3d::Zero();
        for (int j = 0; j < 3; ++j)
            for (int i = 0; i < 3; ++i) g_map(i, j) = state.b[j][i] * gamma(j);

        QpProblem qp;
        qp.p = 2.0 * p_plus * p_plus * g_map.transpose() * q_mat * g_map;
        qp.g = p_plus * g_map.transpose() * q_lin + kappa * p_plus * s;
        qp.a_eq = Eigen::MatrixXd::Ones(1, 3);
        qp.b_eq = Eigen::VectorXd::Zero(1);
        qp.a_in = Eigen::MatrixXd::Zero(6, 3);
        qp.b_in = Eigen::VectorXd::Zero(6);
        for (int j = 0; j < 3; ++j) {
            qp.a_in(j, j) = -s(j);  // s_j x_j >= 0
            qp.b_in(j) = 0.0;
            qp.a_in(3 + j, j) = s(j);  // s_j x_j <= alpha_j / gamma_j
            qp.b_in(3 + j) = problem.design.alpha[j] / gamma(j);
        }

        QpResult res = solve_qp(qp, 1e-12);
        if (!res.feasible)
            throw SolverError("fixed-state subproblem found no feasible point (internal)");
        double obj = res.objective + c0;
        if (!have_best || obj < best_obj) {
            have_best = true;
            best_obj = obj;
            best_x = res.x;
            best_gamma = gamma;
            best_kkt = res.kkt_residual;
        }
    }

    DispatchSolution sol;
    sol.state = state;
    for (int j = 0; j < 3; ++j) {
        double pdc = best_x(j) * p_plus;
        if (std::abs(pdc) <= 1e-12 * p_plus) pdc = 0.0;
        sol.p_dc[j] = pdc;
        // Branch coefficient from the realized sign, not the pattern, so a
        // zero that the pattern labeled negative still lands on the
        // canonical z_j1 branch.
        double gamma = pdc < 0.0 ? 1.0 - kappa : 1.0 + kappa;
        if (pdc == 0.0) gamma = best_gamma(j);
        sol.p_ac_sigma[j] = pdc == 0.0 ? 0.0 : gamma * pdc;
        sol.z[j][0] = pdc >= 0.0 ? 1 : 0;
        sol.z[j][1] = 1 - sol.z[j][0];
        for (int i = 0; i < 3; ++i) sol.p_ac[j][i] = state.b[j][i] * sol.p_ac_sigma[j];
    }
    for (int i = 0; i < 3; ++i) {
        sol.p_inj[i] = 0.0;
        for (int j = 0; j < 3; ++j) sol.p_inj[i] += sol.p_ac[j][i];
    }

    Eigen::Vector3d p = to_vec(sol.p_inj);
    sol.tau = p.dot(q_mat * p);
    sol.loss_network = sol.tau + q_lin.dot(p) + c0;
    sol.loss_converters = kappa * (std::abs(sol.p_dc[0]) + std::abs(sol.p_dc[1]) +
                                   std::abs(sol.p_dc[2]));
    sol.loss_total = sol.loss_network + sol.loss_converters;
    sol.cone_residual = cone_residual_of(problem.loss_model, sol.p_inj, sol.tau);
    sol.kkt_residual = best_kkt;
    sol.nodes_explored = 8;
    return sol;
}

DispatchSolution solve_enumerate(const DispatchProblem& problem) {
    if (problem.fixed_state) return solve_fixed_state(problem, *problem.fixed_state);
    bool have = false;
    DispatchSolution best;
    for (const auto& state : all_selector_states()) {
        DispatchSolution sol = solve_fixed_state(problem, state);
        if (!have || sol.loss_total < best.loss_total) {
            have = true;
            best = sol;
        }
    }
    best.nodes_explored = 27 * 8;
    return best;
}

DispatchSolution solve_micp(const DispatchProblem& problem, int node_budget) {
    validate_problem(problem);
    if (problem.fixed_state) return solve_fixed_state(problem, *problem.fixed_state);

    const double p_plus = problem.design.p_plus_kva;
    DispatchSolution incumbent = solve_fixed_state(problem, SelectorState::identity());
    int nodes = 1;
    bool budget_hit = false;
    double worst_open_lb = std::numeric_limits<double>::infinity();
    bool have_open = false;

    // Lower bound for a partial assignment: drop converter losses and relax
    // each feeder draw into the widest box any completion could grant it
    // (mass of converters pinned to the feeder plus all unassigned mass).
    auto node_lb = [&](const std::array<int, 3>& assign, int depth) {
        std::array<double, 3> reach{0, 0, 0};
        double free_mass = 0.0;
        for (int j = 0; j < 3; ++j) {
            if (j < depth)
                reach[assign[j]] += problem.design.alpha[j];
            else
                free_mass += problem.design.alpha[j];
        }
        QpProblem qp;
        qp.p = 2.0 * p_plus * p_plus * problem.loss_model.Q;
        qp.g = p_plus * problem.loss_model.q;
        qp.a_eq = Eigen::MatrixXd(0, 3);
        qp.b_eq = Eigen::VectorXd(0);
        qp.a_in = Eigen::MatrixXd::Zero(6, 3);
        qp.b_in = Eigen::VectorXd::Zero(6);
        for (int i = 0; i < 3; ++i) {
            qp.a_in(i, i) = 1.0;
            qp.b_in(i) = reach[i] + free_mass;
            qp.a_in(3 + i, i) = -1.0;
            qp.b_in(3 + i) = reach[i] + free_mass;
        }
        QpResult res = solve_qp(qp, 1e-12);
        if (!res.feasible)
            throw SolverError("relaxation found no feasible point (internal)");
        return res.objective + problem.loss_model.c;
    };

    std::array<int, 3> assign{0, 0, 0};
    auto dfs = [&](auto&& self, int depth) -> void {
        double lb = node_lb(assign, depth);
        if (lb >= incumbent.loss_total) return;  // equal bound cannot strictly improve
        if (nodes >= node_budget) {
            // Out of budget: this subtree stays open and its bound feeds the gap.
            budget_hit = true;
            have_open = true;
            worst_open_lb = std::min(worst_open_lb, lb);
            return;
        }
        ++nodes;
        if (depth == 3) {
            DispatchSolution sol =
                solve_fixed_state(problem, SelectorState::from_assignment(assign));
            if (sol.loss_total < incumbent.loss_total) incumbent = sol;
            return;
        }
        for (int f = 0; f < 3; ++f) {
            assign[depth] = f;
            self(self, depth + 1);
        }
    };
    dfs(dfs, 0);

    incumbent.nodes_explored = nodes;
    if (budget_hit && have_open) {
        incumbent.mip_gap_abs = std::max(0.0, incumbent.loss_total - worst_open_lb);
        incumbent.mip_gap_rel = incumbent.mip_gap_abs / std::max(std::abs(incumbent.loss_total), 1e-9);
        incumbent.gap_reached = incumbent.mip_gap_rel <= 1e-4;
    } else {
        incumbent.mip_gap_abs = 0.0;
        incumbent.mip_gap_rel = 0.0;
        incumbent.gap_reached = true;
    }
    return incumbent;
}

std::vector<std::string> validate_solution(const DispatchProblem& problem,
                                           const DispatchSolution& sol) {
    std::vector<std::string> bad;
    auto flag = [&](const std::string& what, double magnitude) {
        bad.push_back(what + " (violation " + std::to_string(magnitude) + ")");
    };
    const double p_plus = problem.design.p_plus_kva;
    const double tol = 1e-8 * p_plus;
    const double kappa = problem.kappa;
    const double big_m = problem.big_m;

    try {
        validate_state(sol.state);
    } catch (const ValidationError& e) {
        bad.push_back(std::string("selector state invalid: ") + e.what());
        return bad;
    }

    for (int j = 0; j < 3; ++j) {
        // converter AC aggregation over its ports
        double sum = sol.p_ac[j][0] + sol.p_ac[j][1] + sol.p_ac[j][2];
        if (std::abs(sum - sol.p_ac_sigma[j]) > tol)
            flag("converter " + std::to_string(j + 1) + " port powers do not sum to its AC power",
                 std::abs(sum - sol.p_ac_sigma[j]));
        // port rating / selector coupling
        for (int i = 0; i < 3; ++i) {
            double cap = sol.state.b[j][i] * problem.design.alpha[j] * p_plus;
            if (std::abs(sol.p_ac[j][i]) > cap + tol)
                flag("port power of converter " + std::to_string(j + 1) + " on feeder " +
                         std::to_string(i + 1) + " exceeds its selector-gated rating",
                     std::abs(sol.p_ac[j][i]) - cap);
        }
        // loss-branch indicators
        if ((sol.z[j][0] != 0 && sol.z[j][0] != 1) || (sol.z[j][1] != 0 && sol.z[j][1] != 1) ||
            sol.z[j][0] + sol.z[j][1] != 1)
            flag("converter " + std::to_string(j + 1) +
                     " must have exactly one active loss branch",
                 std::abs(sol.z[j][0] + sol.z[j][1] - 1));
        // big-M branch rows
        double r1 = sol.p_ac_sigma[j] - (1.0 + kappa) * sol.p_dc[j];
        double slack1 = big_m * (1 - sol.z[j][0]);
        if (std::abs(r1) > slack1 + tol)
            flag("converter " + std::to_string(j + 1) + " positive-branch balance violated",
                 std::abs(r1) - slack1);
        double r2 = sol.p_ac_sigma[j] - (1.0 - kappa) * sol.p_dc[j];
        double slack2 = big_m * (1 - sol.z[j][1]);
        if (std::abs(r2) > slack2 + tol)
            flag("converter " + std::to_string(j + 1) + " negative-branch balance violated",
                 std::abs(r2) - slack2);
        // branch sign forcing
        if (sol.p_dc[j] < -slack1 - tol)
            flag("converter " + std::to_string(j + 1) + " dc power negative on positive branch",
                 -sol.p_dc[j] - slack1);
        if (sol.p_dc[j] > slack2 + tol)
            flag("converter " + std::to_string(j + 1) + " dc power positive on negative branch",
                 sol.p_dc[j] - slack2);
    }

    double dc_sum = sol.p_dc[0] + sol.p_dc[1] + sol.p_dc[2];
    if (std::abs(dc_sum) > tol) flag("dc-node power balance violated", std::abs(dc_sum));

    for (int i = 0; i < 3; ++i) {
        double sum = sol.p_ac[0][i] + sol.p_ac[1][i] + sol.p_ac[2][i];
        if (std::abs(sum - sol.p_inj[i]) > tol)
            flag("feeder " + std::to_string(i + 1) + " draw does not match its port powers",
                 std::abs(sum - sol.p_inj[i]));
    }

    double conv = kappa * (std::abs(sol.p_dc[0]) + std::abs(sol.p_dc[1]) + std::abs(sol.p_dc[2]));
    if (std::abs(conv - sol.loss_converters) > tol)
        flag("converter losses inconsistent with dc powers", std::abs(conv - sol.loss_converters));

    Eigen::Vector3d p = to_vec(sol.p_inj);
    double cone = cone_residual_of(problem.loss_model, sol.p_inj, sol.tau);
    if (cone > 1e-5) flag("quadratic-term cone not tight", cone);
    double net = sol.tau + problem.loss_model.q.dot(p) + problem.loss_model.c;
    if (std::abs(net - sol.loss_network) > tol)
        flag("network loss inconsistent with surrogate", std::abs(net - sol.loss_network));
    if (std::abs(sol.loss_network + sol.loss_converters - sol.loss_total) > tol)
        flag("total loss inconsistent with its parts",
             std::abs(sol.loss_network + sol.loss_converters - sol.loss_total));
    return bad;
}

nlohmann::json solution_to_json(const DispatchSolution& sol) {
    nlohmann::json doc;
    doc["p_inj_kw"] = {sol.p_inj[0], sol.p_inj[1], sol.p_inj[2]};
    doc["state"] = sol.state.label();
    nlohmann::json b = nlohmann::json::array();
    for (int j = 0; j < 3; ++j) b.push_back({sol.state.b[j][0], sol.state.b[j][1], sol.state.b[j][2]});
    doc["state_matrix"] = b;
    nlohmann::json pac = nlohmann::json::array();
    for (int j = 0; j < 3; ++j) pac.push_back({sol.p_ac[j][0], sol.p_ac[j][1], sol.p_ac[j][2]});
    doc["p_ac_kw"] = pac;
    doc["p_ac_sigma_kw"] = {sol.p_ac_sigma[0], sol.p_ac_sigma[1], sol.p_ac_sigma[2]};
    doc["p_dc_kw"] = {sol.p_dc[0], sol.p_dc[1], sol.p_dc[2]};
    nlohmann::json z = nlohmann::json::array();
    for (int j = 0; j < 3; ++j) z.push_back({sol.z[j][0], sol.z[j][1]});
    doc["z"] = z;
    doc["tau_kw"] = sol.tau;
    doc["loss_network_kw"] = sol.loss_network;
    doc["loss_converters_kw"] = sol.loss_converters;
    doc["loss_total_kw"] = sol.loss_total;
    doc["mip_gap_abs_kw"] = sol.mip_gap_abs;
    doc["mip_gap_rel"] = sol.mip_gap_rel;
    doc["cone_residual"] = sol.cone_residual;
    doc["kkt_residual"] = sol.kkt_residual;
    doc["nodes_explored"] = sol.nodes_explored;
    doc["gap_reached"] = sol.gap_reached;
    return doc;
}

}  // namespace sopflex
