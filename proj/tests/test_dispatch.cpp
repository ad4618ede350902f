#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sopflex/dispatch.hpp"
#include "sopflex/errors.hpp"
#include "sopflex/lossmodel.hpp"
#include "sopflex/netmodel.hpp"

using namespace sopflex;

namespace {

// Synthetic loss model with a consistent factor (H'H = Q, not necessarily
// triangular; nothing downstream requires triangularity).
QuadLossModel make_model(const Eigen::Matrix3d& q_mat, const Eigen::Vector3d& q_lin, double c) {
    QuadLossModel m;
    m.Q = 0.5 * (q_mat + q_mat.transpose());
    m.q = q_lin;
    m.c = c;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(m.Q);
    Eigen::Vector3d lam = eig.eigenvalues().cwiseMax(0.0);
    m.H = lam.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
    return m;
}

// Typical magnitude for a distribution feeder: losses of a few hundred kW,
// curvature ~1e-7 kW per kW^2.
QuadLossModel typical_model() {
    Eigen::Matrix3d q;
    q << 4.0e-7, 0.5e-7, -0.2e-7, 0.5e-7, 6.0e-7, 0.3e-7, -0.2e-7, 0.3e-7, 3.0e-7;
    return make_model(q, Eigen::Vector3d(-0.04, 0.06, -0.01), 200.0);
}

QuadLossModel fitted_33bus_model() {
    static QuadLossModel model = [] {
        NetworkModel net = builtin_33bus();
        return fit_loss_model(net, {}, {375, 375, 375}, FitMethod::sampled_least_squares);
    }();
    return model;
}

std::array<double, 3> sorted_abs(const std::array<double, 3>& v) {
    std::array<double, 3> s{std::abs(v[0]), std::abs(v[1]), std::abs(v[2])};
    std::sort(s.begin(), s.end());
    return s;
}

}  // namespace

TEST_CASE("problem construction and validation") {
    SopDesign design{{0.5, 0.3, 0.2}, 750.0};
    QuadLossModel model = typical_model();
    DispatchProblem p = make_dispatch_problem(design, model, 0.01);
    CHECK(p.big_m == doctest::Approx(2.0 * 1.01 * 750.0));
    CHECK_NOTHROW(validate_problem(p));

    SUBCASE("kappa out of range") {
        p.kappa = -0.01;
        CHECK_THROWS_AS(validate_problem(p), ValidationError);
        p.kappa = 1.0;
        CHECK_THROWS_AS(validate_problem(p), ValidationError);
    }
    SUBCASE("big_m too small") {
        p.big_m = 1.9 * 750.0;
        CHECK_THROWS_AS(validate_problem(p), ValidationError);
    }
    SUBCASE("asymmetric loss matrix") {
        p.loss_model.Q(0, 1) += 1.0;
        CHECK_THROWS_AS(validate_problem(p), ValidationError);
    }
    SUBCASE("indefinite loss matrix") {
        p.loss_model.Q(0, 0) = -1.0;
        CHECK_THROWS_AS(validate_problem(p), ValidationError);
    }
}

TEST_CASE("optimum agrees with independent grid search") {
    for (double kappa : {0.0, 0.02}) {
        CAPTURE(kappa);
        SopDesign design{{0.4, 0.4, 0.2}, 750.0};
        QuadLossModel model = typical_model();
        DispatchProblem problem = make_dispatch_problem(design, model, kappa);

        DispatchSolution best = solve_enumerate(problem);
        CHECK(validate_solution(problem, best).empty());

        auto ref = oracles::grid_dispatch(model.Q, model.q, model.c, design.alpha,
                                          design.p_plus_kva, kappa);
        // A feasible grid point can never beat the exact solver, and the grid
        // gets close enough to expose a solver stuck in the wrong basin.
        CHECK(best.loss_total <= ref.objective + 1e-9);
        CHECK(best.loss_total >= ref.objective - 0.05);

        DispatchSolution frozen = solve_fixed_state(problem, SelectorState::identity());
        CHECK(validate_solution(problem, frozen).empty());
        CHECK(best.loss_total <= frozen.loss_total + 1e-12);
    }
}

TEST_CASE("branch and bound equals exhaustive enumeration") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        // random PSD curvature at feeder scale, random slopes, random design
        Eigen::Matrix3d m;
        for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = (u(rng) - 0.5) * 1e-3;
        Eigen::Matrix3d q_mat = m.transpose() * m;
        Eigen::Vector3d q_lin((u(rng) - 0.5) * 0.2, (u(rng) - 0.5) * 0.2, (u(rng) - 0.5) * 0.2);
        QuadLossModel model = make_model(q_mat, q_lin, 100.0 + 200.0 * u(rng));

        double a = u(rng), b = u(rng);
        if (a > b) std::swap(a, b);
        SopDesign design{{a, b - a, 1.0 - b}, 750.0};
        DispatchProblem problem = make_dispatch_problem(design, model, 0.01 + 0.02 * u(rng));

        DispatchSolution exact = solve_enumerate(problem);
        DispatchSolution bb = solve_micp(problem);
        CAPTURE(trial);
        CHECK(std::abs(bb.loss_total - exact.loss_total) <= 1e-8 * design.p_plus_kva);
        CHECK(bb.mip_gap_rel <= 1e-4);
        CHECK(bb.gap_reached);
        CHECK(validate_solution(problem, bb).empty());
        CHECK(validate_solution(problem, exact).empty());
        CHECK(bb.nodes_explored <= 41);  // 1+3+9+27 tree nodes plus the seed
    }
}

TEST_CASE("selector freedom never hurts and often helps") {
    SopDesign design{{0.5, 0.3, 0.2}, 750.0};
    QuadLossModel model = fitted_33bus_model();
    DispatchProblem problem = make_dispatch_problem(design, model, 0.01);

    DispatchSolution free_sol = solve_micp(problem);
    DispatchSolution frozen = solve_fixed_state(problem, SelectorState::identity());
    CHECK(free_sol.loss_total <= frozen.loss_total + 1e-12);

    problem.fixed_state = SelectorState::identity();
    DispatchSolution via_flag = solve_micp(problem);
    CHECK(via_flag.state == SelectorState::identity());
    CHECK(via_flag.loss_total == doctest::Approx(frozen.loss_total).epsilon(1e-15));
    CHECK(solve_enumerate(problem).state == SelectorState::identity());
}

TEST_CASE("objective is invariant under feeder relabeling") {
    SopDesign design{{0.5, 0.25, 0.25}, 750.0};
    QuadLossModel model = fitted_33bus_model();
    DispatchProblem problem = make_dispatch_problem(design, model, 0.01);
    DispatchSolution base = solve_micp(problem);

    // cycle feeders 1->2->3->1
    Eigen::Matrix3d perm = Eigen::Matrix3d::Zero();
    perm(1, 0) = perm(2, 1) = perm(0, 2) = 1.0;
    QuadLossModel rolled = make_model(perm * model.Q * perm.transpose(), perm * model.q, model.c);
    DispatchProblem rolled_problem = make_dispatch_problem(design, rolled, 0.01);
    DispatchSolution rolled_sol = solve_micp(rolled_problem);

    CHECK(rolled_sol.loss_total == doctest::Approx(base.loss_total).epsilon(1e-10));
    CHECK(sorted_abs(rolled_sol.p_inj)[0] == doctest::Approx(sorted_abs(base.p_inj)[0]).epsilon(1e-6));
    CHECK(sorted_abs(rolled_sol.p_inj)[2] == doctest::Approx(sorted_abs(base.p_inj)[2]).epsilon(1e-6));
}

TEST_CASE("solution bookkeeping invariants") {
    SopDesign design{{0.4, 0.4, 0.2}, 750.0};
    DispatchProblem problem = make_dispatch_problem(design, fitted_33bus_model(), 0.01);
    DispatchSolution sol = solve_micp(problem);

    CHECK(sol.p_dc[0] + sol.p_dc[1] + sol.p_dc[2] == doctest::Approx(0.0).scale(750.0));
    for (int j = 0; j < 3; ++j) {
        CHECK(sol.z[j][0] + sol.z[j][1] == 1);
        CHECK(sol.z[j][0] == (sol.p_dc[j] >= 0.0 ? 1 : 0));
        CHECK(std::abs(sol.p_ac_sigma[j]) <= design.alpha[j] * design.p_plus_kva + 1e-6);
        // converter loss branch matches the sign
        double gamma = sol.p_dc[j] >= 0.0 ? 1.01 : 0.99;
        CHECK(sol.p_ac_sigma[j] == doctest::Approx(gamma * sol.p_dc[j]).scale(1.0));
    }
    CHECK(sol.loss_total == doctest::Approx(sol.loss_network + sol.loss_converters));
    CHECK(sol.cone_residual <= 1e-5);
    CHECK(sol.kkt_residual <= 1e-8);
    CHECK(sol.tau >= 0.0);

    nlohmann::json doc = solution_to_json(sol);
    CHECK(doc.at("state").get<std::string>() == sol.state.label());
    CHECK(doc.at("loss_total_kw").get<double>() == sol.loss_total);
    CHECK(doc.at("p_inj_kw").size() == 3);
    CHECK(doc.at("z").size() == 3);
}

TEST_CASE("independent constraint audit flags seeded defects") {
    SopDesign design{{0.5, 0.3, 0.2}, 750.0};
    DispatchProblem problem = make_dispatch_problem(design, fitted_33bus_model(), 0.01);
    DispatchSolution good = solve_micp(problem);
    REQUIRE(validate_solution(problem, good).empty());
    REQUIRE(std::abs(good.p_dc[0]) > 1.0);  // defect seeding below assumes flow

    auto joined = [&](const DispatchSolution& sol) {
        std::string all;
        for (const auto& v : validate_solution(problem, sol)) all += v + "\n";
        return all;
    };

    SUBCASE("dc balance") {
        DispatchSolution bad = good;
        bad.p_dc[0] += 5.0;
        CHECK(joined(bad).find("dc-node power balance") != std::string::npos);
    }
    SUBCASE("indicator sum") {
        DispatchSolution bad = good;
        bad.z[0][0] = bad.z[0][1] = 1;
        CHECK(joined(bad).find("exactly one active loss branch") != std::string::npos);
    }
    SUBCASE("wrong loss branch") {
        DispatchSolution bad = good;
        bad.z[0][0] = 1 - bad.z[0][0];
        bad.z[0][1] = 1 - bad.z[0][1];
        std::string msg = joined(bad);
        CHECK(msg.find("branch balance violated") != std::string::npos);
    }
    SUBCASE("port off the selector") {
        DispatchSolution bad = good;
        int off = bad.state.b[0][0] == 0 ? 0 : 1;  // a feeder converter 1 is NOT on
        bad.p_ac[0][off] += 10.0;
        std::string msg = joined(bad);
        CHECK(msg.find("selector-gated rating") != std::string::npos);
    }
    SUBCASE("cone left slack") {
        DispatchSolution bad = good;
        bad.tau += 1.0;
        CHECK(joined(bad).find("cone not tight") != std::string::npos);
    }
    SUBCASE("invalid state matrix") {
        DispatchSolution bad = good;
        bad.state.b[1] = {0, 0, 0};
        CHECK(joined(bad).find("selector state invalid") != std::string::npos);
    }
}

TEST_CASE("node budget exhaustion reports an honest gap") {
    SopDesign design{{0.4, 0.4, 0.2}, 750.0};
    DispatchProblem problem = make_dispatch_problem(design, fitted_33bus_model(), 0.01);
    DispatchSolution full = solve_micp(problem);
    DispatchSolution starved = solve_micp(problem, 1);

    CHECK(starved.state == SelectorState::identity());  // seed incumbent survives
    CHECK(validate_solution(problem, starved).empty());
    CHECK(starved.nodes_explored == 1);
    CHECK(starved.mip_gap_abs >= full.mip_gap_abs);
    CHECK(starved.loss_total >= full.loss_total - 1e-12);
    // The reported gap must cover the distance to the true optimum.
    CHECK(starved.loss_total - full.loss_total <= starved.mip_gap_abs + 1e-9);
}

TEST_CASE("zero converter loss coefficient") {
    SopDesign design{{0.5, 0.3, 0.2}, 750.0};
    DispatchProblem problem = make_dispatch_problem(design, typical_model(), 0.0);
    DispatchSolution sol = solve_micp(problem);
    CHECK(sol.loss_converters == 0.0);
    CHECK(validate_solution(problem, sol).empty());
    for (int j = 0; j < 3; ++j) CHECK(sol.p_ac_sigma[j] == doctest::Approx(sol.p_dc[j]));
}

TEST_CASE("degenerate designs dispatch cleanly") {
    // one converter of zero size
    SopDesign design{{0.5, 0.5, 0.0}, 750.0};
    DispatchProblem problem = make_dispatch_problem(design, fitted_33bus_model(), 0.01);
    DispatchSolution sol = solve_micp(problem);
    CHECK(validate_solution(problem, sol).empty());
    CHECK(std::abs(sol.p_dc[2]) <= 1e-9);

    // the all-in-one design can move nothing anywhere
    SopDesign lump{{1.0, 0.0, 0.0}, 750.0};
    DispatchProblem lump_problem = make_dispatch_problem(lump, fitted_33bus_model(), 0.01);
    DispatchSolution idle = solve_micp(lump_problem);
    CHECK(validate_solution(lump_problem, idle).empty());
    CHECK(std::abs(idle.p_inj[0]) + std::abs(idle.p_inj[1]) + std::abs(idle.p_inj[2]) <= 1e-9);
    CHECK(idle.loss_total == doctest::Approx(lump_problem.loss_model.c).epsilon(1e-12));
}
