#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "sopflex/qp.hpp"

using namespace sopflex;

namespace {

QpProblem empty_problem(int n) {
    QpProblem qp;
    qp.p = Eigen::MatrixXd::Zero(n, n);
    qp.g = Eigen::VectorXd::Zero(n);
    qp.a_eq = Eigen::MatrixXd::Zero(0, n);
    qp.b_eq = Eigen::VectorXd::Zero(0);
    qp.a_in = Eigen::MatrixXd::Zero(0, n);
    qp.b_in = Eigen::VectorXd::Zero(0);
    return qp;
}

// Brute-force reference: dense grid over a box known to contain the feasible
// set, feasibility-filtered. Only meaningful as "no feasible point beats the
// solver by more than the grid resolution allows".
double grid_best(const QpProblem& qp, double lo, double hi, int steps) {
    const int n = static_cast<int>(qp.g.size());
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> idx(n, 0);
    for (;;) {
        Eigen::VectorXd x(n);
        for (int i = 0; i < n; ++i) x(i) = lo + (hi - lo) * idx[i] / (steps - 1);
        bool ok = (qp.a_in.rows() == 0 || ((qp.a_in * x - qp.b_in).array() <= 1e-9).all()) &&
                  (qp.a_eq.rows() == 0 || ((qp.a_eq * x - qp.b_eq).array().abs() <= 1e-6).all());
        if (ok) best = std::min(best, 0.5 * x.dot(qp.p * x) + qp.g.dot(x));
        int k = 0;
        while (k < n && ++idx[k] == steps) idx[k++] = 0;
        if (k == n) break;
    }
    return best;
}

}  // namespace

TEST_CASE("unconstrained minimum of a separable quadratic") {
    QpProblem qp = empty_problem(2);
    qp.p << 2, 0, 0, 4;  // actually 0.5 x'Px = x1^2 + 2 x2^2
    qp.g << -2, -8;
    QpResult r = solve_qp(qp);
    REQUIRE(r.feasible);
    CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.x(1) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.objective == doctest::Approx(-9.0).epsilon(1e-12));
    CHECK(r.kkt_residual < 1e-10);
}

TEST_CASE("single equality: Lagrange closed form") {
    // min x1^2 + x2^2 s.t. x1 + x2 = 1 -> (0.5, 0.5).
    QpProblem qp = empty_problem(2);
    qp.p = 2.0 * Eigen::MatrixXd::Identity(2, 2);
    qp.a_eq = Eigen::MatrixXd::Ones(1, 2);
    qp.b_eq = Eigen::VectorXd::Ones(1);
    QpResult r = solve_qp(qp);
    REQUIRE(r.feasible);
    CHECK(r.x(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.x(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("active bound clamps the solution") {
    // min (x-3)^2 s.t. x <= 1.
    QpProblem qp = empty_problem(1);
    qp.p = 2.0 * Eigen::MatrixXd::Identity(1, 1);
    qp.g = -6.0 * Eigen::VectorXd::Ones(1);
    qp.a_in = Eigen::MatrixXd::Ones(1, 1);
    qp.b_in = Eigen::VectorXd::Ones(1);
    QpResult r = solve_qp(qp);
    REQUIRE(r.feasible);
    CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("semidefinite objective with a flat valley") {
    // P = [[2,-2],[-2,2]] is PSD with null direction (1,1); the linear term
    // g = (1,1) pushes along the valley, so bounds decide the optimum:
    // minimize (x1-x2)^2 + x1 + x2 over the box [-1,1]^2 -> x = (-1,-1).
    QpProblem qp = empty_problem(2);
    qp.p << 2, -2, -2, 2;
    qp.g << 1, 1;
    qp.a_in.resize(4, 2);
    qp.a_in << 1, 0, -1, 0, 0, 1, 0, -1;
    qp.b_in = Eigen::VectorXd::Ones(4);
    QpResult r = solve_qp(qp);
    REQUIRE(r.feasible);
    CHECK(r.x(0) == doctest::Approx(-1.0).epsilon(1e-10));
    CHECK(r.x(1) == doctest::Approx(-1.0).epsilon(1e-10));
    CHECK(r.objective == doctest::Approx(-2.0).epsilon(1e-10));
}

TEST_CASE("infeasible constraint sets are reported, not solved") {
    QpProblem qp = empty_problem(1);
    qp.p = Eigen::MatrixXd::Identity(1, 1);
    qp.a_in.resize(2, 1);
    qp.a_in << 1, -1;
    qp.b_in.resize(2);
    qp.b_in << -2, 1;  // x <= -2 and x >= -1
    CHECK_FALSE(solve_qp(qp).feasible);

    QpProblem eq = empty_problem(1);
    eq.p = Eigen::MatrixXd::Identity(1, 1);
    eq.a_eq.resize(2, 1);
    eq.a_eq << 1, 1;
    eq.b_eq.resize(2);
    eq.b_eq << 0, 1;  // x == 0 and x == 1
    CHECK_FALSE(solve_qp(eq).feasible);
}

TEST_CASE("duplicated constraints do not upset the face enumeration") {
    QpProblem qp = empty_problem(2);
    qp.p = 2.0 * Eigen::MatrixXd::Identity(2, 2);
    qp.g << -2, -2;
    qp.a_in.resize(4, 2);
    qp.a_in << 1, 0, 1, 0, 1, 1, 1, 1;  // x1 <= 0 twice, x1+x2 <= 1 twice
    qp.b_in.resize(4);
    qp.b_in << 0, 0, 1, 1;
    QpResult r = solve_qp(qp);
    REQUIRE(r.feasible);
    CHECK(r.x(0) == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(r.x(1) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("random convex programs agree with grid search") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + (trial % 2);
        Eigen::MatrixXd m(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m(i, j) = u(rng);

        QpProblem qp = empty_problem(n);
        qp.p = m.transpose() * m + 0.1 * Eigen::MatrixXd::Identity(n, n);
        for (int i = 0; i < n; ++i) qp.g(i) = u(rng);
        // Box plus one diagonal cut.
        qp.a_in.resize(2 * n + 1, n);
        qp.b_in.resize(2 * n + 1);
        qp.a_in.setZero();
        for (int i = 0; i < n; ++i) {
            qp.a_in(2 * i, i) = 1.0;
            qp.b_in(2 * i) = 1.0;
            qp.a_in(2 * i + 1, i) = -1.0;
            qp.b_in(2 * i + 1) = 1.0;
        }
        qp.a_in.row(2 * n).setOnes();
        qp.b_in(2 * n) = 0.5;

        QpResult r = solve_qp(qp);
        REQUIRE(r.feasible);
        CHECK(((qp.a_in * r.x - qp.b_in).array() <= 1e-9).all());
        double ref = grid_best(qp, -1.0, 1.0, 21);
        CHECK(r.objective <= ref + 1e-9);  // no grid point beats the solver
        CHECK(r.objective >= ref - 0.2);   // and the solver is in the right basin
        CHECK(r.kkt_residual < 1e-8);
    }
}

TEST_CASE("equality-constrained problem with redundant but consistent rows") {
    // x1 + x2 = 1 stated twice; singular KKT system but a consistent one.
    QpProblem qp = empty_problem(2);
    qp.p = 2.0 * Eigen::MatrixXd::Identity(2, 2);
    qp.a_eq.resize(2, 2);
    qp.a_eq << 1, 1, 1, 1;
    qp.b_eq.resize(2);
    qp.b_eq << 1, 1;
    QpResult r = solve_qp(qp);
    REQUIRE(r.feasible);
    CHECK(r.x(0) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(r.x(1) == doctest::Approx(0.5).epsilon(1e-10));
}
