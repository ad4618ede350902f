#pragma once

#include <Eigen/Dense>

namespace sopflex {

// Small dense convex quadratic program:
//   minimize 0.5 x'Px + g'x
//   s.t.     a_eq x == b_eq,  a_in x <= b_in
// P must be symmetric positive semidefinite and the feasible set bounded.
struct QpProblem {
    Eigen::MatrixXd p;
    Eigen::VectorXd g;
    Eigen::MatrixXd a_eq;
    Eigen::VectorXd b_eq;
    Eigen::MatrixXd a_in;
    Eigen::VectorXd b_in;
};

struct QpResult {
    bool feasible = false;
    Eigen::VectorXd x;
    double objective = 0.0;
    double kkt_residual = 0.0;  // inf-norm of the winning face's KKT equations
};

// Exact solve by exhaustive face enumeration: every subset of at most n
// inequalities is treated as active, the equality-constrained stationary
// point is computed, and the best primal-feasible candidate wins. Sized for
// n <= 4 and a dozen inequalities; cost grows combinatorially beyond that.
QpResult solve_qp(const QpProblem& qp, double feas_tol = 1e-9);

}  // namespace sopflex
