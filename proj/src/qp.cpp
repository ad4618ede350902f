#include "sopflex/qp.hpp"

#include <vector>

#include "sopflex/errors.hpp"

namespace sopflex {

namespace {

// Next k-subset of {0..m-1} in lexicographic order; returns false when done.
bool next_subset(std::vector<int>& idx, int m) {
    int k = static_cast<int>(idx.size());
    for (int i = k - 1; i >= 0; --i) {
        if (idx[i] < m - k + i) {
            ++idx[i];
            for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
            return true;
        }
    }
    return false;
}

}  // namespace

QpResult solve_qp(const QpProblem& qp, double feas_tol) {
    const int n = static_cast<int>(qp.p.rows());
    const int m_eq = static_cast<int>(qp.a_eq.rows());
    const int m_in = static_cast<int>(qp.a_in.rows());
    if (qp.p.cols() != n || qp.g.size() != n ||
        (m_eq > 0 && qp.a_eq.cols() != n) || (m_in > 0 && qp.a_in.cols() != n))
        throw ValidationError("inconsistent QP dimensions");

    auto objective = [&](const Eigen::VectorXd& x) {
        return 0.5 * x.dot(qp.p * x) + qp.g.dot(x);
    };
    auto primal_feasible = [&](const Eigen::VectorXd& x) {
        for (int i = 0; i < m_eq; ++i)
            if (std::abs(qp.a_eq.row(i).dot(x) - qp.b_eq(i)) > feas_tol) return false;
        for (int i = 0; i < m_in; ++i)
            if (qp.a_in.row(i).dot(x) - qp.b_in(i) > feas_tol) return false;
        return true;
    };

    QpResult best;
    // Active sets of size 0..n. Equalities are always active; a face is a
    // choice of inequalities treated as equalities. The stationary point over
    // each face's affine hull is a KKT solve; singular-but-consistent systems
    // (semidefinite P, redundant rows) still produce valid candidates, while
    // inconsistent ones have no stationary point and are skipped. The global
    // optimum always shows up on some face with a consistent system, at worst
    // a vertex of the optimal face.
    for (int k = 0; k <= std::min(n, m_in); ++k) {
        std::vector<int> idx(k);
        for (int i = 0; i < k; ++i) idx[i] = i;
        bool more = k <= m_in;
        while (more) {
            const int rows = m_eq + k;
            Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + rows, n + rows);
            Eigen::VectorXd rhs(n + rows);
            kkt.topLeftCorner(n, n) = qp.p;
            rhs.head(n) = -qp.g;
            for (int i = 0; i < m_eq; ++i) {
                kkt.block(n + i, 0, 1, n) = qp.a_eq.row(i);
                kkt.block(0, n + i, n, 1) = qp.a_eq.row(i).transpose();
                rhs(n + i) = qp.b_eq(i);
            }
            for (int i = 0; i < k; ++i) {
                kkt.block(n + m_eq + i, 0, 1, n) = qp.a_in.row(idx[i]);
                kkt.block(0, n + m_eq + i, n, 1) = qp.a_in.row(idx[i]).transpose();
                rhs(n + m_eq + i) = qp.b_in(idx[i]);
            }

            Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
            Eigen::VectorXd sol = lu.solve(rhs);
            double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>() +
                           kkt.lpNorm<Eigen::Infinity>() * sol.lpNorm<Eigen::Infinity>();
            double resid = (kkt * sol - rhs).lpNorm<Eigen::Infinity>();
            if (resid <= 1e-10 * scale) {
                Eigen::VectorXd x = sol.head(n);
                if (primal_feasible(x)) {
                    double obj = objective(x);
                    if (!best.feasible || obj < best.objective) {
                        best.feasible = true;
                        best.x = x;
                        best.objective = obj;
                        best.kkt_residual = resid;
                    }
                }
            }
            more = k > 0 && next_subset(idx, m_in);
            if (k == 0) more = false;
        }
    }
    return best;
}

}  // namespace sopflex
