#include "sopflex/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <queue>
#include <vector>

#include <Eigen/Dense>

#include "sopflex/errors.hpp"

namespace sopflex {

using cplx = std::complex<double>;

void InjectionSet::add(int bus_id, double p_kw, double q_kvar) {
    for (auto& e : entries_) {
        if (e.bus == bus_id) {
            e.p_kw += p_kw;
            e.q_kvar += q_kvar;
            return;
        }
    }
    entries_.push_back({bus_id, p_kw, q_kvar});
}

double InjectionSet::p_kw(int bus_id) const {
    for (const auto& e : entries_)
        if (e.bus == bus_id) return e.p_kw;
    return 0.0;
}

double InjectionSet::q_kvar(int bus_id) const {
    for (const auto& e : entries_)
        if (e.bus == bus_id) return e.q_kvar;
    return 0.0;
}

void InjectionSet::check_buses(const NetworkModel& net) const {
    for (const auto& e : entries_)
        if (net.bus_index(e.bus) < 0)
            throw ValidationError("injection references unknown bus " + std::to_string(e.bus));
}

namespace {

// Per-unit admittance matrix over closed branches. Branch impedances are in
// ohms on the receiving bus voltage base.
Eigen::MatrixXcd build_ybus(const NetworkModel& net) {
    const int n = static_cast<int>(net.buses.size());
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& br : net.branches) {
        if (br.status != BranchStatus::closed) continue;
        int i = net.bus_index(br.from);
        int j = net.bus_index(br.to);
        double v_kv = net.buses[j].v_base_kv;
        double z_base = v_kv * v_kv * 1000.0 / net.s_base_kva;  // ohm
        cplx z(br.r_ohm / z_base, br.x_ohm / z_base);
        if (std::abs(z) == 0.0)
            throw ValidationError("zero-impedance closed branch " + std::to_string(br.from) + "-" +
                                  std::to_string(br.to));
        cplx ya = 1.0 / z;
        y(i, i) += ya;
        y(j, j) += ya;
        y(i, j) -= ya;
        y(j, i) -= ya;
    }
    return y;
}

// Net scheduled injection per bus (generation-like positive), pu.
Eigen::VectorXcd scheduled_injection(const NetworkModel& net, const InjectionSet& inj) {
    const int n = static_cast<int>(net.buses.size());
    Eigen::VectorXcd s = Eigen::VectorXcd::Zero(n);
    for (int i = 0; i < n; ++i) {
        const Bus& b = net.buses[i];
        s(i) = cplx(-b.p_load_kw, -b.q_load_kvar);
    }
    for (const auto& e : inj.entries()) {
        int i = net.bus_index(e.bus);
        s(i) += cplx(e.p_kw, e.q_kvar);
    }
    return s / net.s_base_kva;
}

// Complex power injections implied by a voltage profile: S_i = V_i (Y V)_i*.
Eigen::VectorXcd calc_injection(const Eigen::MatrixXcd& ybus, const Eigen::VectorXcd& v) {
    return v.array() * (ybus * v).array().conjugate();
}

double max_mismatch(const NetworkModel& net, const Eigen::VectorXcd& s_spec,
                    const Eigen::VectorXcd& s_calc, int slack) {
    double m = 0.0;
    for (int i = 0; i < s_spec.size(); ++i) {
        if (i == slack) continue;
        cplx d = s_spec(i) - s_calc(i);
        m = std::max(m, std::max(std::abs(d.real()), std::abs(d.imag())));
    }
    return m;
}

double branch_loss_kw(const NetworkModel& net, const Eigen::VectorXcd& v) {
    double loss_pu = 0.0;
    for (const auto& br : net.branches) {
        if (br.status != BranchStatus::closed) continue;
        int i = net.bus_index(br.from);
        int j = net.bus_index(br.to);
        double v_kv = net.buses[j].v_base_kv;
        double z_base = v_kv * v_kv * 1000.0 / net.s_base_kva;
        cplx z(br.r_ohm / z_base, br.x_ohm / z_base);
        cplx cur = (v(i) - v(j)) / z;
        loss_pu += (br.r_ohm / z_base) * std::norm(cur);
    }
    return loss_pu * net.s_base_kva;
}

int slack_index(const NetworkModel& net) {
    for (size_t i = 0; i < net.buses.size(); ++i)
        if (net.buses[i].kind == BusKind::slack) return static_cast<int>(i);
    throw ValidationError("network has no slack bus");
}

PowerFlowSolution package_solution(const NetworkModel& net, const InjectionSet& inj,
                                   const Eigen::MatrixXcd& ybus, const Eigen::VectorXcd& v,
                                   int iterations, std::vector<double> history) {
    const int n = static_cast<int>(net.buses.size());
    const int slack = slack_index(net);
    PowerFlowSolution sol;
    sol.v_mag.resize(n);
    sol.v_ang.resize(n);
    for (int i = 0; i < n; ++i) {
        sol.v_mag[i] = std::abs(v(i));
        sol.v_ang[i] = std::arg(v(i));
    }
    Eigen::VectorXcd s_calc = calc_injection(ybus, v);
    const Bus& sb = net.buses[slack];
    // Balancing generation at the slack bus, beyond its own scheduled
    // load/injection.
    sol.p_slack_kw = s_calc(slack).real() * net.s_base_kva - inj.p_kw(sb.id) + sb.p_load_kw;
    sol.q_slack_kvar = s_calc(slack).imag() * net.s_base_kva - inj.q_kvar(sb.id) + sb.q_load_kvar;
    sol.total_loss_kw = branch_loss_kw(net, v);
    sol.iterations = iterations;
    sol.mismatch_history = std::move(history);
    sol.max_mismatch_pu = sol.mismatch_history.empty() ? 0.0 : sol.mismatch_history.back();
    return sol;
}

}  // namespace

PowerFlowSolution solve_newton(const NetworkModel& net, const InjectionSet& inj, double tol,
                               int max_iter) {
    if (!(tol > 0.0)) throw ValidationError("tolerance must be positive");
    inj.check_buses(net);
    const int n = static_cast<int>(net.buses.size());
    const int slack = slack_index(net);
    Eigen::MatrixXcd ybus = build_ybus(net);
    Eigen::VectorXcd s_spec = scheduled_injection(net, inj);

    // Unknown ordering: angles of all non-slack buses, then magnitudes of all
    // non-slack (PQ) buses.
    std::vector<int> pos(n, -1);
    std::vector<int> free_bus;
    for (int i = 0; i < n; ++i) {
        if (i == slack) continue;
        pos[i] = static_cast<int>(free_bus.size());
        free_bus.push_back(i);
    }
    const int m = static_cast<int>(free_bus.size());

    Eigen::VectorXd vm = Eigen::VectorXd::Ones(n);   // flat start
    Eigen::VectorXd va = Eigen::VectorXd::Zero(n);
    std::vector<double> history;

    auto voltages = [&]() {
        Eigen::VectorXcd v(n);
        for (int i = 0; i < n; ++i) v(i) = std::polar(vm(i), va(i));
        return v;
    };

    for (int iter = 0;; ++iter) {
        Eigen::VectorXcd v = voltages();
        Eigen::VectorXcd s_calc = calc_injection(ybus, v);
        double mis = max_mismatch(net, s_spec, s_calc, slack);
        history.push_back(mis);
        if (!std::isfinite(mis))
            throw ConvergenceError("newton diverged (non-finite mismatch) at iteration " +
                                   std::to_string(iter));
        if (mis <= tol)
            return package_solution(net, inj, ybus, v, iter, std::move(history));
        if (iter >= max_iter)
            throw ConvergenceError("newton did not converge in " + std::to_string(max_iter) +
                                   " iterations (mismatch " + std::to_string(mis) + " pu)");

        // Polar-form Jacobian, rows [dP; dQ], columns [dtheta; dVmag].
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * m, 2 * m);
        for (int a = 0; a < m; ++a) {
            int i = free_bus[a];
            double pi = s_calc(i).real();
            double qi = s_calc(i).imag();
            double gii = ybus(i, i).real();
            double bii = ybus(i, i).imag();
            for (int b = 0; b < m; ++b) {
                int j = free_bus[b];
                if (i == j) {
                    jac(a, b) = -qi - bii * vm(i) * vm(i);
                    jac(a, m + b) = pi / vm(i) + gii * vm(i);
                    jac(m + a, b) = pi - gii * vm(i) * vm(i);
                    jac(m + a, m + b) = qi / vm(i) - bii * vm(i);
                } else {
                    double gij = ybus(i, j).real();
                    double bij = ybus(i, j).imag();
                    if (gij == 0.0 && bij == 0.0) continue;
                    double tij = va(i) - va(j);
                    double ct = std::cos(tij), st = std::sin(tij);
                    double vivj = vm(i) * vm(j);
                    jac(a, b) = vivj * (gij * st - bij * ct);
                    jac(a, m + b) = vm(i) * (gij * ct + bij * st);
                    jac(m + a, b) = -vivj * (gij * ct + bij * st);
                    jac(m + a, m + b) = vm(i) * (gij * st - bij * ct);
                }
            }
        }

        Eigen::VectorXd rhs(2 * m);
        for (int a = 0; a < m; ++a) {
            int i = free_bus[a];
            rhs(a) = s_spec(i).real() - s_calc(i).real();
            rhs(m + a) = s_spec(i).imag() - s_calc(i).imag();
        }

        Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        if (!lu.isInvertible())
            throw SolverError("singular power-flow Jacobian at iteration " + std::to_string(iter));
        Eigen::VectorXd step = lu.solve(rhs);
        for (int a = 0; a < m; ++a) {
            int i = free_bus[a];
            va(i) += step(a);
            vm(i) += step(m + a);
            if (!(vm(i) > 1e-6))
                throw ConvergenceError("newton diverged (voltage collapse at bus " +
                                       std::to_string(net.buses[i].id) + ", iteration " +
                                       std::to_string(iter) + ")");
        }
    }
}

PowerFlowSolution solve_sweep(const NetworkModel& net, const InjectionSet& inj, double tol,
                              int max_iter) {
    if (!(tol > 0.0)) throw ValidationError("tolerance must be positive");
    inj.check_buses(net);
    const int n = static_cast<int>(net.buses.size());
    const int slack = slack_index(net);

    // Tree rooted at the slack over closed branches.
    struct Edge {
        int child;
        cplx z_pu;
    };
    std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor, branch idx)
    int closed_count = 0;
    for (size_t k = 0; k < net.branches.size(); ++k) {
        const auto& br = net.branches[k];
        if (br.status != BranchStatus::closed) continue;
        ++closed_count;
        int i = net.bus_index(br.from);
        int j = net.bus_index(br.to);
        adj[i].push_back({j, static_cast<int>(k)});
        adj[j].push_back({i, static_cast<int>(k)});
    }
    if (closed_count != n - 1)
        throw ValidationError("sweep solver requires a radial network");

    std::vector<int> parent(n, -1), order;
    std::vector<cplx> z_up(n, cplx(0, 0));  // impedance of branch to parent, pu
    std::vector<double> r_up(n, 0.0);
    std::vector<char> seen(n, 0);
    std::queue<int> work;
    work.push(slack);
    seen[slack] = 1;
    while (!work.empty()) {
        int u = work.front();
        work.pop();
        order.push_back(u);
        for (auto [v_idx, k] : adj[u]) {
            if (seen[v_idx]) continue;
            seen[v_idx] = 1;
            parent[v_idx] = u;
            const auto& br = net.branches[k];
            double v_kv = net.buses[net.bus_index(br.to)].v_base_kv;
            double z_base = v_kv * v_kv * 1000.0 / net.s_base_kva;
            z_up[v_idx] = cplx(br.r_ohm / z_base, br.x_ohm / z_base);
            r_up[v_idx] = br.r_ohm / z_base;
            work.push(v_idx);
        }
    }
    if (order.size() != static_cast<size_t>(n))
        throw ValidationError("sweep solver requires a radial network");

    Eigen::MatrixXcd ybus = build_ybus(net);
    Eigen::VectorXcd s_spec = scheduled_injection(net, inj);
    Eigen::VectorXcd v = Eigen::VectorXcd::Ones(n);
    std::vector<double> history;

    for (int iter = 0;; ++iter) {
        Eigen::VectorXcd s_calc = calc_injection(ybus, v);
        double mis = max_mismatch(net, s_spec, s_calc, slack);
        history.push_back(mis);
        if (!std::isfinite(mis))
            throw ConvergenceError("sweep diverged (non-finite mismatch) at iteration " +
                                   std::to_string(iter));
        if (mis <= tol) {
            PowerFlowSolution sol = package_solution(net, inj, ybus, v, iter, std::move(history));
            // Loss re-accumulated from the sweep's own branch currents.
            double loss_pu = 0.0;
            for (int i = 0; i < n; ++i) {
                if (parent[i] < 0) continue;
                cplx cur = (v(parent[i]) - v(i)) / z_up[i];
                loss_pu += r_up[i] * std::norm(cur);
            }
            sol.total_loss_kw = loss_pu * net.s_base_kva;
            return sol;
        }
        if (iter >= max_iter)
            throw ConvergenceError("sweep did not converge in " + std::to_string(max_iter) +
                                   " iterations (mismatch " + std::to_string(mis) + " pu)");

        // Backward: accumulate branch currents from the leaves.
        std::vector<cplx> flow(n, cplx(0, 0));  // current through branch to parent
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            int u = *it;
            if (u == slack) continue;
            cplx drawn = -std::conj(s_spec(u) / v(u));
            for (auto [c, k] : adj[u])
                if (parent[c] == u) drawn += flow[c];
            flow[u] = drawn;
        }
        // Forward: update voltages from the slack down.
        for (int u : order) {
            if (u == slack) continue;
            v(u) = v(parent[u]) - z_up[u] * flow[u];
            if (!(std::abs(v(u)) > 1e-6))
                throw ConvergenceError("sweep diverged (voltage collapse at bus " +
                                       std::to_string(net.buses[u].id) + ")");
        }
    }
}

Eigen::MatrixXcd voltage_jacobian(const NetworkModel& net, const InjectionSet& base_inj,
                                  const std::vector<int>& at_buses, double tol, int max_iter) {
    const int n = static_cast<int>(net.buses.size());
    const int slack = slack_index(net);
    PowerFlowSolution base = solve_newton(net, base_inj, tol, max_iter);

    Eigen::MatrixXcd ybus = build_ybus(net);
    Eigen::VectorXcd v(n);
    for (int i = 0; i < n; ++i) v(i) = base.voltage(i);
    Eigen::VectorXcd s_calc = calc_injection(ybus, v);

    std::vector<int> free_bus;
    std::vector<int> pos(n, -1);
    for (int i = 0; i < n; ++i) {
        if (i == slack) continue;
        pos[i] = static_cast<int>(free_bus.size());
        free_bus.push_back(i);
    }
    const int m = static_cast<int>(free_bus.size());

    // Same polar Jacobian as the Newton iteration, evaluated at the solution.
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * m, 2 * m);
    for (int a = 0; a < m; ++a) {
        int i = free_bus[a];
        double vmi = std::abs(v(i));
        double pi = s_calc(i).real(), qi = s_calc(i).imag();
        double gii = ybus(i, i).real(), bii = ybus(i, i).imag();
        for (int b = 0; b < m; ++b) {
            int j = free_bus[b];
            if (i == j) {
                jac(a, b) = -qi - bii * vmi * vmi;
                jac(a, m + b) = pi / vmi + gii * vmi;
                jac(m + a, b) = pi - gii * vmi * vmi;
                jac(m + a, m + b) = qi / vmi - bii * vmi;
            } else {
                double gij = ybus(i, j).real(), bij = ybus(i, j).imag();
                if (gij == 0.0 && bij == 0.0) continue;
                double tij = std::arg(v(i)) - std::arg(v(j));
                double ct = std::cos(tij), st = std::sin(tij);
                double vivj = vmi * std::abs(v(j));
                jac(a, b) = vivj * (gij * st - bij * ct);
                jac(a, m + b) = vmi * (gij * ct + bij * st);
                jac(m + a, b) = -vivj * (gij * ct + bij * st);
                jac(m + a, m + b) = vmi * (gij * st - bij * ct);
            }
        }
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) throw SolverError("singular Jacobian at base operating point");

    Eigen::MatrixXcd sens = Eigen::MatrixXcd::Zero(n, static_cast<int>(at_buses.size()));
    for (size_t c = 0; c < at_buses.size(); ++c) {
        int bi = net.bus_index(at_buses[c]);
        if (bi < 0)
            throw ValidationError("jacobian requested at unknown bus " + std::to_string(at_buses[c]));
        if (bi == slack) continue;  // slack absorbs; sensitivity is zero
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * m);
        rhs(pos[bi]) = 1.0 / net.s_base_kva;  // 1 kW in pu
        Eigen::VectorXd d = lu.solve(rhs);
        for (int a = 0; a < m; ++a) {
            int i = free_bus[a];
            double dva = d(a);
            double dvm = d(m + a);
            // dV = e^{j theta} dVmag + j V dtheta
            sens(i, static_cast<int>(c)) =
                std::polar(1.0, std::arg(v(i))) * dvm + cplx(0, 1) * v(i) * dva;
        }
    }
    return sens;
}

Eigen::MatrixXcd voltage_jacobian(const NetworkModel& net, const InjectionSet& base_inj) {
    if (!net.has_sop_buses())
        throw ValidationError("network has no sop_buses; pass target buses explicitly");
    return voltage_jacobian(net, base_inj,
                            {net.sop_buses[0], net.sop_buses[1], net.sop_buses[2]});
}

}  // namespace sopflex
