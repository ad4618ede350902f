#include "sopflex/lossmodel.hpp"

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "sopflex/errors.hpp"

namespace sopflex {

using cplx = std::complex<double>;

InjectionSet apply_device_draw(const NetworkModel& net, InjectionSet base,
                               const std::array<double, 3>& draw_kw) {
    if (!net.has_sop_buses())
        throw ValidationError("network has no sop_buses; cannot place device draws");
    for (int j = 0; j < 3; ++j) base.add(net.sop_buses[j], -draw_kw[j], 0.0);
    return base;
}

namespace {

// Symmetrize, clamp marginal negative eigenvalues, factor H'H = Q with H
// upper triangular (QR of the PSD square root).
void repair_and_factor(QuadLossModel& model) {
    Eigen::Matrix3d q_sym = 0.5 * (model.Q + model.Q.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(q_sym);
    Eigen::Vector3d lam = eig.eigenvalues();
    double scale = lam.cwiseAbs().maxCoeff();
    for (int i = 0; i < 3; ++i) {
        if (lam(i) < -1e-9 * scale)
            throw SolverError("fitted loss matrix is indefinite (eigenvalue " +
                              std::to_string(lam(i)) + " kW/kW^2)");
        lam(i) = std::max(lam(i), 0.0);
    }
    model.Q = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
    model.Q = 0.5 * (model.Q + model.Q.transpose());

    Eigen::Matrix3d root = lam.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
    Eigen::HouseholderQR<Eigen::Matrix3d> qr(root);
    Eigen::Matrix3d r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < 3; ++i)
        if (r(i, i) < 0.0) r.row(i) = -r.row(i);
    model.H = r;
}

QuadLossModel fit_sensitivity(const NetworkModel& net, const InjectionSet& base_inj) {
    PowerFlowSolution base = solve_newton(net, base_inj);
    // Columns: dV (pu) per kW injected at each SOP bus. Device draw is the
    // negative of a network injection.
    Eigen::MatrixXcd sens = -voltage_jacobian(net, base_inj);

    QuadLossModel model;
    Eigen::Matrix3d q_acc = Eigen::Matrix3d::Zero();
    Eigen::Vector3d lin = Eigen::Vector3d::Zero();
    double c_acc = 0.0;

    const int n = static_cast<int>(net.buses.size());
    Eigen::VectorXcd v0(n);
    for (int i = 0; i < n; ++i) v0(i) = base.voltage(i);

    for (const auto& br : net.branches) {
        if (br.status != BranchStatus::closed) continue;
        int f = net.bus_index(br.from);
        int t = net.bus_index(br.to);
        double v_kv = net.buses[t].v_base_kv;
        double z_base = v_kv * v_kv * 1000.0 / net.s_base_kva;
        cplx y = 1.0 / cplx(br.r_ohm / z_base, br.x_ohm / z_base);
        double r_pu = br.r_ohm / z_base;

        // Branch current as an affine function of the draw: I = a + c'd.
        cplx a = y * (v0(f) - v0(t));
        Eigen::Vector3cd cv = y * (sens.row(f) - sens.row(t)).transpose();

        c_acc += r_pu * std::norm(a);
        for (int j = 0; j < 3; ++j) {
            lin(j) += 2.0 * r_pu * (std::conj(a) * cv(j)).real();
            for (int k = 0; k < 3; ++k)
                q_acc(j, k) += r_pu * (cv(j) * std::conj(cv(k))).real();
        }
    }

    model.Q = q_acc * net.s_base_kva;
    model.q = lin * net.s_base_kva;
    model.c = c_acc * net.s_base_kva;
    return model;
}

QuadLossModel fit_sampled(const NetworkModel& net, const InjectionSet& base_inj,
                          const std::array<double, 3>& box_kw) {
    constexpr int kGrid = 5;
    std::vector<std::array<double, 3>> points;
    for (int i = 0; i < kGrid; ++i)
        for (int j = 0; j < kGrid; ++j)
            for (int k = 0; k < kGrid; ++k) {
                auto coord = [&](int idx, double half) {
                    return half * (2.0 * idx / (kGrid - 1) - 1.0);
                };
                points.push_back({coord(i, box_kw[0]), coord(j, box_kw[1]), coord(k, box_kw[2])});
            }

    // Regress on normalized coordinates x = d/box for conditioning.
    std::array<double, 3> s{};
    for (int j = 0; j < 3; ++j) s[j] = box_kw[j] > 0.0 ? box_kw[j] : 1.0;

    const int rows = static_cast<int>(points.size());
    Eigen::MatrixXd a(rows, 10);
    Eigen::VectorXd y(rows);
    for (int r = 0; r < rows; ++r) {
        const auto& d = points[r];
        InjectionSet inj = apply_device_draw(net, base_inj, d);
        try {
            y(r) = solve_newton(net, inj).total_loss_kw;
        } catch (const ConvergenceError& e) {
            throw ConvergenceError("loss-model sample at draw (" + std::to_string(d[0]) + ", " +
                                   std::to_string(d[1]) + ", " + std::to_string(d[2]) +
                                   ") kW failed: " + e.what());
        }
        double x1 = d[0] / s[0], x2 = d[1] / s[1], x3 = d[2] / s[2];
        a.row(r) << 1.0, x1, x2, x3, x1 * x1, x2 * x2, x3 * x3, x1 * x2, x1 * x3, x2 * x3;
    }

    Eigen::VectorXd coef = a.colPivHouseholderQr().solve(y);

    QuadLossModel model;
    model.c = coef(0);
    for (int j = 0; j < 3; ++j) {
        model.q(j) = coef(1 + j) / s[j];
        model.Q(j, j) = coef(4 + j) / (s[j] * s[j]);
    }
    model.Q(0, 1) = model.Q(1, 0) = 0.5 * coef(7) / (s[0] * s[1]);
    model.Q(0, 2) = model.Q(2, 0) = 0.5 * coef(8) / (s[0] * s[2]);
    model.Q(1, 2) = model.Q(2, 1) = 0.5 * coef(9) / (s[1] * s[2]);
    return model;
}

}  // namespace

QuadLossModel fit_loss_model(const NetworkModel& net, const InjectionSet& base_inj,
                             const std::array<double, 3>& box_kw, FitMethod method, int hour) {
    for (double b : box_kw)
        if (!(b >= 0.0)) throw ValidationError("fitting box half-widths must be >= 0");
    QuadLossModel model = method == FitMethod::sensitivity ? fit_sensitivity(net, base_inj)
                                                           : fit_sampled(net, base_inj, box_kw);
    repair_and_factor(model);
    model.operating_point = base_inj;
    model.hour = hour;
    return model;
}

double eval_loss(const QuadLossModel& model, const std::array<double, 3>& p_kw) {
    Eigen::Vector3d p(p_kw[0], p_kw[1], p_kw[2]);
    return p.dot(model.Q * p) + model.q.dot(p) + model.c;
}

nlohmann::json loss_model_to_json(const QuadLossModel& model) {
    nlohmann::json doc;
    auto mat = [](const Eigen::Matrix3d& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (int i = 0; i < 3; ++i) rows.push_back({m(i, 0), m(i, 1), m(i, 2)});
        return rows;
    };
    doc["Q"] = mat(model.Q);
    doc["q"] = {model.q(0), model.q(1), model.q(2)};
    doc["c"] = model.c;
    doc["H"] = mat(model.H);
    doc["hour"] = model.hour;
    nlohmann::json inj = nlohmann::json::array();
    for (const auto& e : model.operating_point.entries())
        inj.push_back({{"bus", e.bus}, {"p_kw", e.p_kw}, {"q_kvar", e.q_kvar}});
    doc["operating_point"] = inj;
    return doc;
}

QuadLossModel loss_model_from_json(const nlohmann::json& doc) {
    QuadLossModel model;
    try {
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                model.Q(i, j) = doc.at("Q").at(i).at(j).get<double>();
                model.H(i, j) = doc.at("H").at(i).at(j).get<double>();
            }
        for (int j = 0; j < 3; ++j) model.q(j) = doc.at("q").at(j).get<double>();
        model.c = doc.at("c").get<double>();
        model.hour = doc.value("hour", -1);
        if (doc.contains("operating_point"))
            for (const auto& e : doc.at("operating_point"))
                model.operating_point.add(e.at("bus").get<int>(), e.at("p_kw").get<double>(),
                                          e.value("q_kvar", 0.0));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad loss-model document: ") + e.what());
    }
    double scale = std::max(model.Q.norm(), 1e-30);
    if ((model.H.transpose() * model.H - model.Q).norm() > 1e-8 * scale)
        throw ValidationError("loss-model factor does not match Q");
    return model;
}

}  // namespace sopflex
