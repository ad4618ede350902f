#pragma once

#include <array>

#include <Eigen/Dense>
#include <json.hpp>

#include "sopflex/netmodel.hpp"
#include "sopflex/powerflow.hpp"

namespace sopflex {

// Quadratic surrogate of network losses as a function of the three device
// feeder powers p (kW, positive = power drawn from the feeder into the
// device):  loss(p) = p'Qp + q'p + c.
struct QuadLossModel {
    Eigen::Matrix3d Q = Eigen::Matrix3d::Zero();  // kW per kW^2
    Eigen::Vector3d q = Eigen::Vector3d::Zero();  // kW per kW
    double c = 0.0;                               // kW
    Eigen::Matrix3d H = Eigen::Matrix3d::Zero();  // upper-triangular, H'H = Q
    InjectionSet operating_point;                 // base injections fitted at
    int hour = -1;                                // scenario hour, -1 if none
};

enum class FitMethod {
    sensitivity,            // voltage Jacobian + per-branch primitive admittances
    sampled_least_squares,  // quadratic regression on a 5x5x5 grid of power flows
};

// Network injections corresponding to a device draw: adds -draw_kw[j] at SOP
// bus j on top of the base injections.
InjectionSet apply_device_draw(const NetworkModel& net, InjectionSet base,
                               const std::array<double, 3>& draw_kw);

// Fits the surrogate around the operating point given by base_inj. box_kw
// gives the per-feeder half-width of the fitting box (the sampled method
// evaluates power flows across it; the sensitivity method ignores it).
// Fitted Q is symmetrized, PSD-repaired (eigenvalues below -1e-9*||Q|| are an
// error, small negatives are clamped to zero) and factored as H'H = Q with H
// upper triangular (relative identity error <= 1e-10).
QuadLossModel fit_loss_model(const NetworkModel& net, const InjectionSet& base_inj,
                             const std::array<double, 3>& box_kw, FitMethod method,
                             int hour = -1);

double eval_loss(const QuadLossModel& model, const std::array<double, 3>& p_kw);

nlohmann::json loss_model_to_json(const QuadLossModel& model);
QuadLossModel loss_model_from_json(const nlohmann::json& doc);

}  // namespace sopflex
