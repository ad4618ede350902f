// Command-line front end: network utilities, power flow, loss-model fitting,
// device capability queries, dispatch, and the daily case-study harness.

#include <array>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sopflex/dispatch.hpp"
#include "sopflex/errors.hpp"
#include "sopflex/harness.hpp"
#include "sopflex/ioutil.hpp"
#include "sopflex/lossmodel.hpp"
#include "sopflex/netmodel.hpp"
#include "sopflex/powerflow.hpp"
#include "sopflex/report.hpp"
#include "sopflex/sopcore.hpp"

namespace {

using namespace sopflex;

std::array<double, 3> parse_triple(const std::string& text, const std::string& flag) {
    std::array<double, 3> out{};
    std::stringstream ss(text);
    std::string cell;
    int n = 0;
    while (std::getline(ss, cell, ',')) {
        if (n >= 3) throw CLI::ValidationError(flag, "expected exactly three comma-separated values");
        try {
            size_t used = 0;
            out[n] = std::stod(cell, &used);
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw CLI::ValidationError(flag, "bad number '" + cell + "'");
        }
        ++n;
    }
    if (n != 3) throw CLI::ValidationError(flag, "expected exactly three comma-separated values");
    return out;
}

NetworkModel load_net_arg(const std::string& spec) {
    if (spec == "builtin") return builtin_33bus();
    return load_network(spec);
}

InjectionSet parse_injections(const std::vector<std::string>& specs) {
    InjectionSet inj;
    for (const auto& s : specs) {
        auto colon = s.find(':');
        if (colon == std::string::npos)
            throw CLI::ValidationError("--inject", "expected bus:p_kw[,q_kvar], got '" + s + "'");
        try {
            int bus = std::stoi(s.substr(0, colon));
            std::string rest = s.substr(colon + 1);
            auto comma = rest.find(',');
            double p = std::stod(comma == std::string::npos ? rest : rest.substr(0, comma));
            double q = comma == std::string::npos ? 0.0 : std::stod(rest.substr(comma + 1));
            inj.add(bus, p, q);
        } catch (const std::exception&) {
            throw CLI::ValidationError("--inject", "expected bus:p_kw[,q_kvar], got '" + s + "'");
        }
    }
    return inj;
}

SelectorState parse_state(const std::string& text) {
    if (text == "id" || text == "identity") return SelectorState::identity();
    if (text.size() != 3)
        throw CLI::ValidationError("--fixed-state",
                                   "expected three feeder digits like 123, or 'id'");
    std::array<int, 3> f{};
    for (int i = 0; i < 3; ++i) {
        if (text[i] < '1' || text[i] > '3')
            throw CLI::ValidationError("--fixed-state", "feeder digits must be 1..3");
        f[i] = text[i] - '1';
    }
    return SelectorState::from_assignment(f);
}

std::vector<NamedDesign> load_designs(const std::string& spec, double p_plus_default) {
    if (spec == "catalogue") return design_catalogue(p_plus_default);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(spec));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(spec + ": " + e.what());
    }
    try {
        double p_plus = doc.value("p_plus_kva", p_plus_default);
        std::vector<NamedDesign> out;
        for (const auto& entry : doc.at("cases")) {
            NamedDesign nd;
            nd.name = entry.at("name").get<std::string>();
            for (int i = 0; i < 3; ++i) nd.design.alpha[i] = entry.at("alpha").at(i).get<double>();
            nd.design.p_plus_kva = entry.value("p_plus_kva", p_plus);
            validate_design(nd.design);
            out.push_back(std::move(nd));
        }
        if (out.empty()) throw ValidationError(spec + ": no cases defined");
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(spec + ": " + e.what());
    }
}

void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty())
        std::cout << content;
    else
        write_file_atomic(out_path, content);
}

std::string triple_str(const std::array<double, 3>& v) {
    return format_double(v[0]) + " " + format_double(v[1]) + " " + format_double(v[2]);
}

std::string chart_csv(const CapabilityChart& chart) {
    std::string csv = "polygon,alpha1_hat,alpha2_hat,alpha3_hat,vertex,p1_pu,p2_pu\n";
    for (size_t k = 0; k < chart.charts.size(); ++k) {
        const auto& hat = chart.alpha_hats[k];
        const auto& poly = chart.charts[k];
        for (size_t v = 0; v < poly.size(); ++v)
            csv += std::to_string(k) + "," + format_double(hat[0]) + "," + format_double(hat[1]) +
                   "," + format_double(hat[2]) + "," + std::to_string(v) + "," +
                   format_double(poly[v].p1) + "," + format_double(poly[v].p2) + "\n";
    }
    return csv;
}

std::string sol_summary(const DispatchSolution& sol) {
    return "objective_kw=" + format_double(sol.loss_total) + " state=" + sol.state.label() +
           " p_inj_kw=" + triple_str(sol.p_inj) + " gap_rel=" + format_double(sol.mip_gap_rel) +
           " cone_residual=" + format_double(sol.cone_residual) + "\n";
}

// A reachable device draw: zero net power up to converter losses, 1-norm
// within the rating. Used by fit-loss --validate.
std::array<double, 3> sample_reachable(std::mt19937_64& rng, double p_plus) {
    std::uniform_real_distribution<double> u(-p_plus / 2.0, p_plus / 2.0);
    for (;;) {
        double p1 = u(rng), p2 = u(rng), p3 = -(p1 + p2);
        if (std::abs(p1) + std::abs(p2) + std::abs(p3) <= p_plus) return {p1, p2, p3};
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"soft-open-point design and dispatch toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    unsigned long seed = 1;
    app.add_option("--seed", seed, "seed for randomized validation fixtures");

    // ---- net ----
    auto* net_cmd = app.add_subcommand("net", "network file utilities");
    net_cmd->require_subcommand(1);
    std::string net_path;
    auto* net_validate = net_cmd->add_subcommand("validate", "parse and validate a network file");
    net_validate->add_option("path", net_path, "network file (.json or .csv), or 'builtin'")
        ->required();
    std::string net_out;
    auto* net_builtin = net_cmd->add_subcommand("builtin", "emit the bundled 33-bus feeder");
    net_builtin->add_option("--out", net_out, "output path (stdout if omitted)");

    // ---- powerflow ----
    auto* pf_cmd = app.add_subcommand("powerflow", "solve a power flow");
    std::string pf_net, pf_method = "newton", pf_out;
    std::vector<std::string> pf_inject;
    double pf_tol = 1e-8;
    pf_cmd->add_option("net", pf_net, "network file or 'builtin'")->required();
    pf_cmd->add_option("--inject", pf_inject, "extra injection bus:p_kw[,q_kvar]");
    pf_cmd->add_option("--method", pf_method, "newton or sweep")
        ->check(CLI::IsMember({"newton", "sweep"}));
    pf_cmd->add_option("--tol", pf_tol, "mismatch tolerance (pu)");
    pf_cmd->add_option("--out", pf_out, "write solution JSON here");

    // ---- fit-loss ----
    auto* fit_cmd = app.add_subcommand("fit-loss", "fit the quadratic loss surrogate");
    std::string fit_net, fit_out, fit_method = "sensitivity", fit_box = "750";
    std::vector<std::string> fit_inject;
    int fit_validate = 0;
    fit_cmd->add_option("net", fit_net, "network file or 'builtin'")->required();
    fit_cmd->add_option("--box", fit_box, "fitting box half-width kW (scalar or triple)");
    fit_cmd->add_option("--method", fit_method, "sensitivity or sampled")
        ->check(CLI::IsMember({"sensitivity", "sampled"}));
    fit_cmd->add_option("--inject", fit_inject, "base injection bus:p_kw[,q_kvar]");
    fit_cmd->add_option("--validate", fit_validate,
                        "check the fit against N random reachable draws");
    fit_cmd->add_option("--out", fit_out, "write model JSON here");

    // ---- fic ----
    auto* fic_cmd = app.add_subcommand("fic", "feeder interconnection capacity of a design");
    std::string fic_alpha;
    bool fic_hybrid_flag = false;
    fic_cmd->add_option("--alpha", fic_alpha, "converter size fractions a1,a2,a3")->required();
    fic_cmd->add_flag("--hybrid", fic_hybrid_flag, "best FIC over all selector states");

    // ---- chart ----
    auto* chart_cmd = app.add_subcommand("chart", "capability chart geometry");
    std::string chart_alpha, chart_out, chart_state;
    chart_cmd->add_option("--alpha", chart_alpha, "converter size fractions a1,a2,a3")->required();
    chart_cmd->add_option("--state", chart_state,
                          "restrict to one selector state (digits like 123, or 'id')");
    chart_cmd->add_option("--out", chart_out, "output .csv or .svg (stdout CSV if omitted)");

    // ---- dispatch ----
    auto* disp_cmd = app.add_subcommand("dispatch", "solve one dispatch problem");
    std::string disp_alpha, disp_loss, disp_out, disp_state, disp_solver = "micp";
    double disp_pplus = 750.0, disp_kappa = 0.01;
    disp_cmd->add_option("--alpha", disp_alpha, "converter size fractions a1,a2,a3")->required();
    disp_cmd->add_option("--p-plus", disp_pplus, "total rating kVA");
    disp_cmd->add_option("--loss", disp_loss, "loss-model JSON from fit-loss")->required();
    disp_cmd->add_option("--kappa", disp_kappa, "converter loss coefficient");
    disp_cmd->add_option("--fixed-state", disp_state, "freeze the selector (digits or 'id')");
    disp_cmd->add_option("--solver", disp_solver, "micp or enumerate")
        ->check(CLI::IsMember({"micp", "enumerate"}));
    disp_cmd->add_option("--out", disp_out, "write solution JSON here");

    // ---- simulate ----
    auto* sim_cmd = app.add_subcommand("simulate", "daily case-study comparison");
    std::string sim_net = "builtin", sim_profiles = "builtin", sim_designs = "catalogue",
                sim_out;
    double sim_kappa = 0.01, sim_pplus = 750.0;
    sim_cmd->add_option("--net", sim_net, "network file or 'builtin'");
    sim_cmd->add_option("--profiles", sim_profiles, "profile CSV or 'builtin'");
    sim_cmd->add_option("--designs", sim_designs, "designs JSON or 'catalogue'");
    sim_cmd->add_option("--p-plus", sim_pplus, "rating for the built-in catalogue");
    sim_cmd->add_option("--kappa", sim_kappa, "converter loss coefficient");
    sim_cmd->add_option("--out", sim_out, "report directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (net_validate->parsed()) {
            NetworkModel net = load_net_arg(net_path);
            int closed = 0;
            for (const auto& br : net.branches) closed += br.status == BranchStatus::closed;
            std::cout << "ok: " << net.buses.size() << " buses, " << net.branches.size()
                      << " branches (" << closed << " closed), load "
                      << format_double(net.total_p_load_kw()) << " kW "
                      << format_double(net.total_q_load_kvar()) << " kvar";
            if (net.has_sop_buses())
                std::cout << ", device at " << net.sop_buses[0] << "," << net.sop_buses[1] << ","
                          << net.sop_buses[2];
            std::cout << "\n";
        } else if (net_builtin->parsed()) {
            emit(net_out, network_to_json(builtin_33bus()));
        } else if (pf_cmd->parsed()) {
            NetworkModel net = load_net_arg(pf_net);
            InjectionSet inj = parse_injections(pf_inject);
            PowerFlowSolution sol = pf_method == "newton" ? solve_newton(net, inj, pf_tol)
                                                          : solve_sweep(net, inj, pf_tol);
            double vmin = sol.v_mag[0];
            int vmin_bus = net.buses[0].id;
            for (size_t i = 0; i < net.buses.size(); ++i)
                if (sol.v_mag[i] < vmin) vmin = sol.v_mag[i], vmin_bus = net.buses[i].id;
            std::cout << "loss_kw=" << format_double(sol.total_loss_kw)
                      << " slack_kw=" << format_double(sol.p_slack_kw)
                      << " slack_kvar=" << format_double(sol.q_slack_kvar)
                      << " iterations=" << sol.iterations << " vmin_pu=" << format_double(vmin)
                      << "@bus" << vmin_bus << "\n";
            if (!pf_out.empty()) {
                nlohmann::json doc;
                doc["method"] = pf_method;
                doc["iterations"] = sol.iterations;
                doc["max_mismatch_pu"] = sol.max_mismatch_pu;
                doc["total_loss_kw"] = sol.total_loss_kw;
                doc["p_slack_kw"] = sol.p_slack_kw;
                doc["q_slack_kvar"] = sol.q_slack_kvar;
                nlohmann::json buses = nlohmann::json::array();
                for (size_t i = 0; i < net.buses.size(); ++i)
                    buses.push_back({{"bus", net.buses[i].id},
                                     {"v_pu", sol.v_mag[i]},
                                     {"angle_rad", sol.v_ang[i]}});
                doc["buses"] = buses;
                write_file_atomic(pf_out, doc.dump(2) + "\n");
            }
        } else if (fit_cmd->parsed()) {
            NetworkModel net = load_net_arg(fit_net);
            InjectionSet base = parse_injections(fit_inject);
            std::array<double, 3> box{};
            if (fit_box.find(',') == std::string::npos) {
                double w = std::stod(fit_box);
                box = {w, w, w};
            } else {
                box = parse_triple(fit_box, "--box");
            }
            FitMethod method = fit_method == "sensitivity" ? FitMethod::sensitivity
                                                           : FitMethod::sampled_least_squares;
            QuadLossModel model = fit_loss_model(net, base, box, method);
            std::cout << "c_kw=" << format_double(model.c) << "\n";
            if (fit_validate > 0) {
                if (!net.has_sop_buses())
                    throw ValidationError("validation requires a network with sop_buses");
                std::mt19937_64 rng(seed);
                double p_plus = 2.0 * std::max({box[0], box[1], box[2]});
                double worst = 0.0;
                for (int k = 0; k < fit_validate; ++k) {
                    auto d = sample_reachable(rng, p_plus);
                    double truth =
                        solve_newton(net, apply_device_draw(net, base, d)).total_loss_kw;
                    worst = std::max(worst, std::abs(eval_loss(model, d) - truth) /
                                                std::max(truth, 1e-9));
                }
                std::cout << "validate_worst_rel=" << format_double(worst) << "\n";
            }
            if (!fit_out.empty())
                write_file_atomic(fit_out, loss_model_to_json(model).dump(2) + "\n");
        } else if (fic_cmd->parsed()) {
            SopDesign design{parse_triple(fic_alpha, "--alpha"), 1.0};
            validate_design(design);
            auto fic = fic_hybrid_flag ? fic_hybrid(design) : fic_fixed(design.alpha);
            std::cout << triple_str(fic) << "\n";
        } else if (chart_cmd->parsed()) {
            SopDesign design{parse_triple(chart_alpha, "--alpha"), 1.0};
            validate_design(design);
            CapabilityChart chart;
            if (chart_state.empty()) {
                chart = chart_hybrid(design);
            } else {
                chart.design = design;
                auto hat = effective_alpha(design, parse_state(chart_state));
                chart.alpha_hats.push_back(hat);
                chart.charts.push_back(chart_fixed(hat));
            }
            bool svg = chart_out.size() > 4 && chart_out.substr(chart_out.size() - 4) == ".svg";
            if (svg) {
                std::vector<std::pair<std::string, Polygon>> polys;
                for (size_t k = 0; k < chart.charts.size(); ++k) {
                    const auto& hat = chart.alpha_hats[k];
                    polys.push_back({"a=(" + format_double(hat[0]) + "," + format_double(hat[1]) +
                                         "," + format_double(hat[2]) + ")",
                                     chart.charts[k]});
                }
                emit(chart_out, render_polygon_chart("Capability chart", polys));
            } else {
                emit(chart_out, chart_csv(chart));
            }
        } else if (disp_cmd->parsed()) {
            SopDesign design{parse_triple(disp_alpha, "--alpha"), disp_pplus};
            QuadLossModel model;
            try {
                model = loss_model_from_json(nlohmann::json::parse(read_file(disp_loss)));
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(disp_loss + ": " + e.what());
            }
            DispatchProblem problem = make_dispatch_problem(design, model, disp_kappa);
            if (!disp_state.empty()) problem.fixed_state = parse_state(disp_state);
            DispatchSolution sol =
                disp_solver == "micp" ? solve_micp(problem) : solve_enumerate(problem);
            auto violations = validate_solution(problem, sol);
            if (!violations.empty())
                throw SolverError("solution failed validation: " + violations.front());
            std::cout << sol_summary(sol);
            if (!disp_out.empty())
                write_file_atomic(disp_out, solution_to_json(sol).dump(2) + "\n");
        } else if (sim_cmd->parsed()) {
            NetworkModel net = load_net_arg(sim_net);
            ScenarioProfiles profiles =
                sim_profiles == "builtin" ? builtin_day() : load_profiles(sim_profiles);
            std::vector<NamedDesign> designs = load_designs(sim_designs, sim_pplus);
            ComparisonReport report = compare_designs(net, designs, profiles, sim_kappa);
            write_report(sim_out, report);
            for (const auto& row : report.rows)
                std::cout << "case " << row.name << ": reduction_kwh="
                          << format_double(row.day.loss_reduction_kwh) << " ("
                          << format_double(row.reduction_vs_first_pct) << "%) eta="
                          << format_double(row.day.utilization_eta) << " ("
                          << format_double(row.eta_vs_first_pct) << "%)\n";
            std::cout << "note: " << report_footer_note() << "\n";
        }
    } catch (const CLI::ParseError& e) {
        // Argument-shaped problems discovered after parsing (bad triples,
        // malformed --inject specs) are still usage errors.
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
