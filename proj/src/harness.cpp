#include "sopflex/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

#include "sopflex/errors.hpp"
#include "sopflex/ioutil.hpp"
#include "sopflex/lossmodel.hpp"

namespace sopflex {

void validate_profiles(const ScenarioProfiles& profiles) {
    if (profiles.demand_pu.size() != kHoursPerDay || profiles.wind_cf.size() != kHoursPerDay ||
        profiles.pv_cf.size() != kHoursPerDay)
        throw ValidationError("profiles must cover exactly " + std::to_string(kHoursPerDay) +
                              " hours");
    for (int t = 0; t < kHoursPerDay; ++t) {
        if (!(profiles.demand_pu[t] > 0.0) || !std::isfinite(profiles.demand_pu[t]))
            throw ValidationError("demand_pu must be positive (hour " + std::to_string(t + 1) +
                                  ")");
        for (double cf : {profiles.wind_cf[t], profiles.pv_cf[t]})
            if (!(cf >= 0.0 && cf <= 1.0))
                throw ValidationError("capacity factors must lie in [0,1] (hour " +
                                      std::to_string(t + 1) + ")");
    }
}

ScenarioProfiles load_profiles(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty profile file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "hour,demand_pu,wind_cf,pv_cf")
        throw ParseError(path + ": expected header hour,demand_pu,wind_cf,pv_cf");

    ScenarioProfiles profiles;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(fields, cell, ',')) {
            double v = 0.0;
            auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || p != cell.data() + cell.size())
                throw ParseError(path + ":" + std::to_string(row) + ": bad number '" + cell + "'");
            vals.push_back(v);
        }
        if (vals.size() != 4)
            throw ParseError(path + ":" + std::to_string(row) + ": expected 4 columns");
        int hour = static_cast<int>(vals[0]);
        if (hour != static_cast<int>(profiles.demand_pu.size()) + 1)
            throw ParseError(path + ":" + std::to_string(row) + ": hours must run 1..24 in order");
        profiles.demand_pu.push_back(vals[1]);
        profiles.wind_cf.push_back(vals[2]);
        profiles.pv_cf.push_back(vals[3]);
        if (!(vals[1] > 0.0))
            throw ParseError(path + ":" + std::to_string(row) + ": demand_pu must be positive");
        if (vals[2] < 0.0 || vals[2] > 1.0 || vals[3] < 0.0 || vals[3] > 1.0)
            throw ParseError(path + ":" + std::to_string(row) +
                             ": capacity factors must lie in [0,1]");
    }
    validate_profiles(profiles);
    return profiles;
}

std::string profiles_to_csv(const ScenarioProfiles& profiles) {
    validate_profiles(profiles);
    std::string out = "hour,demand_pu,wind_cf,pv_cf\n";
    for (int t = 0; t < kHoursPerDay; ++t) {
        out += std::to_string(t + 1) + "," + format_double(profiles.demand_pu[t]) + "," +
               format_double(profiles.wind_cf[t]) + "," + format_double(profiles.pv_cf[t]) + "\n";
    }
    return out;
}

ScenarioProfiles builtin_day() {
    ScenarioProfiles p;
    p.demand_pu = {0.62, 0.58, 0.56, 0.55, 0.57, 0.62, 0.70, 0.78, 0.84, 0.87, 0.89, 0.90,
                   0.89, 0.88, 0.87, 0.88, 0.92, 0.98, 1.00, 0.98, 0.93, 0.85, 0.75, 0.66};
    p.wind_cf = {0.78, 0.82, 0.85, 0.83, 0.80, 0.74, 0.66, 0.57, 0.48, 0.40, 0.34, 0.30,
                 0.27, 0.25, 0.26, 0.29, 0.34, 0.41, 0.49, 0.57, 0.64, 0.70, 0.74, 0.76};
    p.pv_cf = {0.00, 0.00, 0.00, 0.00, 0.00, 0.03, 0.12, 0.25, 0.41, 0.56, 0.68, 0.76,
               0.79, 0.76, 0.68, 0.56, 0.41, 0.25, 0.12, 0.03, 0.00, 0.00, 0.00, 0.00};
    return p;
}

NetworkModel hour_network(const NetworkModel& net, const ScenarioProfiles& profiles,
                          int hour_idx) {
    return scaled_loads(net, profiles.demand_pu.at(hour_idx));
}

InjectionSet hour_injections(const NetworkModel& net, const ScenarioProfiles& profiles,
                             int hour_idx) {
    InjectionSet inj;
    for (const auto& gen : net.generators) {
        double cf;
        if (gen.profile_key == "wind")
            cf = profiles.wind_cf.at(hour_idx);
        else if (gen.profile_key == "pv")
            cf = profiles.pv_cf.at(hour_idx);
        else
            throw ValidationError("generator at bus " + std::to_string(gen.bus) +
                                  " has unknown profile key '" + gen.profile_key + "'");
        inj.add(gen.bus, gen.p_rated_kw * cf, 0.0);
    }
    return inj;
}

namespace {

int worker_count() {
    if (const char* env = std::getenv("SOPFLEX_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return std::min(n, kHoursPerDay);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return std::max(1, std::min<int>(hw == 0 ? 1 : static_cast<int>(hw), kHoursPerDay));
}

HourResult compute_hour(const NetworkModel& net, const SopDesign& design,
                        const ScenarioProfiles& profiles, double kappa, int t) {
    NetworkModel net_t = hour_network(net, profiles, t);
    InjectionSet base = hour_injections(net_t, profiles, t);

    HourResult hr;
    hr.hour = t + 1;
    hr.baseline_loss_kw = solve_newton(net_t, base).total_loss_kw;

    // Per-feeder draws never exceed p_plus/2 under the device power balance,
    // so the surrogate is regressed over exactly that box; error balancing
    // across it keeps the at-optimum prediction error under 1%, where a
    // Taylor expansion at the idle point would not.
    double box = 0.5 * design.p_plus_kva;
    QuadLossModel model =
        fit_loss_model(net_t, base, {box, box, box}, FitMethod::sampled_least_squares, t + 1);
    DispatchProblem problem = make_dispatch_problem(design, model, kappa);
    hr.dispatch = solve_micp(problem);

    InjectionSet at_opt = apply_device_draw(net_t, base, hr.dispatch.p_inj);
    hr.optimized_network_kw = solve_newton(net_t, at_opt).total_loss_kw;
    hr.optimized_total_kw = hr.optimized_network_kw + hr.dispatch.loss_converters;

    auto fic = fic_fixed(effective_alpha(design, hr.dispatch.state));
    for (int j = 0; j < 3; ++j) hr.fic_kw[j] = fic[j] * design.p_plus_kva;
    return hr;
}

}  // namespace

DailyResult run_day(const NetworkModel& net, const SopDesign& design,
                    const ScenarioProfiles& profiles, double kappa) {
    validate_design(design);
    validate_profiles(profiles);
    validate_network(net);
    if (!net.has_sop_buses())
        throw ValidationError("network has no sop_buses; the device has nowhere to connect");

    std::vector<HourResult> hours(kHoursPerDay);
    std::vector<std::exception_ptr> failures(kHoursPerDay);

    const int workers = worker_count();
    auto work = [&](int start) {
        for (int t = start; t < kHoursPerDay; t += workers) {
            try {
                hours[t] = compute_hour(net, design, profiles, kappa, t);
            } catch (...) {
                failures[t] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }

    for (int t = 0; t < kHoursPerDay; ++t) {
        if (!failures[t]) continue;
        try {
            std::rethrow_exception(failures[t]);
        } catch (const ConvergenceError& e) {
            throw ConvergenceError("hour " + std::to_string(t + 1) + ": " + e.what());
        } catch (const std::exception& e) {
            throw SolverError("hour " + std::to_string(t + 1) + ": " + e.what());
        }
    }

    DailyResult day;
    day.hours = std::move(hours);
    std::vector<std::array<double, 3>> transfers;
    transfers.reserve(day.hours.size());
    for (const auto& hr : day.hours) {
        day.loss_reduction_kwh += hr.baseline_loss_kw - hr.optimized_total_kw;
        transfers.push_back(hr.dispatch.p_inj);
    }
    day.utilization_eta = utilization(transfers, design.p_plus_kva);
    return day;
}

double utilization(const std::vector<std::array<double, 3>>& p_inj_kw, double p_plus_kva) {
    if (p_inj_kw.empty()) throw ValidationError("utilization needs at least one hour");
    if (!(p_plus_kva > 0.0)) throw ValidationError("utilization needs a positive rating");
    double sum = 0.0;
    for (const auto& p : p_inj_kw)
        sum += (std::abs(p[0]) + std::abs(p[1]) + std::abs(p[2])) / p_plus_kva;
    return sum / static_cast<double>(p_inj_kw.size());
}

ComparisonReport compare_designs(const NetworkModel& net, const std::vector<NamedDesign>& designs,
                                 const ScenarioProfiles& profiles, double kappa) {
    if (designs.empty()) throw ValidationError("need at least one design to compare");
    ComparisonReport report;
    for (const auto& nd : designs) {
        DesignDayRow row;
        row.name = nd.name;
        row.design = nd.design;
        row.day = run_day(net, nd.design, profiles, kappa);
        report.rows.push_back(std::move(row));
    }
    const double ref_red = report.rows.front().day.loss_reduction_kwh;
    const double ref_eta = report.rows.front().day.utilization_eta;
    for (auto& row : report.rows) {
        row.reduction_vs_first_pct =
            ref_red != 0.0 ? 100.0 * row.day.loss_reduction_kwh / ref_red
                           : (row.day.loss_reduction_kwh == 0.0 ? 100.0
                                                                : std::numeric_limits<double>::infinity());
        row.eta_vs_first_pct =
            ref_eta != 0.0 ? 100.0 * row.day.utilization_eta / ref_eta
                           : (row.day.utilization_eta == 0.0 ? 100.0
                                                             : std::numeric_limits<double>::infinity());
    }
    return report;
}

}  // namespace sopflex
