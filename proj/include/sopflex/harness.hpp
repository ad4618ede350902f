#pragma once

#include <array>
#include <string>
#include <vector>

#include "sopflex/dispatch.hpp"
#include "sopflex/netmodel.hpp"

namespace sopflex {

inline constexpr int kHoursPerDay = 24;

// One day of hourly multipliers: demand scaling plus wind/PV capacity factors.
struct ScenarioProfiles {
    std::vector<double> demand_pu;
    std::vector<double> wind_cf;
    std::vector<double> pv_cf;
};

void validate_profiles(const ScenarioProfiles& profiles);

// CSV with header hour,demand_pu,wind_cf,pv_cf and 24 data rows.
ScenarioProfiles load_profiles(const std::string& path);
std::string profiles_to_csv(const ScenarioProfiles& profiles);

// Bundled synthetic day: wind high overnight, PV midday bell, demand evening
// peak. Fixture values, not measurements.
ScenarioProfiles builtin_day();

// Network with loads scaled to the hour's demand multiplier (hour_idx 0-based).
NetworkModel hour_network(const NetworkModel& net, const ScenarioProfiles& profiles, int hour_idx);

// Generator injections for the hour: rated power times the profile keyed by
// each generator's profile_key ("wind" or "pv").
InjectionSet hour_injections(const NetworkModel& net, const ScenarioProfiles& profiles,
                             int hour_idx);

struct HourResult {
    int hour = 0;  // 1-based
    DispatchSolution dispatch;
    double baseline_loss_kw = 0.0;       // nonlinear loss with the device idle
    double optimized_network_kw = 0.0;   // nonlinear loss at the optimal draws
    double optimized_total_kw = 0.0;     // network + converter losses
    std::array<double, 3> fic_kw{};      // FIC of the chosen state, kW
};

struct DailyResult {
    std::vector<HourResult> hours;
    double loss_reduction_kwh = 0.0;  // sum of (baseline - optimized_total)
    double utilization_eta = 0.0;     // mean over hours of |p_inj|_1 / p_plus
};

// Hourly loop: scale the network, fit the loss surrogate at idle draws,
// dispatch, then verify the optimum against the nonlinear power flow. Hours
// run in parallel up to SOPFLEX_THREADS (default: hardware concurrency) and
// are merged in hour order; failures carry the 1-based hour index.
DailyResult run_day(const NetworkModel& net, const SopDesign& design,
                    const ScenarioProfiles& profiles, double kappa);

// Time-averaged device utilization: mean over hours of ||p_inj||_1 / p_plus.
double utilization(const std::vector<std::array<double, 3>>& p_inj_kw, double p_plus_kva);

struct DesignDayRow {
    std::string name;
    SopDesign design;
    DailyResult day;
    double reduction_vs_first_pct = 100.0;
    double eta_vs_first_pct = 100.0;
};

struct ComparisonReport {
    std::vector<DesignDayRow> rows;
};

ComparisonReport compare_designs(const NetworkModel& net, const std::vector<NamedDesign>& designs,
                                 const ScenarioProfiles& profiles, double kappa);

}  // namespace sopflex
