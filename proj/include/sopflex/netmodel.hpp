#pragma once

#include <array>
#include <string>
#include <vector>

namespace sopflex {

enum class BusKind { slack, pq };
enum class BranchStatus { closed, open };

struct Bus {
    int id = 0;  // 1-based, unique
    BusKind kind = BusKind::pq;
    double p_load_kw = 0.0;
    double q_load_kvar = 0.0;
    double v_base_kv = 12.66;
};

struct Branch {
    int from = 0;
    int to = 0;
    double r_ohm = 0.0;
    double x_ohm = 0.0;
    BranchStatus status = BranchStatus::closed;
};

struct Generator {
    int bus = 0;
    double p_rated_kw = 0.0;
    std::string profile_key;  // capacity-factor series driving this unit
};

// Radial distribution feeder. Treated as immutable once validated; all
// solvers take it by const reference and may share it across threads.
//
// sop_buses are the three coupling points of the multi-terminal device,
// in feeder order (feeder 1, 2, 3). They live on the network because they
// are a property of the feeder layout, not of a particular device design.
// The triple may be left unset ({0,0,0}) for small test fixtures; any
// operation that needs it checks first.
struct NetworkModel {
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    std::array<int, 3> sop_buses{0, 0, 0};
    double s_base_kva = 1000.0;

    bool has_sop_buses() const { return sop_buses[0] > 0 && sop_buses[1] > 0 && sop_buses[2] > 0; }
    // Index into buses for a bus id, or -1.
    int bus_index(int id) const;
    const Bus& slack_bus() const;
    double total_p_load_kw() const;
    double total_q_load_kvar() const;
};

enum class NetworkFormat { native_json, matpower_csv };

// Throws ValidationError naming the violated invariant. Checks: unique ids,
// exactly one slack, finite loads, r >= 0, branch endpoints exist, closed
// branches form a spanning tree over all buses, sop_buses (when set) are
// three distinct existing buses.
void validate_network(const NetworkModel& net);

// Throws ParseError (with line/field context) or ValidationError.
NetworkModel load_network(const std::string& path, NetworkFormat format);
// Format from extension: .json -> native, .csv -> matpower-like table.
NetworkModel load_network(const std::string& path);

void save_network(const NetworkModel& net, const std::string& path);
std::string network_to_json(const NetworkModel& net);
NetworkModel network_from_json(const std::string& text);

// Copy with every load scaled by the multiplier (both P and Q).
NetworkModel scaled_loads(const NetworkModel& net, double demand_multiplier);

// Baran & Wu 33-bus feeder with the case-study additions: 1400 kW wind at
// bus 31, 1200 kW PV at bus 16, device coupling at buses (33, 18, 25).
// 12.66 kV, 1 MVA base, total load 3715 kW / 2300 kVAr. The five standard
// normally-open tie branches are included with status=open.
NetworkModel builtin_33bus();

}  // namespace sopflex
