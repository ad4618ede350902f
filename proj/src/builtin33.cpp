#include "sopflex/netmodel.hpp"

namespace sopflex {

// Baran & Wu 33-bus feeder, 12.66 kV. Branch impedances in ohms, loads in
// kW/kVAr attached to the receiving bus. Totals: 3715 kW, 2300 kVAr. The
// reactive load of the standard dataset is retained unmodified.
namespace {

struct Row {
    int from, to;
    double r, x;     // ohm
    double p, q;     // load at `to`, kW / kVAr
};

constexpr Row k33Rows[] = {
    {1, 2, 0.0922, 0.0470, 100.0, 60.0},
    {2, 3, 0.4930, 0.2511, 90.0, 40.0},
    {3, 4, 0.3660, 0.1864, 120.0, 80.0},
    {4, 5, 0.3811, 0.1941, 60.0, 30.0},
    {5, 6, 0.8190, 0.7070, 60.0, 20.0},
    {6, 7, 0.1872, 0.6188, 200.0, 100.0},
    {7, 8, 0.7114, 0.2351, 200.0, 100.0},
    {8, 9, 1.0300, 0.7400, 60.0, 20.0},
    {9, 10, 1.0440, 0.7400, 60.0, 20.0},
    {10, 11, 0.1966, 0.0650, 45.0, 30.0},
    {11, 12, 0.3744, 0.1238, 60.0, 35.0},
    {12, 13, 1.4680, 1.1550, 60.0, 35.0},
    {13, 14, 0.5416, 0.7129, 120.0, 80.0},
    {14, 15, 0.5910, 0.5260, 60.0, 10.0},
    {15, 16, 0.7463, 0.5450, 60.0, 20.0},
    {16, 17, 1.2890, 1.7210, 60.0, 20.0},
    {17, 18, 0.7320, 0.5740, 90.0, 40.0},
    {2, 19, 0.1640, 0.1565, 90.0, 40.0},
    {19, 20, 1.5042, 1.3554, 90.0, 40.0},
    {20, 21, 0.4095, 0.4784, 90.0, 40.0},
    {21, 22, 0.7089, 0.9373, 90.0, 40.0},
    {3, 23, 0.4512, 0.3083, 90.0, 50.0},
    {23, 24, 0.8980, 0.7091, 420.0, 200.0},
    {24, 25, 0.8960, 0.7011, 420.0, 200.0},
    {6, 26, 0.2030, 0.1034, 60.0, 25.0},
    {26, 27, 0.2842, 0.1447, 60.0, 25.0},
    {27, 28, 1.0590, 0.9337, 60.0, 20.0},
    {28, 29, 0.8042, 0.7006, 120.0, 70.0},
    {29, 30, 0.5075, 0.2585, 200.0, 600.0},
    {30, 31, 0.9744, 0.9630, 150.0, 70.0},
    {31, 32, 0.3105, 0.3619, 210.0, 100.0},
    {32, 33, 0.3410, 0.5302, 60.0, 40.0},
};

// Normally open tie switches of the published dataset.
constexpr Row kTieRows[] = {
    {8, 21, 2.0000, 2.0000, 0.0, 0.0},
    {9, 15, 2.0000, 2.0000, 0.0, 0.0},
    {12, 22, 2.0000, 2.0000, 0.0, 0.0},
    {18, 33, 0.5000, 0.5000, 0.0, 0.0},
    {25, 29, 0.5000, 0.5000, 0.0, 0.0},
};

}  // namespace

NetworkModel builtin_33bus() {
    NetworkModel net;
    net.s_base_kva = 1000.0;
    net.sop_buses = {33, 18, 25};

    for (int id = 1; id <= 33; ++id) {
        Bus b;
        b.id = id;
        b.kind = id == 1 ? BusKind::slack : BusKind::pq;
        b.v_base_kv = 12.66;
        net.buses.push_back(b);
    }
    for (const auto& row : k33Rows) {
        Branch br;
        br.from = row.from;
        br.to = row.to;
        br.r_ohm = row.r;
        br.x_ohm = row.x;
        net.branches.push_back(br);
        net.buses[row.to - 1].p_load_kw = row.p;
        net.buses[row.to - 1].q_load_kvar = row.q;
    }
    for (const auto& row : kTieRows) {
        Branch br;
        br.from = row.from;
        br.to = row.to;
        br.r_ohm = row.r;
        br.x_ohm = row.x;
        br.status = BranchStatus::open;
        net.branches.push_back(br);
    }

    net.generators.push_back({31, 1400.0, "wind"});
    net.generators.push_back({16, 1200.0, "pv"});

    validate_network(net);
    return net;
}

}  // namespace sopflex
