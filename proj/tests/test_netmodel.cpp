#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>

#include "sopflex/errors.hpp"
#include "sopflex/ioutil.hpp"
#include "sopflex/netmodel.hpp"

using namespace sopflex;

namespace {

// Minimal valid 3-bus feeder used as a mutation base.
NetworkModel tiny_net() {
    NetworkModel net;
    net.buses = {{1, BusKind::slack, 0.0, 0.0, 12.66},
                 {2, BusKind::pq, 100.0, 60.0, 12.66},
                 {3, BusKind::pq, 90.0, 40.0, 12.66}};
    net.branches = {{1, 2, 0.1, 0.05, BranchStatus::closed},
                    {2, 3, 0.2, 0.1, BranchStatus::closed}};
    return net;
}

std::string message_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("sopflex_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<uintptr_t>(this)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("builtin 33-bus feeder matches the published dataset totals") {
    NetworkModel net = builtin_33bus();
    CHECK_NOTHROW(validate_network(net));
    CHECK(net.buses.size() == 33);
    CHECK(net.branches.size() == 37);
    int closed = 0, open = 0;
    for (const auto& br : net.branches)
        (br.status == BranchStatus::closed ? closed : open)++;
    CHECK(closed == 32);
    CHECK(open == 5);
    CHECK(net.total_p_load_kw() == doctest::Approx(3715.0).epsilon(1e-12));
    CHECK(net.total_q_load_kvar() == doctest::Approx(2300.0).epsilon(1e-12));
    CHECK(net.slack_bus().id == 1);
    CHECK(net.s_base_kva == 1000.0);
    CHECK(net.buses.front().v_base_kv == doctest::Approx(12.66));
    CHECK(net.sop_buses == std::array<int, 3>{33, 18, 25});

    REQUIRE(net.generators.size() == 2);
    CHECK(net.generators[0].bus == 31);
    CHECK(net.generators[0].p_rated_kw == 1400.0);
    CHECK(net.generators[0].profile_key == "wind");
    CHECK(net.generators[1].bus == 16);
    CHECK(net.generators[1].p_rated_kw == 1200.0);
    CHECK(net.generators[1].profile_key == "pv");

    // A couple of specific branch impedances from the table.
    CHECK(net.branches[0].from == 1);
    CHECK(net.branches[0].to == 2);
    CHECK(net.branches[0].r_ohm == doctest::Approx(0.0922));
    CHECK(net.branches[0].x_ohm == doctest::Approx(0.047));
}

TEST_CASE("bus_index and slack_bus") {
    NetworkModel net = tiny_net();
    CHECK(net.bus_index(1) == 0);
    CHECK(net.bus_index(3) == 2);
    CHECK(net.bus_index(42) == -1);
    CHECK(net.slack_bus().id == 1);
    net.buses[0].kind = BusKind::pq;
    CHECK_THROWS_AS(net.slack_bus(), ValidationError);
}

TEST_CASE("validate_network rejects broken models") {
    SUBCASE("duplicate bus id") {
        NetworkModel net = tiny_net();
        net.buses[2].id = 2;
        CHECK(message_of([&] { validate_network(net); }).find("duplicate bus id") !=
              std::string::npos);
    }
    SUBCASE("no slack") {
        NetworkModel net = tiny_net();
        net.buses[0].kind = BusKind::pq;
        CHECK_THROWS_AS(validate_network(net), ValidationError);
    }
    SUBCASE("two slacks") {
        NetworkModel net = tiny_net();
        net.buses[1].kind = BusKind::slack;
        CHECK_THROWS_AS(validate_network(net), ValidationError);
    }
    SUBCASE("branch to unknown bus") {
        NetworkModel net = tiny_net();
        net.branches[1].to = 9;
        CHECK_THROWS_AS(validate_network(net), ValidationError);
    }
    SUBCASE("self loop") {
        NetworkModel net = tiny_net();
        net.branches[1].to = 2;
        CHECK_THROWS_AS(validate_network(net), ValidationError);
    }
    SUBCASE("negative resistance") {
        NetworkModel net = tiny_net();
        net.branches[0].r_ohm = -0.1;
        CHECK_THROWS_AS(validate_network(net), ValidationError);
    }
    SUBCASE("open branch breaks radiality") {
        NetworkModel net = tiny_net();
        net.branches[1].status = BranchStatus::open;
        CHECK(message_of([&] { validate_network(net); }).find("radiality") != std::string::npos);
    }
    SUBCASE("extra closed branch forms a loop") {
        NetworkModel net = tiny_net();
        net.branches.push_back({1, 3, 0.3, 0.2, BranchStatus::closed});
        CHECK_THROWS_AS(validate_network(net), ValidationError);
    }
    SUBCASE("right edge count but disconnected") {
        NetworkModel net = tiny_net();
        net.buses.push_back({4, BusKind::pq, 0.0, 0.0, 12.66});
        net.buses.push_back({5, BusKind::pq, 0.0, 0.0, 12.66});
        net.branches.push_back({4, 5, 0.1, 0.1, BranchStatus::closed});
        net.branches.push_back({4, 5, 0.2, 0.2, BranchStatus::closed});
        CHECK(message_of([&] { validate_network(net); }).find("not connected") !=
              std::string::npos);
    }
    SUBCASE("duplicate sop bus") {
        NetworkModel net = tiny_net();
        net.sop_buses = {2, 2, 3};
        CHECK_THROWS_AS(validate_network(net), ValidationError);
    }
    SUBCASE("missing sop bus") {
        NetworkModel net = tiny_net();
        net.sop_buses = {1, 2, 7};
        CHECK_THROWS_AS(validate_network(net), ValidationError);
    }
    SUBCASE("unset sop triple is allowed") {
        NetworkModel net = tiny_net();
        net.sop_buses = {0, 0, 0};
        CHECK_NOTHROW(validate_network(net));
        CHECK_FALSE(net.has_sop_buses());
    }
    SUBCASE("generator on unknown bus") {
        NetworkModel net = tiny_net();
        net.generators.push_back({8, 100.0, "wind"});
        CHECK_THROWS_AS(validate_network(net), ValidationError);
    }
}

TEST_CASE("json round trip preserves every field") {
    NetworkModel net = builtin_33bus();
    NetworkModel back = network_from_json(network_to_json(net));
    REQUIRE(back.buses.size() == net.buses.size());
    REQUIRE(back.branches.size() == net.branches.size());
    REQUIRE(back.generators.size() == net.generators.size());
    for (size_t i = 0; i < net.buses.size(); ++i) {
        CHECK(back.buses[i].id == net.buses[i].id);
        CHECK(back.buses[i].kind == net.buses[i].kind);
        CHECK(back.buses[i].p_load_kw == net.buses[i].p_load_kw);
        CHECK(back.buses[i].q_load_kvar == net.buses[i].q_load_kvar);
        CHECK(back.buses[i].v_base_kv == net.buses[i].v_base_kv);
    }
    for (size_t i = 0; i < net.branches.size(); ++i) {
        CHECK(back.branches[i].from == net.branches[i].from);
        CHECK(back.branches[i].to == net.branches[i].to);
        CHECK(back.branches[i].r_ohm == net.branches[i].r_ohm);
        CHECK(back.branches[i].x_ohm == net.branches[i].x_ohm);
        CHECK(back.branches[i].status == net.branches[i].status);
    }
    for (size_t i = 0; i < net.generators.size(); ++i) {
        CHECK(back.generators[i].bus == net.generators[i].bus);
        CHECK(back.generators[i].p_rated_kw == net.generators[i].p_rated_kw);
        CHECK(back.generators[i].profile_key == net.generators[i].profile_key);
    }
    CHECK(back.sop_buses == net.sop_buses);
    CHECK(back.s_base_kva == net.s_base_kva);
}

TEST_CASE("save and load through files") {
    TempDir tmp;
    NetworkModel net = builtin_33bus();
    save_network(net, tmp.file("grid.json"));
    NetworkModel back = load_network(tmp.file("grid.json"));
    CHECK(back.buses.size() == 33);
    CHECK(back.total_p_load_kw() == doctest::Approx(3715.0));

    SUBCASE("missing file") { CHECK_THROWS(load_network(tmp.file("nope.json"))); }
    SUBCASE("garbage json carries the path in the message") {
        write_file_atomic(tmp.file("bad.json"), "{ not json");
        std::string msg = message_of([&] { load_network(tmp.file("bad.json")); });
        CHECK(msg.find("bad.json") != std::string::npos);
    }
    SUBCASE("missing field names the element") {
        write_file_atomic(tmp.file("nofield.json"),
                          R"({"s_base_kva":1000,"buses":[{"id":1,"kind":"slack"}]})");
        std::string msg = message_of([&] { load_network(tmp.file("nofield.json")); });
        CHECK(msg.find("bus[0]") != std::string::npos);
        CHECK(msg.find("v_base_kv") != std::string::npos);
    }
}

TEST_CASE("csv loader builds the network from branch rows") {
    TempDir tmp;
    std::string csv =
        "# v_base_kv: 12.66\n"
        "# s_base_kva: 1000\n"
        "branch,from,to,r_ohm,x_ohm,p_kw,q_kvar\n"
        "1,1,2,0.1,0.05,100,60\n"
        "2,2,3,0.2,0.1,90,40\n";
    write_file_atomic(tmp.file("grid.csv"), csv);
    NetworkModel net = load_network(tmp.file("grid.csv"));
    CHECK(net.buses.size() == 3);
    CHECK(net.slack_bus().id == 1);
    CHECK(net.total_p_load_kw() == doctest::Approx(190.0));
    CHECK(net.bus_index(3) >= 0);
    CHECK(net.buses[net.bus_index(3)].q_load_kvar == doctest::Approx(40.0));
    CHECK_FALSE(net.has_sop_buses());

    SUBCASE("sop metadata line") {
        write_file_atomic(tmp.file("sop.csv"), "# sop_buses: 1,2,3\n" + csv);
        CHECK(load_network(tmp.file("sop.csv")).sop_buses == std::array<int, 3>{1, 2, 3});
    }
    SUBCASE("bad number carries the line number") {
        std::string broken = csv;
        broken.replace(broken.find("0.2"), 3, "oops");
        write_file_atomic(tmp.file("bad.csv"), broken);
        std::string msg = message_of([&] { load_network(tmp.file("bad.csv")); });
        CHECK(msg.find("line 5") != std::string::npos);
        CHECK(msg.find("oops") != std::string::npos);
    }
    SUBCASE("missing header") {
        write_file_atomic(tmp.file("nohdr.csv"), "1,1,2,0.1,0.05,100,60\n");
        CHECK_THROWS_AS(load_network(tmp.file("nohdr.csv")), ParseError);
    }
    SUBCASE("short row") {
        write_file_atomic(tmp.file("short.csv"),
                          "branch,from,to,r_ohm,x_ohm,p_kw,q_kvar\n1,1,2,0.1\n");
        std::string msg = message_of([&] { load_network(tmp.file("short.csv")); });
        CHECK(msg.find("expected 7 fields") != std::string::npos);
    }
}

TEST_CASE("scaled_loads multiplies only the loads") {
    NetworkModel net = builtin_33bus();
    NetworkModel half = scaled_loads(net, 0.5);
    CHECK(half.total_p_load_kw() == doctest::Approx(3715.0 * 0.5).epsilon(1e-12));
    CHECK(half.total_q_load_kvar() == doctest::Approx(2300.0 * 0.5).epsilon(1e-12));
    CHECK(half.branches[5].r_ohm == net.branches[5].r_ohm);
    CHECK(half.generators.size() == net.generators.size());
    CHECK(half.sop_buses == net.sop_buses);
}
