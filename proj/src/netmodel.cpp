#include "sopflex/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sopflex/errors.hpp"
#include "sopflex/ioutil.hpp"

namespace sopflex {

using nlohmann::json;

int NetworkModel::bus_index(int id) const {
    for (size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == id) return static_cast<int>(i);
    return -1;
}

const Bus& NetworkModel::slack_bus() const {
    for (const auto& b : buses)
        if (b.kind == BusKind::slack) return b;
    throw ValidationError("network has no slack bus");
}

double NetworkModel::total_p_load_kw() const {
    double s = 0.0;
    for (const auto& b : buses) s += b.p_load_kw;
    return s;
}

double NetworkModel::total_q_load_kvar() const {
    double s = 0.0;
    for (const auto& b : buses) s += b.q_load_kvar;
    return s;
}

void validate_network(const NetworkModel& net) {
    if (net.buses.empty()) throw ValidationError("network has no buses");
    if (!(net.s_base_kva > 0.0)) throw ValidationError("s_base_kva must be positive");

    std::set<int> ids;
    int slack_count = 0;
    for (const auto& b : net.buses) {
        if (b.id <= 0) throw ValidationError("bus id must be positive, got " + std::to_string(b.id));
        if (!ids.insert(b.id).second)
            throw ValidationError("duplicate bus id " + std::to_string(b.id));
        if (!std::isfinite(b.p_load_kw) || !std::isfinite(b.q_load_kvar))
            throw ValidationError("non-finite load at bus " + std::to_string(b.id));
        if (!(b.v_base_kv > 0.0))
            throw ValidationError("v_base_kv must be positive at bus " + std::to_string(b.id));
        if (b.kind == BusKind::slack) ++slack_count;
    }
    if (slack_count == 0) throw ValidationError("no slack bus");
    if (slack_count > 1) throw ValidationError("multiple slack buses");

    size_t closed = 0;
    for (const auto& br : net.branches) {
        if (!ids.count(br.from) || !ids.count(br.to))
            throw ValidationError("branch references unknown bus " +
                                  std::to_string(ids.count(br.from) ? br.to : br.from));
        if (br.from == br.to)
            throw ValidationError("branch is a self-loop at bus " + std::to_string(br.from));
        if (br.r_ohm < 0.0)
            throw ValidationError("negative resistance on branch " + std::to_string(br.from) + "-" +
                                  std::to_string(br.to));
        if (!std::isfinite(br.r_ohm) || !std::isfinite(br.x_ohm))
            throw ValidationError("non-finite impedance on branch " + std::to_string(br.from) + "-" +
                                  std::to_string(br.to));
        if (br.status == BranchStatus::closed) ++closed;
    }

    // Radiality: closed branches must form one spanning tree. Both the edge
    // count and connectivity are checked so loops and islands are named
    // separately.
    if (closed != net.buses.size() - 1)
        throw ValidationError("radiality violated: " + std::to_string(closed) + " closed branches for " +
                              std::to_string(net.buses.size()) + " buses (expected " +
                              std::to_string(net.buses.size() - 1) + ")");
    std::map<int, std::vector<int>> adj;
    for (const auto& br : net.branches)
        if (br.status == BranchStatus::closed) {
            adj[br.from].push_back(br.to);
            adj[br.to].push_back(br.from);
        }
    std::set<int> seen;
    std::queue<int> work;
    work.push(net.buses.front().id);
    seen.insert(net.buses.front().id);
    while (!work.empty()) {
        int u = work.front();
        work.pop();
        for (int v : adj[u])
            if (seen.insert(v).second) work.push(v);
    }
    if (seen.size() != net.buses.size())
        throw ValidationError("network not connected via closed branches (" +
                              std::to_string(net.buses.size() - seen.size()) + " unreachable buses)");

    for (const auto& g : net.generators) {
        if (!ids.count(g.bus))
            throw ValidationError("generator references unknown bus " + std::to_string(g.bus));
        if (g.p_rated_kw < 0.0)
            throw ValidationError("negative generator rating at bus " + std::to_string(g.bus));
    }

    bool any_sop = net.sop_buses[0] != 0 || net.sop_buses[1] != 0 || net.sop_buses[2] != 0;
    if (any_sop) {
        std::set<int> sop(net.sop_buses.begin(), net.sop_buses.end());
        if (sop.size() != 3)
            throw ValidationError("sop_buses must be three distinct buses");
        for (int s : net.sop_buses)
            if (!ids.count(s))
                throw ValidationError("sop bus " + std::to_string(s) + " does not exist");
    }
}

// ---------------------------------------------------------------------------
// JSON (native format)

static std::string kind_name(BusKind k) { return k == BusKind::slack ? "slack" : "pq"; }
static std::string status_name(BranchStatus s) { return s == BranchStatus::closed ? "closed" : "open"; }

std::string network_to_json(const NetworkModel& net) {
    json doc;
    doc["s_base_kva"] = net.s_base_kva;
    if (net.has_sop_buses())
        doc["sop_buses"] = {net.sop_buses[0], net.sop_buses[1], net.sop_buses[2]};
    json buses = json::array();
    for (const auto& b : net.buses) {
        buses.push_back({{"id", b.id},
                         {"kind", kind_name(b.kind)},
                         {"p_load_kw", b.p_load_kw},
                         {"q_load_kvar", b.q_load_kvar},
                         {"v_base_kv", b.v_base_kv}});
    }
    doc["buses"] = buses;
    json branches = json::array();
    for (const auto& br : net.branches) {
        branches.push_back({{"from", br.from},
                            {"to", br.to},
                            {"r_ohm", br.r_ohm},
                            {"x_ohm", br.x_ohm},
                            {"status", status_name(br.status)}});
    }
    doc["branches"] = branches;
    json gens = json::array();
    for (const auto& g : net.generators) {
        gens.push_back({{"bus", g.bus}, {"p_rated_kw", g.p_rated_kw}, {"profile", g.profile_key}});
    }
    doc["generators"] = gens;
    return doc.dump(2) + "\n";
}

template <typename T>
static T require_field(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key))
        throw ParseError(where + ": missing field '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(where + ": bad field '" + key + "': " + e.what());
    }
}

NetworkModel network_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("json parse error: ") + e.what());
    }
    NetworkModel net;
    net.s_base_kva = require_field<double>(doc, "s_base_kva", "network");
    if (doc.contains("sop_buses")) {
        auto arr = doc.at("sop_buses");
        if (!arr.is_array() || arr.size() != 3)
            throw ParseError("network: sop_buses must be an array of three bus ids");
        for (int i = 0; i < 3; ++i) net.sop_buses[i] = arr.at(i).get<int>();
    }
    size_t n = 0;
    for (const auto& b : doc.value("buses", json::array())) {
        std::string where = "bus[" + std::to_string(n++) + "]";
        Bus bus;
        bus.id = require_field<int>(b, "id", where);
        std::string kind = require_field<std::string>(b, "kind", where);
        if (kind == "slack")
            bus.kind = BusKind::slack;
        else if (kind == "pq")
            bus.kind = BusKind::pq;
        else
            throw ParseError(where + ": unknown bus kind '" + kind + "'");
        bus.p_load_kw = b.value("p_load_kw", 0.0);
        bus.q_load_kvar = b.value("q_load_kvar", 0.0);
        bus.v_base_kv = require_field<double>(b, "v_base_kv", where);
        net.buses.push_back(bus);
    }
    n = 0;
    for (const auto& b : doc.value("branches", json::array())) {
        std::string where = "branch[" + std::to_string(n++) + "]";
        Branch br;
        br.from = require_field<int>(b, "from", where);
        br.to = require_field<int>(b, "to", where);
        br.r_ohm = require_field<double>(b, "r_ohm", where);
        br.x_ohm = require_field<double>(b, "x_ohm", where);
        std::string status = b.value("status", std::string("closed"));
        if (status == "closed")
            br.status = BranchStatus::closed;
        else if (status == "open")
            br.status = BranchStatus::open;
        else
            throw ParseError(where + ": unknown branch status '" + status + "'");
        net.branches.push_back(br);
    }
    n = 0;
    for (const auto& g : doc.value("generators", json::array())) {
        std::string where = "generator[" + std::to_string(n++) + "]";
        Generator gen;
        gen.bus = require_field<int>(g, "bus", where);
        gen.p_rated_kw = require_field<double>(g, "p_rated_kw", where);
        gen.profile_key = g.value("profile", std::string());
        net.generators.push_back(gen);
    }
    validate_network(net);
    return net;
}

// ---------------------------------------------------------------------------
// Matpower-like CSV: the widely circulated 33-bus table layout. One row per
// branch with the load attached to the receiving bus:
//   branch,from,to,r_ohm,x_ohm,p_kw,q_kvar
// Optional '#' metadata lines: "# sop_buses: a,b,c", "# v_base_kv: x",
// "# s_base_kva: x". Bus 1 is the slack.

static std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

static double parse_num(const std::string& s, int line_no, const std::string& field) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing chars");
        return v;
    } catch (const std::exception&) {
        throw ParseError("csv line " + std::to_string(line_no) + ": bad " + field + " '" + s + "'");
    }
}

static NetworkModel network_from_csv(const std::string& text) {
    NetworkModel net;
    double v_base = 12.66;
    net.s_base_kva = 1000.0;
    bool sop_given = false;

    struct Row {
        int from, to;
        double r, x, p, q;
    };
    std::vector<Row> rows;

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        if (line[0] == '#') {
            auto colon = line.find(':');
            if (colon == std::string::npos) continue;
            std::string key = line.substr(1, colon - 1);
            std::string val = line.substr(colon + 1);
            key.erase(std::remove(key.begin(), key.end(), ' '), key.end());
            if (key == "sop_buses") {
                auto parts = split_csv(val);
                if (parts.size() != 3)
                    throw ParseError("csv line " + std::to_string(line_no) + ": sop_buses needs three ids");
                for (int i = 0; i < 3; ++i)
                    net.sop_buses[i] = static_cast<int>(parse_num(parts[i], line_no, "sop bus"));
                sop_given = true;
            } else if (key == "v_base_kv") {
                v_base = parse_num(val, line_no, "v_base_kv");
            } else if (key == "s_base_kva") {
                net.s_base_kva = parse_num(val, line_no, "s_base_kva");
            }
            continue;
        }
        auto fields = split_csv(line);
        if (!header_seen) {
            if (fields.size() < 7 || fields[0] != "branch")
                throw ParseError("csv line " + std::to_string(line_no) +
                                 ": expected header 'branch,from,to,r_ohm,x_ohm,p_kw,q_kvar'");
            header_seen = true;
            continue;
        }
        if (fields.size() < 7)
            throw ParseError("csv line " + std::to_string(line_no) + ": expected 7 fields, got " +
                             std::to_string(fields.size()));
        Row r;
        r.from = static_cast<int>(parse_num(fields[1], line_no, "from"));
        r.to = static_cast<int>(parse_num(fields[2], line_no, "to"));
        r.r = parse_num(fields[3], line_no, "r_ohm");
        r.x = parse_num(fields[4], line_no, "x_ohm");
        r.p = parse_num(fields[5], line_no, "p_kw");
        r.q = parse_num(fields[6], line_no, "q_kvar");
        rows.push_back(r);
    }
    if (rows.empty()) throw ParseError("csv: no branch rows");

    std::set<int> ids;
    for (const auto& r : rows) {
        ids.insert(r.from);
        ids.insert(r.to);
    }
    std::map<int, std::pair<double, double>> load;
    for (const auto& r : rows) {
        load[r.to].first += r.p;
        load[r.to].second += r.q;
    }
    for (int id : ids) {
        Bus b;
        b.id = id;
        b.kind = id == *ids.begin() ? BusKind::slack : BusKind::pq;
        b.p_load_kw = load.count(id) ? load[id].first : 0.0;
        b.q_load_kvar = load.count(id) ? load[id].second : 0.0;
        b.v_base_kv = v_base;
        net.buses.push_back(b);
    }
    for (const auto& r : rows) {
        Branch br;
        br.from = r.from;
        br.to = r.to;
        br.r_ohm = r.r;
        br.x_ohm = r.x;
        net.branches.push_back(br);
    }
    if (!sop_given && ids.count(33) && ids.count(18) && ids.count(25))
        net.sop_buses = {33, 18, 25};
    validate_network(net);
    return net;
}

NetworkModel load_network(const std::string& path, NetworkFormat format) {
    std::string text = read_file(path);
    try {
        return format == NetworkFormat::native_json ? network_from_json(text) : network_from_csv(text);
    } catch (ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

NetworkModel load_network(const std::string& path) {
    auto dot = path.rfind('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    return load_network(path, ext == ".csv" ? NetworkFormat::matpower_csv : NetworkFormat::native_json);
}

void save_network(const NetworkModel& net, const std::string& path) {
    write_file_atomic(path, network_to_json(net));
}

NetworkModel scaled_loads(const NetworkModel& net, double demand_multiplier) {
    NetworkModel out = net;
    for (auto& b : out.buses) {
        b.p_load_kw *= demand_multiplier;
        b.q_load_kvar *= demand_multiplier;
    }
    return out;
}

}  // namespace sopflex
