#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include <json.hpp>

#include "nadir/error.hpp"
#include "nadir/network.hpp"
#include "nadir/text_io.hpp"

namespace nadir::network {

namespace {

using nlohmann::json;

BusKind parse_kind(std::string text) {
    std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::tolower(c); });
    if (text == "slack" || text == "ref") return BusKind::Slack;
    if (text == "pv") return BusKind::PV;
    if (text == "pq") return BusKind::PQ;
    throw Error(ErrorCode::InvalidNetwork, "unknown bus kind '" + text + "'");
}

const char* kind_name(BusKind kind) {
    switch (kind) {
        case BusKind::Slack: return "slack";
        case BusKind::PV: return "PV";
        case BusKind::PQ: return "PQ";
    }
    return "PQ";
}

int resolve(const std::map<int, int>& labels, int label, const std::string& where) {
    auto it = labels.find(label);
    if (it == labels.end())
        throw Error(ErrorCode::InvalidNetwork, where + " references missing bus " + std::to_string(label));
    return it->second;
}

}  // namespace

int PowerNetwork::slack_bus() const {
    for (const auto& bus : buses)
        if (bus.kind == BusKind::Slack) return bus.id;
    return -1;
}

int PowerNetwork::index_of_label(int label) const {
    for (const auto& bus : buses)
        if (bus.label == label) return bus.id;
    return -1;
}

void PowerNetwork::validate() const {
    const int n = static_cast<int>(buses.size());
    if (n == 0) throw Error(ErrorCode::InvalidNetwork, "network has no buses");
    int slack_count = 0;
    std::set<int> labels;
    for (int i = 0; i < n; ++i) {
        const Bus& bus = buses[static_cast<std::size_t>(i)];
        if (bus.id != i) throw Error(ErrorCode::InvalidNetwork, "bus ids must be contiguous from 0");
        if (!labels.insert(bus.label).second)
            throw Error(ErrorCode::InvalidNetwork, "duplicate bus label " + std::to_string(bus.label));
        if (bus.kind == BusKind::Slack) ++slack_count;
        if (bus.load_p < 0.0)
            throw Error(ErrorCode::InvalidNetwork, "negative demand at bus " + std::to_string(bus.label));
        if (bus.voltage_setpoint <= 0.0)
            throw Error(ErrorCode::InvalidNetwork, "non-positive voltage setpoint at bus " + std::to_string(bus.label));
    }
    if (slack_count != 1)
        throw Error(ErrorCode::InvalidNetwork, "expected exactly one slack bus, found " + std::to_string(slack_count));
    for (const auto& br : branches) {
        if (br.from < 0 || br.from >= n || br.to < 0 || br.to >= n)
            throw Error(ErrorCode::InvalidNetwork, "branch references a bus outside the network");
        if (br.from == br.to) throw Error(ErrorCode::InvalidNetwork, "branch connects a bus to itself");
        if (br.series_impedance == Complex{0.0, 0.0})
            throw Error(ErrorCode::InvalidNetwork, "branch with zero series impedance");
        if (br.tap_ratio <= 0.0) throw Error(ErrorCode::InvalidNetwork, "non-positive tap ratio");
    }
    for (const auto& gen : generators) {
        if (gen.bus < 0 || gen.bus >= n) throw Error(ErrorCode::InvalidNetwork, "generator on missing bus");
        const std::string where = " (generator at bus " + std::to_string(buses[static_cast<std::size_t>(gen.bus)].label) + ")";
        if (!(gen.inertia_h > 0.0)) throw Error(ErrorCode::InvalidNetwork, "inertia must be positive" + where);
        if (gen.p_mech < 0.0 || gen.p_mech > gen.p_max)
            throw Error(ErrorCode::InvalidNetwork, "p_mech outside [0, p_max]" + where);
        if (gen.droop_gain < 0.0) throw Error(ErrorCode::InvalidNetwork, "negative droop gain" + where);
        if (!(gen.governor_tc > 0.0)) throw Error(ErrorCode::InvalidNetwork, "governor time constant must be positive" + where);
        if (!(gen.transient_reactance > 0.0)) throw Error(ErrorCode::InvalidNetwork, "transient reactance must be positive" + where);
        if (gen.damping_d < 0.0) throw Error(ErrorCode::InvalidNetwork, "negative damping" + where);
    }
    for (const auto& ren : renewables)
        if (ren.bus < 0 || ren.bus >= n) throw Error(ErrorCode::InvalidNetwork, "renewable on missing bus");
}

PowerNetwork parse_network(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidNetwork, std::string("malformed network JSON: ") + e.what());
    }

    PowerNetwork net;
    try {
        net.name = doc.value("name", std::string{});
        net.base_mva = doc.value("base_mva", 100.0);
        net.base_kv = doc.value("base_kv", 0.0);
        net.frequency_hz = doc.value("frequency_hz", 60.0);

        std::vector<Bus> buses;
        for (const auto& jb : doc.at("buses")) {
            Bus bus;
            bus.label = jb.at("id").get<int>();
            bus.kind = parse_kind(jb.value("kind", std::string("PQ")));
            bus.voltage_setpoint = jb.value("voltage_setpoint", 1.0);
            bus.load_p = jb.value("load_p", 0.0);
            bus.load_q = jb.value("load_q", 0.0);
            bus.shunt_g = jb.value("shunt_g", 0.0);
            bus.shunt_b = jb.value("shunt_b", 0.0);
            buses.push_back(bus);
        }
        std::sort(buses.begin(), buses.end(), [](const Bus& a, const Bus& b) { return a.label < b.label; });
        std::map<int, int> labels;
        for (std::size_t i = 0; i < buses.size(); ++i) {
            buses[i].id = static_cast<int>(i);
            if (!labels.emplace(buses[i].label, buses[i].id).second)
                throw Error(ErrorCode::InvalidNetwork, "duplicate bus id " + std::to_string(buses[i].label));
        }
        net.buses = std::move(buses);

        if (doc.contains("branches")) {
            for (const auto& jb : doc.at("branches")) {
                Branch br;
                br.from = resolve(labels, jb.at("from").get<int>(), "branch");
                br.to = resolve(labels, jb.at("to").get<int>(), "branch");
                br.series_impedance = Complex(jb.value("r", 0.0), jb.value("x", 0.0));
                br.shunt_susceptance = jb.value("shunt_susceptance", 0.0);
                br.tap_ratio = jb.value("tap_ratio", 1.0);
                net.branches.push_back(br);
            }
        }

        if (doc.contains("generators")) {
            for (const auto& jg : doc.at("generators")) {
                Generator gen;
                gen.bus = resolve(labels, jg.at("bus").get<int>(), "generator");
                const double machine_base = jg.value("mbase_mva", net.base_mva);
                const double to_system = machine_base / net.base_mva;
                gen.inertia_h = jg.at("inertia_h").get<double>() * to_system;
                gen.damping_d = jg.value("damping_d", 0.0) * to_system;
                gen.p_max = jg.at("p_max").get<double>();
                gen.p_mech = jg.at("p_mech").get<double>();
                gen.droop_gain = jg.value("droop_gain", 0.0);
                gen.governor_tc = jg.value("governor_tc", 1.0);
                gen.transient_reactance = jg.at("transient_reactance").get<double>();
                net.generators.push_back(gen);
            }
        }

        if (doc.contains("renewables")) {
            for (const auto& jr : doc.at("renewables")) {
                Renewable ren;
                ren.bus = resolve(labels, jr.at("bus").get<int>(), "renewable");
                ren.p = jr.value("p", 0.0);
                ren.q = jr.value("q", 0.0);
                ren.p_rated = jr.value("p_rated", ren.p);
                net.renewables.push_back(ren);
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidNetwork, std::string("bad network field: ") + e.what());
    }

    net.validate();
    return net;
}

PowerNetwork load_network(const std::filesystem::path& path) {
    try {
        return parse_network(text::read_file(path));
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

std::string network_to_json(const PowerNetwork& net) {
    json doc;
    doc["name"] = net.name;
    doc["base_mva"] = net.base_mva;
    doc["base_kv"] = net.base_kv;
    doc["frequency_hz"] = net.frequency_hz;
    auto label = [&](int index) { return net.buses[static_cast<std::size_t>(index)].label; };
    json buses = json::array();
    for (const auto& bus : net.buses) {
        buses.push_back({{"id", bus.label}, {"kind", kind_name(bus.kind)}, {"voltage_setpoint", bus.voltage_setpoint},
                         {"load_p", bus.load_p}, {"load_q", bus.load_q}, {"shunt_g", bus.shunt_g},
                         {"shunt_b", bus.shunt_b}});
    }
    doc["buses"] = buses;
    json branches = json::array();
    for (const auto& br : net.branches) {
        branches.push_back({{"from", label(br.from)}, {"to", label(br.to)}, {"r", br.series_impedance.real()},
                            {"x", br.series_impedance.imag()}, {"shunt_susceptance", br.shunt_susceptance},
                            {"tap_ratio", br.tap_ratio}});
    }
    doc["branches"] = branches;
    json gens = json::array();
    for (const auto& g : net.generators) {
        gens.push_back({{"bus", label(g.bus)}, {"inertia_h", g.inertia_h}, {"damping_d", g.damping_d},
                        {"p_max", g.p_max}, {"p_mech", g.p_mech}, {"droop_gain", g.droop_gain},
                        {"governor_tc", g.governor_tc}, {"transient_reactance", g.transient_reactance}});
    }
    doc["generators"] = gens;
    json rens = json::array();
    for (const auto& r : net.renewables)
        rens.push_back({{"bus", label(r.bus)}, {"p", r.p}, {"q", r.q}, {"p_rated", r.p_rated}});
    doc["renewables"] = rens;
    return doc.dump(2);
}

}  // namespace nadir::network
