#pragma once

#include <filesystem>
#include <string>

#include "nadir/network.hpp"
#include "nadir/rng.hpp"

namespace nadir::testing {

inline std::filesystem::path data_dir() { return NADIR_DATA_DIR; }

inline network::PowerNetwork ieee39() { return network::load_network(data_dir() / "ieee39.json"); }

inline network::Bus make_bus(int index, network::BusKind kind, double load_p = 0.0, double load_q = 0.0) {
    network::Bus bus;
    bus.id = index;
    bus.label = index + 1;
    bus.kind = kind;
    bus.load_p = load_p;
    bus.load_q = load_q;
    return bus;
}

inline network::Branch make_branch(int from, int to, double r, double x, double charging = 0.0) {
    network::Branch br;
    br.from = from;
    br.to = to;
    br.series_impedance = {r, x};
    br.shunt_susceptance = charging;
    return br;
}

inline network::Generator make_generator(int bus, double h, double p_mech, double p_max, double droop = 0.0,
                                         double damping = 0.0, double tc = 5.0, double xd = 0.2) {
    network::Generator g;
    g.bus = bus;
    g.inertia_h = h;
    g.damping_d = damping;
    g.p_max = p_max;
    g.p_mech = p_mech;
    g.droop_gain = droop;
    g.governor_tc = tc;
    g.transient_reactance = xd;
    return g;
}

/// Random tree of `n` buses with a shunt to ground at every bus.
inline network::PowerNetwork random_radial(Rng& rng, int n) {
    network::PowerNetwork net;
    net.name = "radial";
    for (int i = 0; i < n; ++i) {
        auto bus = make_bus(i, i == 0 ? network::BusKind::Slack : network::BusKind::PQ);
        bus.shunt_g = rng.uniform(0.01, 0.5);
        bus.shunt_b = rng.uniform(-0.2, 0.2);
        net.buses.push_back(bus);
    }
    for (int i = 1; i < n; ++i) {
        const int parent = static_cast<int>(rng.below(static_cast<std::uint64_t>(i)));
        net.branches.push_back(make_branch(parent, i, rng.uniform(0.001, 0.05), rng.uniform(0.01, 0.3),
                                           rng.uniform(0.0, 0.1)));
    }
    return net;
}

/// Three machines on a lossless triangle; machine 0 sits on the slack bus.
inline network::PowerNetwork three_machine(double h0, double h1, double h2, double droop = 0.0,
                                           double damping = 0.0) {
    using network::BusKind;
    network::PowerNetwork net;
    net.name = "three-machine";
    net.buses = {make_bus(0, BusKind::Slack, 0.4, 0.05), make_bus(1, BusKind::PV, 0.5, 0.05),
                 make_bus(2, BusKind::PV, 0.3, 0.05), make_bus(3, BusKind::PQ, 0.6, 0.1)};
    net.branches = {make_branch(0, 1, 0.0, 0.1), make_branch(1, 2, 0.0, 0.1), make_branch(2, 0, 0.0, 0.1),
                    make_branch(2, 3, 0.0, 0.05), make_branch(0, 3, 0.0, 0.08)};
    net.generators = {make_generator(0, h0, 0.6, 1.5, droop, damping), make_generator(1, h1, 0.6, 1.5, droop, damping),
                      make_generator(2, h2, 0.6, 1.5, droop, damping)};
    net.validate();
    return net;
}

}  // namespace nadir::testing
