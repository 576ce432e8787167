#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "nadir/error.hpp"
#include "nadir/simulator.hpp"

namespace nadir::simulator {

namespace {

/// Laplacian over the listed machines scattered into an m×m matrix over all generators.
network::RealMatrix full_laplacian(const network::ReducedNetwork& reduced, std::size_t machines) {
    const network::RealMatrix local = network::synchronizing_matrix(reduced);
    network::RealMatrix full = network::RealMatrix::Zero(static_cast<Eigen::Index>(machines),
                                                         static_cast<Eigen::Index>(machines));
    for (std::size_t a = 0; a < reduced.generators.size(); ++a)
        for (std::size_t b = 0; b < reduced.generators.size(); ++b)
            full(reduced.generators[a], reduced.generators[b]) =
                local(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    return full;
}

struct State {
    std::vector<double> delta, speed, pm;
};

struct Event {
    std::vector<bool> active;
    std::vector<double> shares;
    network::RealMatrix laplacian;
    double delta_p = 0.0;
};

class Integrator {
public:
    Integrator(const DynamicModel& model, const Event& event)
        : model_(model), event_(event), m_(model.machine_count()), omega0_(2.0 * std::numbers::pi * model.f0) {}

    double electrical_power(const State& s, std::size_t i) const {
        double coupling = 0.0;
        for (std::size_t k = 0; k < m_; ++k)
            if (event_.active[k])
                coupling += event_.laplacian(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * s.delta[k];
        return model_.pe0[i] + event_.shares[i] + coupling;
    }

    double mech_ceiling(std::size_t i) const { return std::max(model_.p_max[i], model_.pm0[i]); }

    void derivatives(const State& s, State& out) const {
        for (std::size_t i = 0; i < m_; ++i) {
            if (!event_.active[i]) {
                out.delta[i] = out.speed[i] = out.pm[i] = 0.0;
                continue;
            }
            const double pe = electrical_power(s, i);
            out.delta[i] = omega0_ * s.speed[i];
            out.speed[i] = (s.pm[i] - pe - model_.d[i] * s.speed[i]) / (2.0 * model_.h[i]);
            double dpm = (-model_.droop[i] * s.speed[i] - (s.pm[i] - model_.pm0[i])) / model_.tg[i];
            // Limiter: no further rise at the ceiling, no fall below zero.
            if ((s.pm[i] >= mech_ceiling(i) && dpm > 0.0) || (s.pm[i] <= 0.0 && dpm < 0.0)) dpm = 0.0;
            out.pm[i] = dpm;
        }
    }

    void step(State& s, double dt) {
        resize(k1_);
        resize(k2_);
        resize(k3_);
        resize(k4_);
        resize(tmp_);
        derivatives(s, k1_);
        axpy(s, k1_, 0.5 * dt, tmp_);
        derivatives(tmp_, k2_);
        axpy(s, k2_, 0.5 * dt, tmp_);
        derivatives(tmp_, k3_);
        axpy(s, k3_, dt, tmp_);
        derivatives(tmp_, k4_);
        for (std::size_t i = 0; i < m_; ++i) {
            if (!event_.active[i]) continue;
            s.delta[i] += dt / 6.0 * (k1_.delta[i] + 2.0 * k2_.delta[i] + 2.0 * k3_.delta[i] + k4_.delta[i]);
            s.speed[i] += dt / 6.0 * (k1_.speed[i] + 2.0 * k2_.speed[i] + 2.0 * k3_.speed[i] + k4_.speed[i]);
            s.pm[i] += dt / 6.0 * (k1_.pm[i] + 2.0 * k2_.pm[i] + 2.0 * k3_.pm[i] + k4_.pm[i]);
            s.pm[i] = std::clamp(s.pm[i], 0.0, mech_ceiling(i));
        }
    }

private:
    void resize(State& s) const {
        s.delta.resize(m_);
        s.speed.resize(m_);
        s.pm.resize(m_);
    }
    void axpy(const State& s, const State& k, double a, State& out) const {
        for (std::size_t i = 0; i < m_; ++i) {
            out.delta[i] = s.delta[i] + a * k.delta[i];
            out.speed[i] = s.speed[i] + a * k.speed[i];
            out.pm[i] = s.pm[i] + a * k.pm[i];
        }
    }

    const DynamicModel& model_;
    const Event& event_;
    std::size_t m_;
    double omega0_;
    State k1_, k2_, k3_, k4_, tmp_;
};

Event make_event(const DynamicModel& model, const Scenario& scenario) {
    const std::size_t m = model.machine_count();
    Event ev;
    ev.active = model.in_service;
    ev.shares.assign(m, 0.0);
    ev.laplacian = model.laplacian;
    const auto& net = model.network;
    const auto& pf = model.power_flow;

    switch (scenario.kind) {
        case DisturbanceKind::None:
            break;
        case DisturbanceKind::GeneratorTrip: {
            const int g = scenario.target;
            if (g < 0 || g >= static_cast<int>(m) || !model.in_service[static_cast<std::size_t>(g)])
                throw Error(ErrorCode::UnknownNode, "trip target " + std::to_string(g) + " is not an in-service generator");
            ev.active[static_cast<std::size_t>(g)] = false;
            ev.delta_p = model.pe0[static_cast<std::size_t>(g)];
            const int bus = net.generators[static_cast<std::size_t>(g)].bus;
            const auto coeffs = network::sync_coefficients(net, pf, bus, g);
            const auto shares = network::distribute_unbalanced_power(coeffs, ev.delta_p);
            for (std::size_t a = 0; a < coeffs.generators.size(); ++a)
                ev.shares[static_cast<std::size_t>(coeffs.generators[a])] = shares[a];
            ev.laplacian = full_laplacian(network::reduce_to_internal_nodes(net, pf, {}, g), m);
            break;
        }
        case DisturbanceKind::LoadStep: {
            const int bus = scenario.target;
            if (bus < 0 || bus >= static_cast<int>(net.bus_count()))
                throw Error(ErrorCode::UnknownNode, "load step bus " + std::to_string(bus));
            if (scenario.delta_p == 0.0) throw Error(ErrorCode::InvalidArgument, "load step of zero size");
            ev.delta_p = scenario.delta_p;
            const auto coeffs = network::sync_coefficients(net, pf, bus);
            const auto shares = network::distribute_unbalanced_power(coeffs, ev.delta_p);
            for (std::size_t a = 0; a < coeffs.generators.size(); ++a)
                ev.shares[static_cast<std::size_t>(coeffs.generators[a])] = shares[a];
            break;
        }
    }
    return ev;
}

double coi(const std::vector<double>& speed, const std::vector<double>& h, const std::vector<bool>& active) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < speed.size(); ++i)
        if (active[i]) {
            num += h[i] * speed[i];
            den += h[i];
        }
    return den > 0.0 ? num / den : 0.0;
}

}  // namespace

DynamicModel build_dynamic_model(const network::PowerNetwork& net, double load_level) {
    DynamicModel model;
    model.network = net;
    model.load_level = load_level;
    model.f0 = net.frequency_hz;
    model.power_flow = network::solve_power_flow(net, load_level);
    const auto& op = model.power_flow.operating_point;
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        const auto& gen = net.generators[g];
        model.h.push_back(gen.inertia_h);
        model.d.push_back(gen.damping_d);
        model.p_max.push_back(gen.p_max);
        model.droop.push_back(gen.droop_gain);
        model.tg.push_back(gen.governor_tc);
        const bool on = op.gen_in_service[g];
        model.in_service.push_back(on);
        model.pe0.push_back(on ? model.power_flow.gen_p[g] : 0.0);
        model.pm0.push_back(model.pe0.back());
    }
    model.laplacian = full_laplacian(network::reduce_to_internal_nodes(net, model.power_flow, {}), model.machine_count());
    return model;
}

Derivatives equilibrium_derivatives(const DynamicModel& model) {
    const Event ev = make_event(model, {});
    const std::size_t m = model.machine_count();
    State s{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0), model.pm0};
    State out{std::vector<double>(m), std::vector<double>(m), std::vector<double>(m)};
    Integrator(model, ev).derivatives(s, out);
    return {out.delta, out.speed, out.pm};
}

SimulationTrace simulate(const DynamicModel& model, const Scenario& scenario, const SimulationOptions& options) {
    if (!(options.dt > 0.0 && options.dt <= 0.05))
        throw Error(ErrorCode::InvalidArgument, "time step must lie in (0, 0.05] s");
    if (!(options.horizon > 0.0)) throw Error(ErrorCode::InvalidArgument, "horizon must be positive");

    const Event ev = make_event(model, scenario);
    const std::size_t m = model.machine_count();
    const auto steps = static_cast<std::size_t>(std::llround(options.horizon / options.dt));

    SimulationTrace trace;
    trace.dt = options.dt;
    trace.active = ev.active;
    trace.shares = ev.shares;
    trace.delta_p = ev.delta_p;
    trace.time.reserve(steps + 1);
    for (auto* series : {&trace.delta, &trace.speed, &trace.pm, &trace.pe}) series->reserve(steps + 1);

    State s{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0), model.pm0};
    Integrator integrator(model, ev);

    // Sample 0 is the pre-event equilibrium with every pre-event machine present.
    trace.time.push_back(0.0);
    trace.delta.push_back(s.delta);
    trace.speed.push_back(s.speed);
    trace.pm.push_back(s.pm);
    trace.pe.push_back(model.pe0);
    trace.coi_pu.push_back(coi(s.speed, model.h, model.in_service));

    for (std::size_t i = 0; i < m; ++i)
        if (!ev.active[i]) s.pm[i] = 0.0;

    std::vector<double> pe(m);
    for (std::size_t k = 1; k <= steps; ++k) {
        integrator.step(s, options.dt);
        for (std::size_t i = 0; i < m; ++i) {
            pe[i] = ev.active[i] ? integrator.electrical_power(s, i) : 0.0;
            if (!std::isfinite(s.speed[i]) || !std::isfinite(s.pm[i]) || std::abs(s.speed[i]) > options.divergence_limit) {
                std::ostringstream msg;
                msg << "scenario " << scenario.id << ": machine " << i << " speed deviation " << s.speed[i]
                    << " pu at t=" << static_cast<double>(k) * options.dt << " s";
                throw Error(ErrorCode::NumericalDivergence, msg.str());
            }
        }
        trace.time.push_back(static_cast<double>(k) * options.dt);
        trace.delta.push_back(s.delta);
        trace.speed.push_back(s.speed);
        trace.pm.push_back(s.pm);
        trace.pe.push_back(pe);
        trace.coi_pu.push_back(coi(s.speed, model.h, ev.active));
    }
    trace.coi_hz.reserve(trace.coi_pu.size());
    for (double w : trace.coi_pu) trace.coi_hz.push_back(model.f0 * (1.0 + w));
    return trace;
}

FrequencyFeatures extract_frequency_features(const std::vector<double>& time, const std::vector<double>& coi_hz,
                                             double window) {
    if (coi_hz.empty() || time.size() != coi_hz.size())
        throw Error(ErrorCode::InvalidArgument, "frequency features need a non-empty trace");
    FrequencyFeatures out;
    const auto it = std::min_element(coi_hz.begin(), coi_hz.end());
    out.nadir = *it;
    out.nadir_time = time[static_cast<std::size_t>(it - coi_hz.begin())];
    const double start = time.back() - window;
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < time.size(); ++i)
        if (time[i] >= start - 1e-12) {
            total += coi_hz[i];
            ++count;
        }
    out.steady_state = total / static_cast<double>(count);
    return out;
}

FrequencyFeatures extract_frequency_features(const SimulationTrace& trace, double window) {
    return extract_frequency_features(trace.time, trace.coi_hz, window);
}

}  // namespace nadir::simulator
