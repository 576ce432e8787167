#include <algorithm>
#include <numeric>
#include <optional>
#include <thread>

#include "nadir/error.hpp"
#include "nadir/log.hpp"
#include "nadir/rng.hpp"
#include "nadir/simulator.hpp"

namespace nadir::simulator {

std::string to_string(DisturbanceKind kind) {
    switch (kind) {
        case DisturbanceKind::None: return "none";
        case DisturbanceKind::GeneratorTrip: return "generator_trip";
        case DisturbanceKind::LoadStep: return "load_step";
    }
    return "none";
}

DisturbanceKind disturbance_from_string(const std::string& text) {
    if (text == "none") return DisturbanceKind::None;
    if (text == "generator_trip") return DisturbanceKind::GeneratorTrip;
    if (text == "load_step") return DisturbanceKind::LoadStep;
    throw Error(ErrorCode::InvalidArgument, "unknown disturbance kind '" + text + "'");
}

Scenario draw_scenario(const network::PowerNetwork& net, std::uint64_t seed, int attempt,
                       const ScenarioSetOptions& options) {
    if (net.generators.empty()) throw Error(ErrorCode::InvalidNetwork, "scenario generation needs generators");
    Scenario sc;
    sc.id = attempt;
    sc.seed = derive_seed(seed, static_cast<std::uint64_t>(attempt));
    Rng rng(sc.seed);
    const int level = static_cast<int>(rng.below(static_cast<std::uint64_t>(options.levels)));
    sc.load_level = options.levels == 1 ? options.max_level
                                        : options.min_level + (options.max_level - options.min_level) * level /
                                                                  static_cast<double>(options.levels - 1);

    std::vector<int> load_buses;
    for (const auto& bus : net.buses)
        if (bus.load_p > 0.0) load_buses.push_back(bus.id);

    if (attempt % 2 == 0 || load_buses.empty()) {
        sc.kind = DisturbanceKind::GeneratorTrip;
        sc.target = (attempt / 2) % static_cast<int>(net.generators.size());
    } else {
        sc.kind = DisturbanceKind::LoadStep;
        sc.target = load_buses[static_cast<std::size_t>(rng.below(load_buses.size()))];
        double system_load = 0.0;
        for (const auto& bus : net.buses) system_load += bus.load_p;
        sc.delta_p = rng.uniform(options.min_step_fraction, options.max_step_fraction) * system_load * sc.load_level;
    }
    return sc;
}

namespace {

struct Outcome {
    std::optional<ScenarioRecord> record;
    std::string failure;
};

Outcome run_one(const network::PowerNetwork& net, Scenario sc, const ScenarioSetOptions& options) {
    Outcome out;
    try {
        const DynamicModel model = build_dynamic_model(net, sc.load_level);
        const SimulationTrace trace = simulate(model, sc, options.simulation);
        sc.delta_p = trace.delta_p;
        ScenarioRecord rec{sc, snapshot_features(model, trace, sc), extract_frequency_features(trace)};
        if (!(rec.frequency.nadir > options.nadir_floor) || !std::isfinite(rec.frequency.nadir)) {
            out.failure = "nadir " + std::to_string(rec.frequency.nadir) + " Hz outside the retained range";
            return out;
        }
        out.record = std::move(rec);
    } catch (const Error& e) {
        out.failure = e.what();
    }
    return out;
}

}  // namespace

ScenarioSet generate_scenario_set(const network::PowerNetwork& net, int count, std::uint64_t seed,
                                  const ScenarioSetOptions& options) {
    if (count < 1) throw Error(ErrorCode::InvalidArgument, "scenario count must be at least 1");
    ScenarioSet set;
    set.network_name = net.name;
    set.seed = seed;
    set.requested = count;

    const int threads = std::max(1, options.threads);
    const int block = std::max(16, threads * 4);
    const int max_attempts = count * std::max(1, options.max_attempt_factor);
    int next = 0;
    while (static_cast<int>(set.records.size()) < count && next < max_attempts) {
        const int size = std::min(block, max_attempts - next);
        std::vector<Scenario> scenarios;
        for (int a = 0; a < size; ++a) scenarios.push_back(draw_scenario(net, seed, next + a, options));
        std::vector<Outcome> outcomes(static_cast<std::size_t>(size));
        if (threads == 1) {
            for (int a = 0; a < size; ++a)
                outcomes[static_cast<std::size_t>(a)] = run_one(net, scenarios[static_cast<std::size_t>(a)], options);
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < threads; ++t)
                pool.emplace_back([&, t] {
                    for (int a = t; a < size; a += threads)
                        outcomes[static_cast<std::size_t>(a)] = run_one(net, scenarios[static_cast<std::size_t>(a)], options);
                });
            for (auto& th : pool) th.join();
        }
        // Consumed in attempt order so the set does not depend on the thread count.
        for (int a = 0; a < size && static_cast<int>(set.records.size()) < count; ++a) {
            auto& o = outcomes[static_cast<std::size_t>(a)];
            if (o.record) {
                set.records.push_back(std::move(*o.record));
            } else {
                log::warn("excluded scenario " + std::to_string(next + a) + ": " + o.failure);
                set.exclusions.push_back({scenarios[static_cast<std::size_t>(a)], o.failure});
            }
        }
        next += size;
    }
    if (static_cast<int>(set.records.size()) < count)
        log::warn("only " + std::to_string(set.records.size()) + " of " + std::to_string(count) +
                  " scenarios retained after " + std::to_string(next) + " attempts");
    return set;
}

}  // namespace nadir::simulator
