#include <cmath>
#include <filesystem>
#include <numeric>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "nadir/error.hpp"
#include "nadir/log.hpp"
#include "nadir/simulator.hpp"
#include "nadir/text_io.hpp"

using namespace nadir;
using namespace nadir::simulator;
using nadir::testing::three_machine;

namespace {

Scenario load_step(int bus, double dp) {
    Scenario sc;
    sc.kind = DisturbanceKind::LoadStep;
    sc.target = bus;
    sc.delta_p = dp;
    return sc;
}

Scenario trip(int gen) {
    Scenario sc;
    sc.kind = DisturbanceKind::GeneratorTrip;
    sc.target = gen;
    return sc;
}

const ScenarioSet& large_set() {
    static const ScenarioSet set = [] {
        log::set_level(log::Level::Silent);
        auto s = generate_scenario_set(nadir::testing::ieee39(), 1400, 2024);
        log::set_level(log::Level::Info);
        return s;
    }();
    return set;
}

}  // namespace

TEST(DynamicModel, StartsInEquilibrium) {
    const auto net = nadir::testing::ieee39();
    const auto model = build_dynamic_model(net, 0.8);
    const auto der = equilibrium_derivatives(model);
    for (std::size_t i = 0; i < model.machine_count(); ++i) {
        EXPECT_LE(std::abs(der.angle[i]), 1e-10);
        EXPECT_LE(std::abs(der.speed[i]), 1e-10);
        EXPECT_LE(std::abs(der.mech[i]), 1e-10);
        EXPECT_NEAR(model.pe0[i], model.power_flow.gen_p[i], 1e-6);
        EXPECT_EQ(model.pm0[i], model.pe0[i]);
    }
    // Independent power-flow solve as the oracle for the initial electrical power.
    const auto pf = network::solve_power_flow(net, 0.8);
    for (std::size_t i = 0; i < model.machine_count(); ++i) EXPECT_NEAR(model.pe0[i], pf.gen_p[i], 1e-6);
}

TEST(DynamicModel, LighterLoadNeedsLessMechanicalPower) {
    const auto net = nadir::testing::ieee39();
    const auto low = build_dynamic_model(net, 0.5);
    const auto high = build_dynamic_model(net, 1.0);
    const double a = std::accumulate(low.pm0.begin(), low.pm0.end(), 0.0);
    const double b = std::accumulate(high.pm0.begin(), high.pm0.end(), 0.0);
    EXPECT_LT(a, b);
}

TEST(Simulate, NoDisturbanceHoldsNominalFrequency) {
    const auto model = build_dynamic_model(nadir::testing::ieee39(), 1.0);
    const auto trace = simulate(model, Scenario{});
    ASSERT_EQ(trace.steps(), 6001u);
    double drift = 0.0;
    for (std::size_t k = 0; k < trace.steps(); ++k) {
        drift = std::max(drift, std::abs(trace.coi_hz[k] - 60.0));
        for (double w : trace.speed[k]) drift = std::max(drift, std::abs(60.0 * w));
    }
    EXPECT_LE(drift, 1e-9);
}

TEST(Simulate, GovernorFreeTripRocof) {
    // Machine 2 is scheduled at exactly 0.1 pu; the survivors carry H = 2 + 3 = 5 s.
    auto net = three_machine(2.0, 3.0, 4.0);
    net.generators[2].p_mech = 0.1;
    const auto model = build_dynamic_model(net, 1.0);
    ASSERT_NEAR(model.pe0[2], 0.1, 1e-12);
    SimulationOptions opt;
    opt.horizon = 1.0;  // nothing arrests the decline without governors
    const auto trace = simulate(model, trip(2), opt);
    const double expected = -0.1 / (2.0 * 5.0);
    const double measured = (trace.coi_pu[3] - trace.coi_pu[0]) / (3.0 * trace.dt);
    EXPECT_NEAR(measured / expected, 1.0, 0.02);
    EXPECT_NEAR(measured * 60.0, -0.6, 0.6 * 0.02);
}

TEST(Simulate, GovernorFreeLoadStepRocof) {
    const auto model = build_dynamic_model(three_machine(1.0, 2.0, 2.0), 1.0);
    SimulationOptions opt;
    opt.horizon = 1.0;
    const auto trace = simulate(model, load_step(3, 0.1), opt);
    const double measured = (trace.coi_pu[3] - trace.coi_pu[0]) / (3.0 * trace.dt);
    EXPECT_NEAR(measured / -0.01, 1.0, 0.02);
}

TEST(Simulate, DroopSteadyState) {
    // Aggregate K = 20 and D = 1 shared over three machines.
    const auto model = build_dynamic_model(three_machine(3.0, 4.0, 5.0, 20.0 / 3.0, 1.0 / 3.0), 1.0);
    const auto trace = simulate(model, load_step(3, 0.1));
    EXPECT_NEAR(trace.coi_pu.back(), -0.1 / 21.0, 1e-3);
    for (double w : trace.speed.back()) EXPECT_NEAR(w, -0.1 / 21.0, 1e-3);
}

TEST(Simulate, CoiMomentumBalance) {
    // D = 0 and droop 0 keep P_m frozen, so Σ H Δω = −ΔP t / 2 exactly.
    const auto model = build_dynamic_model(three_machine(2.0, 3.0, 4.0), 1.0);
    for (const auto& sc : {load_step(3, 0.07), trip(1)}) {
        SimulationOptions opt;
        opt.horizon = 2.0;
        const auto trace = simulate(model, sc, opt);
        for (std::size_t k = 0; k < trace.steps(); k += 25) {
            double momentum = 0.0;
            for (std::size_t i = 0; i < model.machine_count(); ++i)
                if (trace.active[i]) momentum += model.h[i] * trace.speed[k][i];
            EXPECT_NEAR(momentum, -trace.delta_p * trace.time[k] / 2.0, 1e-6) << "t=" << trace.time[k];
        }
    }
}

TEST(Simulate, TripRemovesMachine) {
    const auto model = build_dynamic_model(nadir::testing::ieee39(), 0.9);
    const auto trace = simulate(model, trip(4));
    EXPECT_FALSE(trace.active[4]);
    EXPECT_EQ(trace.pe[1][4], 0.0);
    EXPECT_EQ(trace.shares[4], 0.0);
    EXPECT_NEAR(trace.delta_p, model.pe0[4], 1e-15);
    EXPECT_NEAR(std::accumulate(trace.shares.begin(), trace.shares.end(), 0.0), model.pe0[4], 1e-12);
    const auto f = extract_frequency_features(trace);
    EXPECT_LT(f.nadir, f.steady_state);
    EXPECT_LT(f.steady_state, 60.0);
}

TEST(Simulate, HalvingStepBarelyMovesNadir) {
    const auto net = nadir::testing::ieee39();
    for (double level : {0.6, 1.0}) {
        const auto model = build_dynamic_model(net, level);
        for (const auto& sc : {trip(9), trip(2), load_step(15, 6.0), load_step(3, 2.0)}) {
            SimulationOptions coarse, fine;
            fine.dt = coarse.dt / 2.0;
            const double a = extract_frequency_features(simulate(model, sc, coarse)).nadir;
            const double b = extract_frequency_features(simulate(model, sc, fine)).nadir;
            EXPECT_LT(std::abs(a - b), 1e-4);
        }
    }
}

TEST(Simulate, LargerStepGivesLowerNadir) {
    const auto model = build_dynamic_model(nadir::testing::ieee39(), 0.8);
    double previous = 60.0;
    for (double dp = 0.5; dp <= 8.0; dp += 0.5) {
        const double nadir = extract_frequency_features(simulate(model, load_step(20, dp))).nadir;
        EXPECT_LE(nadir, previous);
        previous = nadir;
    }
}

TEST(Simulate, RejectsBadStepAndTarget) {
    const auto model = build_dynamic_model(three_machine(1.0, 1.0, 1.0), 1.0);
    SimulationOptions opt;
    opt.dt = 0.1;
    EXPECT_THROW(simulate(model, Scenario{}, opt), Error);
    try {
        simulate(model, trip(7));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownNode);
    }
}

TEST(Simulate, DivergenceIsReported) {
    // A 5 pu deficit on ~3 s of inertia drives Δω well past 0.2 pu.
    auto net = three_machine(0.5, 0.5, 0.5);
    const auto model = build_dynamic_model(net, 1.0);
    try {
        simulate(model, load_step(3, 5.0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NumericalDivergence);
    }
}

TEST(FrequencyFeatures, ConstantSeries) {
    const std::vector<double> t = {0.0, 1.0, 2.0, 3.0};
    const auto f = extract_frequency_features(t, {60.0, 60.0, 60.0, 60.0});
    EXPECT_EQ(f.nadir, 60.0);
    EXPECT_EQ(f.steady_state, 60.0);
}

TEST(FrequencyFeatures, ExplicitList) {
    const std::vector<double> t = {0.0, 1.0, 2.0, 3.0, 4.0};
    const auto f = extract_frequency_features(t, {60.0, 59.7, 59.8, 59.9, 59.9}, 1.0);
    EXPECT_EQ(f.nadir, 59.7);
    EXPECT_EQ(f.nadir_time, 1.0);
    EXPECT_NEAR(f.steady_state, 59.9, 1e-12);
}

TEST(Snapshot, ResponseHandValues) {
    const auto f = generator_response({0.9, 1.0}, {1.0, 1.0}, {5.0, 10.0}, {true, true});
    EXPECT_NEAR(f[0], -0.1 / 10.0 + 0.1 / 30.0, 1e-15);
    EXPECT_NEAR(f[0], -0.006667, 5e-7);
    EXPECT_NEAR(f[1], 0.003333, 5e-7);
    const auto same = generator_response({0.5, 0.5, 0.5}, {0.6, 0.6, 0.6}, {4.0, 4.0, 4.0}, {true, true, true});
    for (double v : same) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(Snapshot, FeatureVectorsAndReserve) {
    auto net = three_machine(2.0, 3.0, 4.0, 5.0, 0.5);
    net.generators[1].p_max = net.generators[1].p_mech;  // dispatched at its rating
    const auto model = build_dynamic_model(net, 1.0);
    const Scenario sc = load_step(3, 0.05);
    const auto trace = simulate(model, sc);
    const auto snap = snapshot_features(model, trace, sc);
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        const auto expected = feature_catalog()[f].site == FeatureSite::Generator ? 3u : 4u;
        EXPECT_EQ(snap[f].size(), expected) << feature_catalog()[f].key;
    }
    EXPECT_EQ(snap.get("reserve_t0")[1], 0.0);
    for (double r : snap.get("reserve_tf")) EXPECT_GE(r, 0.0);
    EXPECT_NEAR(snap.get("load_tf")[3] - snap.get("load_t0")[3], 0.05, 1e-15);
    const auto& shortage = snap.get("shortage_tf");
    EXPECT_NEAR(std::accumulate(shortage.begin(), shortage.end(), 0.0), 0.05, 1e-12);
    // Voltages sag where load was added.
    EXPECT_LT(snap.get("vm_tf")[3], snap.get("vm_t0")[3]);
}

TEST(ScenarioSet, SameSeedSameListAndThreadIndependent) {
    log::set_level(log::Level::Silent);
    const auto net = nadir::testing::ieee39();
    ScenarioSetOptions serial, parallel;
    parallel.threads = 3;
    const auto a = generate_scenario_set(net, 24, 5, serial);
    const auto b = generate_scenario_set(net, 24, 5, parallel);
    log::set_level(log::Level::Info);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        EXPECT_EQ(a.records[i].scenario.id, b.records[i].scenario.id);
        EXPECT_EQ(a.records[i].scenario.load_level, b.records[i].scenario.load_level);
        EXPECT_EQ(a.records[i].scenario.delta_p, b.records[i].scenario.delta_p);
        EXPECT_EQ(a.records[i].frequency.nadir, b.records[i].frequency.nadir);
        EXPECT_EQ(a.records[i].snapshot.values, b.records[i].snapshot.values);
    }
}

TEST(ScenarioSet, DrawsFromTheLevelGridAndAlternates) {
    const auto net = nadir::testing::ieee39();
    for (int a = 0; a < 200; ++a) {
        const auto sc = draw_scenario(net, 9, a);
        const double idx = (sc.load_level - 0.5) / (0.5 / 19.0);
        EXPECT_NEAR(idx, std::round(idx), 1e-9);
        EXPECT_EQ(sc.kind, a % 2 == 0 ? DisturbanceKind::GeneratorTrip : DisturbanceKind::LoadStep);
        if (sc.kind == DisturbanceKind::LoadStep) {
            double load = 0.0;
            for (const auto& bus : net.buses) load += bus.load_p;
            const double frac = sc.delta_p / (load * sc.load_level);
            EXPECT_GE(frac, 0.05);
            EXPECT_LE(frac, 0.20);
            EXPECT_GT(net.buses[static_cast<std::size_t>(sc.target)].load_p, 0.0);
        }
    }
}

TEST(ScenarioSet, CoverageRangeAndResponseIdentity) {
    const auto& set = large_set();
    const auto net = nadir::testing::ieee39();
    ASSERT_EQ(set.records.size(), 1400u);
    std::vector<int> trips(10, 0);
    for (const auto& rec : set.records) {
        if (rec.scenario.kind == DisturbanceKind::GeneratorTrip) ++trips[static_cast<std::size_t>(rec.scenario.target)];
        EXPECT_TRUE(std::isfinite(rec.frequency.nadir));
        EXPECT_GT(rec.frequency.nadir, 55.0);
        EXPECT_LE(rec.frequency.nadir, 60.0);
        EXPECT_LE(rec.frequency.nadir, rec.frequency.steady_state);
        EXPECT_LE(rec.frequency.steady_state, 60.0);

        const auto& f = rec.snapshot.get("response_tf");
        double weighted = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) weighted += 2.0 * net.generators[i].inertia_h * f[i];
        EXPECT_NEAR(weighted, 0.0, 1e-9);
    }
    for (int g = 0; g < 10; ++g) EXPECT_GE(trips[static_cast<std::size_t>(g)], 1) << "generator " << g;
}

TEST(ScenarioSet, StorageRoundTripIsByteIdentical) {
    log::set_level(log::Level::Silent);
    const auto set = generate_scenario_set(nadir::testing::ieee39(), 12, 3);
    log::set_level(log::Level::Info);
    const auto dir = std::filesystem::temp_directory_path() / "nadir_scenarios_test";
    std::filesystem::remove_all(dir);
    write_scenario_set(dir / "a", set);
    const auto back = read_scenario_set(dir / "a");
    write_scenario_set(dir / "b", back);
    EXPECT_EQ(text::read_file(dir / "a" / "manifest.json"), text::read_file(dir / "b" / "manifest.json"));
    EXPECT_EQ(text::read_file(dir / "a" / "samples.csv"), text::read_file(dir / "b" / "samples.csv"));
    ASSERT_EQ(back.records.size(), set.records.size());
    EXPECT_EQ(back.records[3].snapshot.values, set.records[3].snapshot.values);
    EXPECT_EQ(back.records[3].frequency.nadir, set.records[3].frequency.nadir);
    std::filesystem::remove_all(dir);
}
