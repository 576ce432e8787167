#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nadir/network.hpp"

namespace nadir::simulator {

/// Linearized multi-machine model about a solved operating point. Angles are
/// deviations from the equilibrium, speeds are per-unit deviations.
struct DynamicModel {
    network::PowerNetwork network;
    double load_level = 1.0;
    network::PowerFlowSolution power_flow;
    std::vector<double> h, d, p_max, droop, tg;  // per generator
    std::vector<double> pe0, pm0;
    std::vector<bool> in_service;
    network::RealMatrix laplacian;  // over all generators; rows of out-of-service machines are 0
    double f0 = 60.0;

    std::size_t machine_count() const { return h.size(); }
};

DynamicModel build_dynamic_model(const network::PowerNetwork& network, double load_level);

enum class DisturbanceKind { None, GeneratorTrip, LoadStep };

struct Scenario {
    int id = 0;
    double load_level = 1.0;
    DisturbanceKind kind = DisturbanceKind::None;
    int target = -1;       // generator index for trips, bus index for load steps
    double delta_p = 0.0;  // per-unit; trips fill this with the lost P_e
    std::uint64_t seed = 0;
};

struct SimulationOptions {
    double dt = 0.01;
    double horizon = 60.0;
    double divergence_limit = 0.2;  // |Δω| in per-unit
};

/// Sample 0 is the pre-event state; the event acts from t = 0⁺.
struct SimulationTrace {
    double dt = 0.0;
    std::vector<double> time;
    std::vector<bool> active;  // machines present after the event
    std::vector<std::vector<double>> delta, speed, pm, pe;  // [step][machine]
    std::vector<double> coi_pu;
    std::vector<double> coi_hz;
    std::vector<double> shares;  // Eq. 18 split of the unbalanced power per machine
    double delta_p = 0.0;

    std::size_t steps() const { return time.size(); }
};

/// State derivatives (dδ, dΔω, dP_m) with no disturbance; zero at equilibrium.
struct Derivatives {
    std::vector<double> angle, speed, mech;
};
Derivatives equilibrium_derivatives(const DynamicModel& model);

SimulationTrace simulate(const DynamicModel& model, const Scenario& scenario, const SimulationOptions& options = {});

struct FrequencyFeatures {
    double nadir = 0.0;  // Hz
    double nadir_time = 0.0;
    double steady_state = 0.0;  // Hz, mean over the final window
};

FrequencyFeatures extract_frequency_features(const std::vector<double>& time, const std::vector<double>& coi_hz,
                                             double window = 5.0);
FrequencyFeatures extract_frequency_features(const SimulationTrace& trace, double window = 5.0);

constexpr std::size_t kFeatureCount = 14;

enum class FeatureSite { Generator, Bus };

struct FeatureInfo {
    const char* key;
    FeatureSite site;
};

/// Table-I feature set in storage order.
const std::array<FeatureInfo, kFeatureCount>& feature_catalog();
int feature_index(const std::string& key);

/// One vector per catalog entry; generator vectors have one entry per
/// network generator (tripped machines carry 0 at tf), bus vectors one per bus.
struct SnapshotFeatures {
    std::array<std::vector<double>, kFeatureCount> values;

    std::vector<double>& operator[](std::size_t i) { return values[i]; }
    const std::vector<double>& operator[](std::size_t i) const { return values[i]; }
    const std::vector<double>& get(const std::string& key) const;
};

/// (P_m − P_e)/(2H) − (ΣP_m − ΣP_e)/(2 ΣH) over active machines; inactive get 0.
std::vector<double> generator_response(const std::vector<double>& pm, const std::vector<double>& pe,
                                       const std::vector<double>& h, const std::vector<bool>& active);

SnapshotFeatures snapshot_features(const DynamicModel& model, const SimulationTrace& trace, const Scenario& scenario);

struct ScenarioRecord {
    Scenario scenario;
    SnapshotFeatures snapshot;
    FrequencyFeatures frequency;
};

struct Exclusion {
    Scenario scenario;
    std::string reason;
};

struct ScenarioSetOptions {
    SimulationOptions simulation;
    double min_step_fraction = 0.05;
    double max_step_fraction = 0.20;
    int levels = 20;
    double min_level = 0.5;
    double max_level = 1.0;
    double nadir_floor = 55.0;  // runs at or below are excluded
    int max_attempt_factor = 3;
    int threads = 1;
};

struct ScenarioSet {
    std::string network_name;
    std::uint64_t seed = 0;
    int requested = 0;
    std::vector<ScenarioRecord> records;
    std::vector<Exclusion> exclusions;
};

/// Scenario `attempt` for a given master seed; trips and load steps alternate.
Scenario draw_scenario(const network::PowerNetwork& network, std::uint64_t seed, int attempt,
                       const ScenarioSetOptions& options = {});

ScenarioSet generate_scenario_set(const network::PowerNetwork& network, int count, std::uint64_t seed,
                                  const ScenarioSetOptions& options = {});

std::string to_string(DisturbanceKind kind);
DisturbanceKind disturbance_from_string(const std::string& text);

/// `manifest.json` plus `samples.csv` in `dir`.
void write_scenario_set(const std::filesystem::path& dir, const ScenarioSet& set);
ScenarioSet read_scenario_set(const std::filesystem::path& dir);

}  // namespace nadir::simulator
