#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nadir/embedding.hpp"
#include "nadir/simulator.hpp"
#include "nadir/tensor.hpp"

namespace nadir::features {

using simulator::kFeatureCount;

enum class Target { Nadir, SteadyState };

std::string to_string(Target target);
Target target_from_string(const std::string& text);

struct Sample {
    int scenario_id = 0;
    std::array<std::vector<double>, kFeatureCount> values;  // catalog order
    double nadir = 0.0;         // Hz
    double steady_state = 0.0;  // Hz

    double target(Target t) const { return t == Target::Nadir ? nadir : steady_state; }
};

std::vector<Sample> samples_from(const simulator::ScenarioSet& set);

/// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of average ranks; 0 (with `constant` set) when either
/// series has no spread.
double spearman(std::span<const double> x, std::span<const double> y, bool* constant = nullptr);

struct FeatureRanking {
    Target target = Target::Nadir;
    std::array<double, kFeatureCount> rho{};
    std::vector<int> selected;  // catalog indices, descending |rho|

    int channels() const { return static_cast<int>(selected.size()); }
};

/// Ranks every catalog feature by the Spearman coefficient of its per-sample
/// mean against the target and keeps the top k.
FeatureRanking spearman_rank(std::span<const Sample> samples, Target target, int k = 6);

/// One range per feature type, pooled over every vector entry.
struct NormalizationStats {
    std::array<double, kFeatureCount> min{};
    std::array<double, kFeatureCount> max{};
    double target_min = 0.0;
    double target_max = 0.0;

    double scale(std::size_t feature, double value) const;
    double scale_target(double hz) const;
    double unscale_target(double normalized) const;
};

NormalizationStats fit_normalization(std::span<const Sample> train, Target target);
/// Held-out values outside the training range are kept as they are (no clamping).
Sample apply_normalization(const NormalizationStats& stats, const Sample& sample);

struct TensorSample {
    int scenario_id = 0;
    Tensor3 tensor;          // k × h × h
    double target_hz = 0.0;  // raw target
    double target = 0.0;     // min-max scaled
};

/// `sample` must already be normalized. Grid cell i belongs to bus index i.
TensorSample tensorize(const Sample& sample, const network::PowerNetwork& network,
                       const embedding::GridCoordinates& grid, const FeatureRanking& ranking,
                       const NormalizationStats& stats);

struct Split {
    std::vector<int> train;  // positions into the sample list
    std::vector<int> test;
    std::uint64_t seed = 0;
};

Split split_indices(int total, int train_count, std::uint64_t seed);

struct Dataset {
    int h = 0;
    std::vector<int> labels;  // bus label per grid cell entry
    embedding::GridCoordinates grid;
    FeatureRanking ranking;
    NormalizationStats stats;
    Split split;
    std::uint64_t scenario_seed = 0;
    std::vector<TensorSample> samples;

    int channels() const { return ranking.channels(); }
    std::vector<const TensorSample*> subset(const std::vector<int>& positions) const;
};

/// Persists `manifest.json`, `index.csv` and one `samples/NNNNNN.bin` per sample.
void persist_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& dir);

/// Seeded split of already-tensorized samples followed by persistence.
Split split_and_persist(Dataset& dataset, int train_count, std::uint64_t seed, const std::filesystem::path& dir);

/// Reads one binary tensor record.
TensorSample read_tensor_record(const std::filesystem::path& path);
void write_tensor_record(const std::filesystem::path& path, const TensorSample& sample);

}  // namespace nadir::features
