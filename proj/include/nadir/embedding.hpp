#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nadir::embedding {

using RealMatrix = Eigen::MatrixXd;

/// Gaussian input affinities. `conditional(i, j)` is p_{j|i}; each row sums
/// to one. `joint` is the symmetrized distribution over all pairs.
struct Affinities {
    RealMatrix conditional;
    RealMatrix joint;
    std::vector<double> sigma;       // kernel bandwidth per point
    std::vector<double> perplexity;  // achieved exp(entropy) per point
    std::vector<int> degenerate_rows;
};

/// Rows of `points` are the high-dimensional samples.
Affinities input_affinities(const RealMatrix& points, double perplexity, int max_search_iterations = 50);

/// Σ p ln(p / q) over entries with p > 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Student-t output affinities normalized over all ordered pairs i ≠ j.
RealMatrix output_affinities(const RealMatrix& y);

struct KlResult {
    double cost = 0.0;
    RealMatrix gradient;  // n×2
};

KlResult kl_objective(const RealMatrix& joint, const RealMatrix& y);

struct TsneConfig {
    double perplexity = 10.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    int momentum_switch_iteration = 250;
    double exaggeration = 4.0;
    int exaggeration_iterations = 100;
    bool adaptive_gains = true;
    double init_stddev = 1e-4;
    int max_search_iterations = 50;
    std::uint64_t seed = 0;
};

struct KlSample {
    int iteration = 0;
    double cost = 0.0;
};

struct Embedding {
    RealMatrix y;  // n×2
    double kl = 0.0;
    double initial_kl = 0.0;
    int iterations = 0;
    std::uint64_t seed = 0;
    std::vector<KlSample> trace;
};

Embedding run_tsne(const RealMatrix& points, const TsneConfig& config);

struct Relocation {
    int node = 0;
    int from_row = 0, from_col = 0;
    int to_row = 0, to_col = 0;
};

/// 1-based cells in [1, h]²; first coordinate is the row.
struct GridCell {
    int row = 1;
    int col = 1;
    friend bool operator==(const GridCell&, const GridCell&) = default;
};

struct GridCoordinates {
    int h = 0;
    std::vector<GridCell> cells;
    std::vector<Relocation> relocations;
    std::vector<std::string> warnings;
};

/// Linear rescale to [1, h] per axis, round half-up, then move colliding
/// nodes (higher id loses) to the nearest free cell.
GridCoordinates grid_map(const RealMatrix& y, int h);

/// Embedding export; `labels` are the node identifiers written to `node_id`.
void write_embedding_csv(const std::filesystem::path& path, const std::vector<int>& labels, const RealMatrix& y,
                         const GridCoordinates& grid);

struct EmbeddingRecord {
    std::vector<int> labels;
    RealMatrix y;
    GridCoordinates grid;
};

EmbeddingRecord read_embedding_csv(const std::filesystem::path& path, int h);

/// Scatter of the grid layout with node labels.
std::string embedding_svg(const std::vector<int>& labels, const GridCoordinates& grid);

}  // namespace nadir::embedding
