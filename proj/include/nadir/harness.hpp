#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <filesystem>
#include <string>
#include <vector>

#include "nadir/embedding.hpp"
#include "nadir/features.hpp"
#include "nadir/nn.hpp"
#include "nadir/simulator.hpp"

namespace nadir::harness {

enum class ModelKind { Cnn, Mlp, Mean };

std::string to_string(ModelKind kind);
ModelKind model_from_string(const std::string& text);

struct PipelineConfig {
    std::filesystem::path network_file;
    std::filesystem::path workspace = "workspace";
    std::uint64_t seed = 1;
    int scenarios = 300;
    int threads = 1;
    simulator::ScenarioSetOptions simulation;
    embedding::TsneConfig tsne;
    int grid_h = 32;
    int top_k = 6;
    features::Target target = features::Target::Nadir;
    int train_count = 220;
    int test_count = 80;
    std::vector<ModelKind> models = {ModelKind::Cnn, ModelKind::Mlp, ModelKind::Mean};
    nn::TrainConfig cnn_training;
    nn::TrainConfig mlp_training;
    bool learning_curve = true;
    std::vector<int> learning_curve_sizes = {50, 100, 200, 220};
};

/// Seeds for every stochastic stage, all derived from the master seed.
struct Seeds {
    std::uint64_t master = 0;
    std::uint64_t scenarios = 0;
    std::uint64_t tsne = 0;
    std::uint64_t split = 0;
    std::uint64_t cnn_init = 0;
    std::uint64_t mlp_init = 0;
    std::uint64_t training = 0;
};

Seeds derive_seeds(std::uint64_t master);

/// Relative paths in the file resolve against the file's directory.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
/// Canonical JSON form with every field spelled out.
std::string config_to_json(const PipelineConfig& config, bool with_paths = true);
/// Hash of the path-free canonical form plus the network file contents, so
/// the same experiment in another workspace reports the same hash.
std::string config_hash(const PipelineConfig& config);
/// Throws InvalidArgument naming the offending field.
void validate(const PipelineConfig& config);

struct Metrics {
    double mae = 0.0;          // Hz
    double mape = 0.0;         // |f − a| / |f|, f the prediction
    double mape_actual = 0.0;  // |f − a| / |a|
    double rmse = 0.0;         // Hz
    std::size_t count = 0;
    std::size_t mape_excluded = 0;
};

/// ZeroPrediction terms are left out of the MAPE mean with a warning.
Metrics evaluate_metrics(const std::vector<double>& predictions, const std::vector<double>& actuals);

struct PredictionRow {
    int scenario_id = 0;
    double actual = 0.0;
    double predicted = 0.0;
};

void write_predictions_csv(const std::filesystem::path& path, const std::vector<PredictionRow>& rows);
std::vector<PredictionRow> read_predictions_csv(const std::filesystem::path& path);

/// Training-mean predictor stored as a one-line JSON file.
struct MeanModel {
    double mean_hz = 0.0;
};

/// Stage layout under the workspace.
struct Workspace {
    std::filesystem::path root;

    std::filesystem::path scenarios() const { return root / "scenarios"; }
    std::filesystem::path embedding() const { return root / "embedding"; }
    std::filesystem::path dataset() const { return root / "dataset"; }
    std::filesystem::path models() const { return root / "models"; }
    std::filesystem::path reports() const { return root / "reports"; }
    std::filesystem::path model_file(ModelKind kind) const;
    std::filesystem::path predictions_file(ModelKind kind) const;
    /// Wall-clock figures live outside `reports/`, which stays reproducible.
    std::filesystem::path timings() const { return root / "timings.csv"; }
};

/// Failure inside a stage, tagged with the stage name and the artifact it was
/// working on.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, std::filesystem::path artifact, const std::string& message)
        : std::runtime_error("[" + stage + "] " + artifact.string() + ": " + message),
          stage_(std::move(stage)),
          artifact_(std::move(artifact)) {}

    const std::string& stage() const noexcept { return stage_; }
    const std::filesystem::path& artifact() const noexcept { return artifact_; }

private:
    std::string stage_;
    std::filesystem::path artifact_;
};

/// Each stage reads its inputs from the workspace written by earlier stages
/// and fails with the stage name and artifact path in the message.
void stage_simulate(const PipelineConfig& config);
void stage_embed(const PipelineConfig& config);
void stage_tensorize(const PipelineConfig& config);
void stage_train(const PipelineConfig& config, ModelKind kind);
void stage_predict(const PipelineConfig& config, ModelKind kind);
/// Writes `report.csv`, per-model plots and returns the metrics per model.
std::vector<std::pair<ModelKind, Metrics>> stage_evaluate(const PipelineConfig& config);

struct LearningCurveRow {
    ModelKind model = ModelKind::Cnn;
    int train_size = 0;
    Metrics metrics;
};

std::vector<LearningCurveRow> run_learning_curve(const PipelineConfig& config);

struct PipelineResult {
    std::vector<std::pair<ModelKind, Metrics>> metrics;
    std::vector<LearningCurveRow> learning_curve;
    std::filesystem::path report;
};

PipelineResult end_to_end(const PipelineConfig& config);

/// Scatter of predicted against actual values, both in Hz.
std::string scatter_svg(const std::vector<PredictionRow>& rows, const std::string& title);
std::string learning_curve_svg(const std::vector<LearningCurveRow>& rows);

}  // namespace nadir::harness
