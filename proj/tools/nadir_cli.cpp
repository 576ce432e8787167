#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "nadir/harness.hpp"
#include "nadir/log.hpp"
#include "nadir/text_io.hpp"

using namespace nadir;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string workspace;
    std::string model;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config, "Pipeline configuration (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", flags.seed, "Override the master seed");
    cmd->add_option("--workspace", flags.workspace, "Override the workspace directory");
    cmd->add_option("--model", flags.model, "Restrict to one model")->check(CLI::IsMember({"cnn", "mlp", "mean"}));
}

harness::PipelineConfig resolve(const CommonFlags& flags) {
    auto config = harness::load_config(flags.config);
    if (flags.seed) config.seed = *flags.seed;
    if (!flags.workspace.empty()) config.workspace = flags.workspace;
    if (!flags.model.empty()) config.models = {harness::model_from_string(flags.model)};
    return config;
}

void print_metrics(const std::vector<std::pair<harness::ModelKind, harness::Metrics>>& metrics) {
    std::printf("%-6s %12s %12s %12s\n", "model", "MAE (Hz)", "MAPE", "RMSE (Hz)");
    for (const auto& [kind, m] : metrics)
        std::printf("%-6s %12.6f %12.4e %12.6f\n", harness::to_string(kind).c_str(), m.mae, m.mape, m.rmse);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Frequency nadir prediction pipeline"};
    app.require_subcommand(1);
    bool verbose = false, quiet = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");
    app.add_flag("-q,--quiet", quiet, "Warnings only");

    CommonFlags flags;
    auto* simulate = app.add_subcommand("simulate", "Generate the scenario set");
    auto* embed = app.add_subcommand("embed", "Embed the network nodes onto the grid");
    auto* tensorize = app.add_subcommand("tensorize", "Rank features, split and build tensors");
    auto* train = app.add_subcommand("train", "Train the configured models");
    auto* predict = app.add_subcommand("predict", "Predict the test split");
    auto* evaluate = app.add_subcommand("evaluate", "Write the accuracy report");
    auto* curve = app.add_subcommand("learning-curve", "Retrain on nested training subsets");
    auto* pipeline = app.add_subcommand("pipeline", "Run every stage in order");
    for (auto* cmd : {simulate, embed, tensorize, train, predict, evaluate, curve, pipeline}) add_common(cmd, flags);

    CLI11_PARSE(app, argc, argv);
    if (verbose) log::set_level(log::Level::Debug);
    if (quiet) log::set_level(log::Level::Warning);

    try {
        const auto config = resolve(flags);
        if (simulate->parsed()) harness::stage_simulate(config);
        if (embed->parsed()) harness::stage_embed(config);
        if (tensorize->parsed()) harness::stage_tensorize(config);
        if (train->parsed())
            for (auto kind : config.models) harness::stage_train(config, kind);
        if (predict->parsed())
            for (auto kind : config.models) harness::stage_predict(config, kind);
        if (evaluate->parsed()) print_metrics(harness::stage_evaluate(config));
        if (curve->parsed()) {
            for (const auto& row : harness::run_learning_curve(config))
                std::printf("%-6s n=%-5d MAE %.6f Hz\n", harness::to_string(row.model).c_str(), row.train_size,
                            row.metrics.mae);
        }
        if (pipeline->parsed()) {
            const auto result = harness::end_to_end(config);
            print_metrics(result.metrics);
            std::printf("report: %s\n", result.report.string().c_str());
        }
    } catch (const harness::StageError& e) {
        std::cerr << "error " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error [config] " << e.what() << '\n';
        return 1;
    }
    return 0;
}
