#include <chrono>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "nadir/error.hpp"
#include "nadir/harness.hpp"
#include "nadir/log.hpp"
#include "nadir/text_io.hpp"

namespace nadir::harness {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

fs::path Workspace::model_file(ModelKind kind) const {
    return models() / (to_string(kind) + (kind == ModelKind::Mean ? ".json" : ".bin"));
}

fs::path Workspace::predictions_file(ModelKind kind) const {
    return reports() / ("predictions_" + to_string(kind) + ".csv");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename F>
auto tagged(const std::string& stage, const fs::path& artifact, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, artifact, e.what());
    }
}

/// Keyed rows; rewriting one entry keeps the others from earlier stages.
void record_timing(const Workspace& ws, const std::string& entry, double value, const std::string& unit) {
    std::map<std::string, std::string> rows;
    if (fs::exists(ws.timings())) {
        std::istringstream in(text::read_file(ws.timings()));
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line))
            if (!line.empty()) rows[line.substr(0, line.find(','))] = line;
    }
    rows[entry] = entry + ',' + text::format_double(value) + ',' + unit;
    std::string out = "entry,value,unit\n";
    for (const auto& [_, row] : rows) out += row + '\n';
    text::write_file(ws.timings(), out);
}

std::string seeds_field(const Seeds& s) {
    std::ostringstream o;
    o << "master=" << s.master << ";scenarios=" << s.scenarios << ";tsne=" << s.tsne << ";split=" << s.split
      << ";cnn_init=" << s.cnn_init << ";mlp_init=" << s.mlp_init << ";training=" << s.training;
    return o.str();
}

nn::Network build_model(const PipelineConfig& c, const features::Dataset& ds, ModelKind kind) {
    const Seeds seeds = derive_seeds(c.seed);
    nn::Network net = kind == ModelKind::Cnn ? nn::build_paper_cnn(ds.h, ds.channels(), seeds.cnn_init)
                                             : nn::build_mlp(ds.h, ds.channels(), seeds.mlp_init);
    net.scaling = {ds.stats.target_min, ds.stats.target_max};
    return net;
}

nn::TrainConfig training_for(const PipelineConfig& c, ModelKind kind) {
    nn::TrainConfig t = kind == ModelKind::Cnn ? c.cnn_training : c.mlp_training;
    t.seed = derive_seeds(c.seed).training;
    return t;
}

std::vector<nn::TrainingExample> examples(const features::Dataset& ds, const std::vector<int>& positions) {
    std::vector<nn::TrainingExample> out;
    out.reserve(positions.size());
    for (const auto* s : ds.subset(positions)) out.push_back({&s->tensor, s->target});
    return out;
}

double mean_target(const features::Dataset& ds, const std::vector<int>& positions) {
    double sum = 0.0;
    for (const auto* s : ds.subset(positions)) sum += s->target_hz;
    return sum / static_cast<double>(positions.size());
}

/// A trained model of any kind, able to predict in Hz.
struct Fitted {
    ModelKind kind = ModelKind::Mean;
    nn::Network net;
    double mean_hz = 0.0;
    nn::TrainResult result;

    double predict(const Tensor3& x) { return kind == ModelKind::Mean ? mean_hz : net.predict(x); }
};

Fitted fit(const PipelineConfig& c, const features::Dataset& ds, ModelKind kind, const std::vector<int>& positions) {
    Fitted f;
    f.kind = kind;
    if (kind == ModelKind::Mean) {
        f.mean_hz = mean_target(ds, positions);
        return f;
    }
    f.net = build_model(c, ds, kind);
    const auto data = examples(ds, positions);
    f.result = nn::train(f.net, data, training_for(c, kind));
    return f;
}

std::vector<PredictionRow> predict_test(Fitted& model, const features::Dataset& ds) {
    std::vector<PredictionRow> rows;
    for (const auto* s : ds.subset(ds.split.test)) rows.push_back({s->scenario_id, s->target_hz, model.predict(s->tensor)});
    return rows;
}

Metrics metrics_of(const std::vector<PredictionRow>& rows) {
    std::vector<double> pred, actual;
    for (const auto& r : rows) {
        pred.push_back(r.predicted);
        actual.push_back(r.actual);
    }
    return evaluate_metrics(pred, actual);
}

features::Dataset load_checked_dataset(const Workspace& ws) {
    if (!fs::exists(ws.dataset() / "manifest.json"))
        throw Error(ErrorCode::Storage, "dataset not found; run the tensorize stage first");
    return features::load_dataset(ws.dataset());
}

Fitted load_model(const Workspace& ws, ModelKind kind) {
    const auto path = ws.model_file(kind);
    if (!fs::exists(path)) throw Error(ErrorCode::Storage, "model not found; run the train stage first");
    Fitted f;
    f.kind = kind;
    if (kind == ModelKind::Mean) {
        try {
            f.mean_hz = ordered_json::parse(text::read_file(path)).at("mean_hz").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Storage, e.what());
        }
    } else {
        f.net = nn::load_checkpoint(path);
    }
    return f;
}

}  // namespace

void stage_simulate(const PipelineConfig& c) {
    const Workspace ws{c.workspace};
    tagged("simulate", ws.scenarios(), [&] {
        validate(c);
        const auto start = Clock::now();
        const auto net = network::load_network(c.network_file);
        auto options = c.simulation;
        options.threads = c.threads;
        const auto set = simulator::generate_scenario_set(net, c.scenarios, derive_seeds(c.seed).scenarios, options);
        if (static_cast<int>(set.records.size()) < c.scenarios)
            throw Error(ErrorCode::InvalidArgument, "only " + std::to_string(set.records.size()) + " of " +
                                                        std::to_string(c.scenarios) + " scenarios survived screening");
        fs::remove_all(ws.scenarios());
        simulator::write_scenario_set(ws.scenarios(), set);
        log::info("simulate: " + std::to_string(set.records.size()) + " scenarios kept, " +
                  std::to_string(set.exclusions.size()) + " excluded");
        record_timing(ws, "simulate", seconds_since(start), "s");
    });
}

void stage_embed(const PipelineConfig& c) {
    const Workspace ws{c.workspace};
    tagged("embed", ws.embedding(), [&] {
        validate(c);
        const auto start = Clock::now();
        const auto net = network::load_network(c.network_file);
        const auto matrices = network::build_matrices(net, network::solve_power_flow(net, 1.0));
        const auto distance = network::electrical_distance(matrices.z);
        auto tsne = c.tsne;
        tsne.seed = derive_seeds(c.seed).tsne;
        const auto embedding = embedding::run_tsne(distance, tsne);
        const auto grid = embedding::grid_map(embedding.y, c.grid_h);
        for (const auto& w : grid.warnings) log::warn(w);

        std::vector<int> labels;
        for (const auto& bus : net.buses) labels.push_back(bus.label);
        fs::remove_all(ws.embedding());
        embedding::write_embedding_csv(ws.embedding() / "embedding.csv", labels, embedding.y, grid);
        text::write_file(ws.embedding() / "embedding.svg", embedding::embedding_svg(labels, grid));
        std::string trace = "iteration,kl\n";
        for (const auto& s : embedding.trace) trace += std::to_string(s.iteration) + ',' + text::format_double(s.cost) + '\n';
        text::write_file(ws.embedding() / "kl_trace.csv", trace);
        std::string moves = "node,from_row,from_col,to_row,to_col\n";
        for (const auto& r : grid.relocations)
            moves += std::to_string(labels[static_cast<std::size_t>(r.node)]) + ',' + std::to_string(r.from_row) + ',' +
                     std::to_string(r.from_col) + ',' + std::to_string(r.to_row) + ',' + std::to_string(r.to_col) + '\n';
        text::write_file(ws.embedding() / "relocations.csv", moves);
        log::info("embed: KL " + text::format_double(embedding.initial_kl) + " -> " + text::format_double(embedding.kl) +
                  ", " + std::to_string(grid.relocations.size()) + " relocation(s)");
        record_timing(ws, "embed", seconds_since(start), "s");
    });
}

void stage_tensorize(const PipelineConfig& c) {
    const Workspace ws{c.workspace};
    tagged("tensorize", ws.dataset(), [&] {
        validate(c);
        const auto start = Clock::now();
        const auto net = network::load_network(c.network_file);
        if (!fs::exists(ws.scenarios() / "manifest.json"))
            throw Error(ErrorCode::Storage, "scenario set not found; run the simulate stage first");
        if (!fs::exists(ws.embedding() / "embedding.csv"))
            throw Error(ErrorCode::Storage, "embedding not found; run the embed stage first");
        const auto set = simulator::read_scenario_set(ws.scenarios());
        const auto samples = features::samples_from(set);
        const auto placed = embedding::read_embedding_csv(ws.embedding() / "embedding.csv", c.grid_h);
        if (placed.grid.cells.size() != net.bus_count())
            throw Error(ErrorCode::MissingNodeCoordinate, "embedding does not place every bus");

        const int total = static_cast<int>(samples.size());
        if (total < c.train_count + c.test_count)
            throw Error(ErrorCode::InvalidArgument, "scenario set holds " + std::to_string(total) +
                                                        " samples, fewer than train + test");
        features::Dataset ds;
        ds.split = features::split_indices(total, c.train_count, derive_seeds(c.seed).split);
        ds.split.test.resize(static_cast<std::size_t>(c.test_count));

        // Ranking and scaling only ever see the training split.
        std::vector<features::Sample> train;
        for (int p : ds.split.train) train.push_back(samples[static_cast<std::size_t>(p)]);
        ds.h = c.grid_h;
        ds.labels = placed.labels;
        ds.grid = placed.grid;
        ds.ranking = features::spearman_rank(train, c.target, c.top_k);
        ds.stats = features::fit_normalization(train, c.target);
        ds.scenario_seed = set.seed;
        for (const auto& s : samples)
            ds.samples.push_back(
                features::tensorize(features::apply_normalization(ds.stats, s), net, ds.grid, ds.ranking, ds.stats));

        fs::remove_all(ws.dataset());
        features::persist_dataset(ws.dataset(), ds);
        std::string keys;
        for (int f : ds.ranking.selected) keys += std::string(keys.empty() ? "" : ", ") + simulator::feature_catalog()[static_cast<std::size_t>(f)].key;
        log::info("tensorize: " + std::to_string(total) + " tensors, channels " + keys);
        record_timing(ws, "tensorize", seconds_since(start), "s");
    });
}

void stage_train(const PipelineConfig& c, ModelKind kind) {
    const Workspace ws{c.workspace};
    tagged("train", ws.model_file(kind), [&] {
        validate(c);
        const auto ds = load_checked_dataset(ws);
        const auto start = Clock::now();
        auto model = fit(c, ds, kind, ds.split.train);
        fs::create_directories(ws.models());
        if (kind == ModelKind::Mean) {
            ordered_json j{{"model", "mean"}, {"mean_hz", model.mean_hz}, {"train_count", ds.split.train.size()}};
            text::write_file(ws.model_file(kind), j.dump(2) + "\n");
        } else {
            nn::save_checkpoint(ws.model_file(kind), model.net);
            nn::write_loss_csv(ws.models() / (to_string(kind) + "_loss.csv"), model.result);
            const auto& last = model.result.trace.back();
            log::info("train " + to_string(kind) + ": " + std::to_string(last.epoch) + " epochs, final training mse " +
                      text::format_double(last.mse) + " in " + text::format_double(model.result.seconds) + " s");
        }
        record_timing(ws, "train_" + to_string(kind), seconds_since(start), "s");
    });
}

void stage_predict(const PipelineConfig& c, ModelKind kind) {
    const Workspace ws{c.workspace};
    tagged("predict", ws.predictions_file(kind), [&] {
        validate(c);
        const auto ds = load_checked_dataset(ws);
        auto model = load_model(ws, kind);
        std::vector<PredictionRow> rows;
        double elapsed = 0.0;
        for (const auto* s : ds.subset(ds.split.test)) {
            const auto start = Clock::now();
            const double hz = model.predict(s->tensor);
            elapsed += seconds_since(start);
            rows.push_back({s->scenario_id, s->target_hz, hz});
        }
        write_predictions_csv(ws.predictions_file(kind), rows);
        text::write_file(ws.reports() / ("scatter_" + to_string(kind) + ".svg"),
                         scatter_svg(rows, to_string(kind) + ": predicted against actual"));
        record_timing(ws, "predict_" + to_string(kind) + "_latency", 1e3 * elapsed / static_cast<double>(rows.size()),
                      "ms per sample");
    });
}

std::vector<std::pair<ModelKind, Metrics>> stage_evaluate(const PipelineConfig& c) {
    const Workspace ws{c.workspace};
    const auto report = ws.reports() / "report.csv";
    return tagged("evaluate", report, [&] {
        validate(c);
        const std::string hash = config_hash(c);
        const std::string seeds = seeds_field(derive_seeds(c.seed));
        std::vector<std::pair<ModelKind, Metrics>> out;
        std::ostringstream csv;
        csv << "model,test_count,mae_hz,mape,mape_actual,rmse_hz,config_hash,seeds,note\n";
        for (auto kind : c.models) {
            const auto rows = read_predictions_csv(ws.predictions_file(kind));
            if (static_cast<int>(rows.size()) != c.test_count)
                throw Error(ErrorCode::Storage, ws.predictions_file(kind).string() + " does not cover the test split");
            const auto m = metrics_of(rows);
            out.emplace_back(kind, m);
            csv << to_string(kind) << ',' << m.count << ',' << text::format_double(m.mae) << ','
                << text::format_double(m.mape) << ',' << text::format_double(m.mape_actual) << ','
                << text::format_double(m.rmse) << ',' << hash << ',' << seeds << ",\n";
            log::info("evaluate " + to_string(kind) + ": MAE " + text::format_double(m.mae) + " Hz, RMSE " +
                      text::format_double(m.rmse) + " Hz");
        }
        // Published CNN figures on a commercial-simulator dataset; context only.
        csv << "reference,,0.0018,3.0698e-05,,0.0024," << hash << ',' << seeds
            << ",external reference on a different dataset; not comparable\n";
        text::write_file(report, csv.str());
        return out;
    });
}

std::vector<LearningCurveRow> run_learning_curve(const PipelineConfig& c) {
    const Workspace ws{c.workspace};
    const auto csv_path = ws.reports() / "learning_curve.csv";
    return tagged("learning-curve", csv_path, [&] {
        validate(c);
        const auto ds = load_checked_dataset(ws);
        const auto start = Clock::now();
        std::vector<LearningCurveRow> rows;
        for (int size : c.learning_curve_sizes) {
            // Prefixes of one shuffled training split, so smaller sets nest in larger ones.
            const std::vector<int> positions(ds.split.train.begin(), ds.split.train.begin() + size);
            for (auto kind : c.models) {
                auto model = fit(c, ds, kind, positions);
                rows.push_back({kind, size, metrics_of(predict_test(model, ds))});
                log::info("learning-curve " + to_string(kind) + " n=" + std::to_string(size) + ": MAE " +
                          text::format_double(rows.back().metrics.mae) + " Hz");
            }
        }
        const std::string hash = config_hash(c);
        const std::string seeds = seeds_field(derive_seeds(c.seed));
        std::ostringstream csv;
        csv << "model,train_size,test_count,mae_hz,mape,rmse_hz,config_hash,seeds\n";
        for (const auto& r : rows)
            csv << to_string(r.model) << ',' << r.train_size << ',' << r.metrics.count << ','
                << text::format_double(r.metrics.mae) << ',' << text::format_double(r.metrics.mape) << ','
                << text::format_double(r.metrics.rmse) << ',' << hash << ',' << seeds << '\n';
        text::write_file(csv_path, csv.str());
        text::write_file(ws.reports() / "learning_curve.svg", learning_curve_svg(rows));
        record_timing(ws, "learning_curve", seconds_since(start), "s");
        return rows;
    });
}

PipelineResult end_to_end(const PipelineConfig& c) {
    tagged("pipeline", c.workspace, [&] { validate(c); });
    const Workspace ws{c.workspace};
    const auto start = Clock::now();
    text::write_file(ws.root / "config.json", config_to_json(c, false));
    stage_simulate(c);
    stage_embed(c);
    stage_tensorize(c);
    for (auto kind : c.models) stage_train(c, kind);
    for (auto kind : c.models) stage_predict(c, kind);
    PipelineResult result;
    result.metrics = stage_evaluate(c);
    result.report = ws.reports() / "report.csv";
    if (c.learning_curve) result.learning_curve = run_learning_curve(c);
    record_timing(ws, "pipeline", seconds_since(start), "s");
    return result;
}

}  // namespace nadir::harness
