#include <set>

#include <json.hpp>

#include "nadir/error.hpp"
#include "nadir/harness.hpp"
#include "nadir/rng.hpp"
#include "nadir/text_io.hpp"

namespace nadir::harness {

namespace {

using nlohmann::ordered_json;

[[noreturn]] void bad(const std::string& field, const std::string& why) {
    throw Error(ErrorCode::InvalidArgument, "config field '" + field + "': " + why);
}

void check_keys(const ordered_json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) bad(where, "expected an object");
    std::set<std::string> known(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) bad(where.empty() ? key : where + "." + key, "unknown key");
}

template <typename T>
void read(const ordered_json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        bad(where.empty() ? key : where + "." + key, e.what());
    }
}

ordered_json training_json(const nn::TrainConfig& t) {
    return {{"learning_rate", t.learning_rate},
            {"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"stop_below_mse", t.stop_below_mse}};
}

void read_training(const ordered_json& j, nn::TrainConfig& t, const std::string& where) {
    check_keys(j, where, {"learning_rate", "epochs", "batch_size", "stop_below_mse"});
    read(j, "learning_rate", t.learning_rate, where);
    read(j, "epochs", t.epochs, where);
    read(j, "batch_size", t.batch_size, where);
    read(j, "stop_below_mse", t.stop_below_mse, where);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) path = base / path;
    return path.lexically_normal();
}

}  // namespace

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::Cnn: return "cnn";
        case ModelKind::Mlp: return "mlp";
        case ModelKind::Mean: return "mean";
    }
    return "unknown";
}

ModelKind model_from_string(const std::string& text) {
    if (text == "cnn") return ModelKind::Cnn;
    if (text == "mlp") return ModelKind::Mlp;
    if (text == "mean" || text == "mean_baseline") return ModelKind::Mean;
    throw Error(ErrorCode::InvalidArgument, "unknown model '" + text + "' (expected cnn, mlp or mean)");
}

Seeds derive_seeds(std::uint64_t master) {
    Seeds s;
    s.master = master;
    s.scenarios = derive_seed(master, 1);
    s.tsne = derive_seed(master, 2);
    s.split = derive_seed(master, 3);
    s.cnn_init = derive_seed(master, 4);
    s.mlp_init = derive_seed(master, 5);
    s.training = derive_seed(master, 6);
    return s;
}

PipelineConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(j, "", {"network_file", "workspace", "seed", "scenarios", "threads", "simulation", "tsne", "grid_h",
                       "top_k", "target", "split", "models", "training", "learning_curve"});

    PipelineConfig c;
    std::string path;
    if (j.contains("network_file")) {
        read(j, "network_file", path, "");
        c.network_file = resolve(base_dir, path);
    }
    if (j.contains("workspace")) {
        read(j, "workspace", path, "");
        c.workspace = resolve(base_dir, path);
    }
    read(j, "seed", c.seed, "");
    read(j, "scenarios", c.scenarios, "");
    read(j, "threads", c.threads, "");
    read(j, "grid_h", c.grid_h, "");
    read(j, "top_k", c.top_k, "");
    if (j.contains("target")) {
        std::string t;
        read(j, "target", t, "");
        c.target = features::target_from_string(t);
    }

    if (j.contains("simulation")) {
        const auto& s = j["simulation"];
        check_keys(s, "simulation", {"dt", "horizon", "divergence_limit", "min_step_fraction", "max_step_fraction",
                                     "levels", "min_level", "max_level", "nadir_floor", "max_attempt_factor"});
        auto& o = c.simulation;
        read(s, "dt", o.simulation.dt, "simulation");
        read(s, "horizon", o.simulation.horizon, "simulation");
        read(s, "divergence_limit", o.simulation.divergence_limit, "simulation");
        read(s, "min_step_fraction", o.min_step_fraction, "simulation");
        read(s, "max_step_fraction", o.max_step_fraction, "simulation");
        read(s, "levels", o.levels, "simulation");
        read(s, "min_level", o.min_level, "simulation");
        read(s, "max_level", o.max_level, "simulation");
        read(s, "nadir_floor", o.nadir_floor, "simulation");
        read(s, "max_attempt_factor", o.max_attempt_factor, "simulation");
    }

    if (j.contains("tsne")) {
        const auto& t = j["tsne"];
        check_keys(t, "tsne", {"perplexity", "iterations", "learning_rate", "initial_momentum", "final_momentum",
                               "momentum_switch_iteration", "exaggeration", "exaggeration_iterations",
                               "adaptive_gains", "init_stddev"});
        auto& o = c.tsne;
        read(t, "perplexity", o.perplexity, "tsne");
        read(t, "iterations", o.iterations, "tsne");
        read(t, "learning_rate", o.learning_rate, "tsne");
        read(t, "initial_momentum", o.initial_momentum, "tsne");
        read(t, "final_momentum", o.final_momentum, "tsne");
        read(t, "momentum_switch_iteration", o.momentum_switch_iteration, "tsne");
        read(t, "exaggeration", o.exaggeration, "tsne");
        read(t, "exaggeration_iterations", o.exaggeration_iterations, "tsne");
        read(t, "adaptive_gains", o.adaptive_gains, "tsne");
        read(t, "init_stddev", o.init_stddev, "tsne");
    }

    if (j.contains("split")) {
        check_keys(j["split"], "split", {"train", "test"});
        read(j["split"], "train", c.train_count, "split");
        read(j["split"], "test", c.test_count, "split");
    }

    if (j.contains("models")) {
        std::vector<std::string> names;
        read(j, "models", names, "");
        c.models.clear();
        for (const auto& n : names) c.models.push_back(model_from_string(n));
    }

    if (j.contains("training")) {
        check_keys(j["training"], "training", {"cnn", "mlp"});
        if (j["training"].contains("cnn")) read_training(j["training"]["cnn"], c.cnn_training, "training.cnn");
        if (j["training"].contains("mlp")) read_training(j["training"]["mlp"], c.mlp_training, "training.mlp");
    }

    if (j.contains("learning_curve")) {
        check_keys(j["learning_curve"], "learning_curve", {"enabled", "sizes"});
        read(j["learning_curve"], "enabled", c.learning_curve, "learning_curve");
        read(j["learning_curve"], "sizes", c.learning_curve_sizes, "learning_curve");
    }
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::InvalidArgument, "config file not found: " + path.string());
    return parse_config(text::read_file(path), path.parent_path());
}

std::string config_to_json(const PipelineConfig& c, bool with_paths) {
    ordered_json j;
    if (with_paths) {
        j["network_file"] = c.network_file.generic_string();
        j["workspace"] = c.workspace.generic_string();
    }
    j["seed"] = c.seed;
    j["scenarios"] = c.scenarios;
    j["threads"] = c.threads;
    const auto& s = c.simulation;
    j["simulation"] = {{"dt", s.simulation.dt},
                       {"horizon", s.simulation.horizon},
                       {"divergence_limit", s.simulation.divergence_limit},
                       {"min_step_fraction", s.min_step_fraction},
                       {"max_step_fraction", s.max_step_fraction},
                       {"levels", s.levels},
                       {"min_level", s.min_level},
                       {"max_level", s.max_level},
                       {"nadir_floor", s.nadir_floor},
                       {"max_attempt_factor", s.max_attempt_factor}};
    const auto& t = c.tsne;
    j["tsne"] = {{"perplexity", t.perplexity},
                 {"iterations", t.iterations},
                 {"learning_rate", t.learning_rate},
                 {"initial_momentum", t.initial_momentum},
                 {"final_momentum", t.final_momentum},
                 {"momentum_switch_iteration", t.momentum_switch_iteration},
                 {"exaggeration", t.exaggeration},
                 {"exaggeration_iterations", t.exaggeration_iterations},
                 {"adaptive_gains", t.adaptive_gains},
                 {"init_stddev", t.init_stddev}};
    j["grid_h"] = c.grid_h;
    j["top_k"] = c.top_k;
    j["target"] = features::to_string(c.target);
    j["split"] = {{"train", c.train_count}, {"test", c.test_count}};
    j["models"] = ordered_json::array();
    for (auto m : c.models) j["models"].push_back(to_string(m));
    j["training"] = {{"cnn", training_json(c.cnn_training)}, {"mlp", training_json(c.mlp_training)}};
    j["learning_curve"] = {{"enabled", c.learning_curve}, {"sizes", c.learning_curve_sizes}};
    return j.dump(2) + "\n";
}

std::string config_hash(const PipelineConfig& c) {
    std::string bytes = config_to_json(c, false);
    if (std::filesystem::exists(c.network_file)) bytes += text::read_file(c.network_file);
    return text::hex64(text::fnv1a(bytes));
}

void validate(const PipelineConfig& c) {
    if (c.network_file.empty()) bad("network_file", "required");
    if (!std::filesystem::exists(c.network_file)) bad("network_file", "not found: " + c.network_file.string());
    if (c.workspace.empty()) bad("workspace", "required");
    if (c.scenarios < 3) bad("scenarios", "need at least 3");
    if (c.threads < 1) bad("threads", "must be at least 1");
    if (c.grid_h < 2) bad("grid_h", "must be at least 2");
    if (c.top_k < 1 || c.top_k > static_cast<int>(simulator::kFeatureCount)) bad("top_k", "must lie in [1, 14]");
    if (c.train_count < 3) bad("split.train", "need at least 3 training samples");
    if (c.test_count < 1) bad("split.test", "need at least 1 test sample");
    if (c.train_count + c.test_count > c.scenarios) bad("split", "train + test exceeds the scenario count");
    if (c.models.empty()) bad("models", "at least one model is required");
    for (const auto* t : {&c.cnn_training, &c.mlp_training}) {
        if (t->epochs < 1) bad("training.epochs", "must be at least 1");
        if (t->batch_size < 1) bad("training.batch_size", "must be at least 1");
        if (!(t->learning_rate >= 0.0)) bad("training.learning_rate", "must be nonnegative");
    }
    for (int n : c.learning_curve_sizes)
        if (n < 1 || n > c.train_count) bad("learning_curve.sizes", "sizes must lie in [1, split.train]");
}

}  // namespace nadir::harness
