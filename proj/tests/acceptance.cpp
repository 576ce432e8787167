// Acceptance run: one PASS/FAIL line per criterion. Criteria 5 to 8 share two
// full runs of the demo pipeline, so expect several minutes of wall time.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "nadir/embedding.hpp"
#include "nadir/error.hpp"
#include "nadir/harness.hpp"
#include "nadir/log.hpp"
#include "nadir/nn.hpp"
#include "nadir/simulator.hpp"
#include "nadir/text_io.hpp"

using namespace nadir;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

struct Verdict {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

void report(int id, const char* name, double limit_s, const std::function<Verdict()>& body) {
    const auto start = Clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(Clock::now() - start).count();
    if (limit_s > 0 && s >= limit_s) {
        v.pass = false;
        v.detail += "; over the time budget";
    }
    if (!v.pass) ++failures;
    std::printf("%s %d %s: %s [%.1f s%s]\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str(), s,
                limit_s > 0 ? (", budget " + fmt("%.0f", limit_s) + " s").c_str() : "");
    std::fflush(stdout);
}

// ---------------------------------------------------------------- criterion 1

Tensor3 random_tensor(Rng& rng, nn::Shape s) {
    Tensor3 t(s.channels, s.height, s.width);
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
}

void randomize(nn::Network& net, Rng& rng) {
    for (auto p : net.parameters())
        for (double& v : p) v = rng.uniform(-0.5, 0.5);
}

nn::Network stack(nn::Shape in, std::function<void(nn::Network&)> build) {
    nn::Network net;
    net.input_shape = in;
    build(net);
    return net;
}

Verdict gradient_fidelity() {
    using namespace nn;
    struct Case {
        const char* name;
        std::function<Network()> make;
    };
    const std::vector<Case> cases = {
        {"conv", [] { return stack({2, 7, 7}, [](Network& n) {
             n.add(std::make_unique<ConvLayer>(2, 3, 3, 1, Activation::ReLU));
             n.add(std::make_unique<ConvLayer>(3, 2, 2, 2, Activation::Tanh));
         }); }},
        {"pool", [] { return stack({3, 8, 8}, [](Network& n) {
             n.add(std::make_unique<PoolLayer>(2, 2));
             n.add(std::make_unique<PoolLayer>(2, 2, 0.8, 0.1, Activation::Tanh));
         }); }},
        {"dense", [] { return stack({1, 1, 12}, [](Network& n) {
             n.add(std::make_unique<DenseLayer>(12, 6, Activation::Tanh));
             n.add(std::make_unique<DenseLayer>(6, 2, Activation::Identity));
         }); }},
        {"stack", [] { return stack({3, 13, 13}, [](Network& n) {
             n.add(std::make_unique<ConvLayer>(3, 4, 3, 1, Activation::ReLU));
             n.add(std::make_unique<PoolLayer>(2, 2));
             n.add(std::make_unique<ConvLayer>(4, 5, 2, 1, Activation::ReLU));
             n.add(std::make_unique<PoolLayer>(2, 2));
             n.add(std::make_unique<DenseLayer>(static_cast<int>(n.shape_trace().back().size()), 8, Activation::Tanh));
             n.add(std::make_unique<DenseLayer>(8, 1, Activation::Identity));
         }); }},
    };
    double worst = 0.0;
    std::ostringstream per;
    for (const auto& c : cases) {
        double case_worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            Rng rng(1000 * seed + 7);
            Network net = c.make();
            randomize(net, rng);
            const auto x = random_tensor(rng, net.input_shape);
            std::vector<double> y(net.shape_trace().back().size());
            for (double& v : y) v = rng.normal();
            GradientCheckOptions opt;
            opt.seed = seed;
            opt.samples_per_block = 0;
            case_worst = std::max(case_worst, gradient_check(net, x, y, opt).worst());
        }
        per << c.name << ' ' << fmt("%.2e", case_worst) << ", ";
        worst = std::max(worst, case_worst);
    }

    // Squared-error loss against central differences in the prediction itself.
    double loss_worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        std::vector<double> h(5), y(5);
        for (std::size_t i = 0; i < 5; ++i) {
            h[i] = rng.normal();
            y[i] = rng.normal();
        }
        const auto analytic = mse_loss(h, y).gradient;
        const std::vector<std::size_t> probes{0, 1, 2, 3, 4};
        loss_worst = std::max(loss_worst, finite_difference_check([&] { return mse_loss(h, y).loss; }, h, analytic,
                                                                  1e-5, probes));
    }
    per << "mse " << fmt("%.2e", loss_worst);
    worst = std::max(worst, loss_worst);
    return {worst < 1e-4, "max relative error " + fmt("%.2e", worst) + " < 1e-4 (" + per.str() + ") over 10 seeds"};
}

// ---------------------------------------------------------------- criterion 2

double mean_pair_distance(const embedding::RealMatrix& x, int a0, int a1, int b0, int b1) {
    double sum = 0.0;
    int count = 0;
    for (int i = a0; i < a1; ++i)
        for (int j = b0; j < b1; ++j)
            if (i != j) {
                sum += (x.row(i) - x.row(j)).norm();
                ++count;
            }
    return sum / count;
}

Verdict tsne_correctness() {
    constexpr int per_cluster = 20, dim = 5;
    constexpr double target_perplexity = 10.0;
    int separated = 0, decreased = 0;
    double worst_perplexity = 0.0, worst_margin = 1e300;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        embedding::RealMatrix x(2 * per_cluster, dim);
        for (int i = 0; i < x.rows(); ++i)
            for (int d = 0; d < dim; ++d) x(i, d) = rng.normal();
        // Shift the second cluster until mean inter / mean intra distance is 10.
        const double intra = 0.5 * (mean_pair_distance(x, 0, per_cluster, 0, per_cluster) +
                                    mean_pair_distance(x, per_cluster, 2 * per_cluster, per_cluster, 2 * per_cluster));
        auto ratio_at = [&](double s) {
            embedding::RealMatrix shifted = x;
            shifted.bottomRows(per_cluster).col(0).array() += s;
            return mean_pair_distance(shifted, 0, per_cluster, per_cluster, 2 * per_cluster) / intra;
        };
        double lo = 0.0, hi = 100.0 * intra;
        for (int it = 0; it < 200; ++it) (ratio_at(0.5 * (lo + hi)) < 10.0 ? lo : hi) = 0.5 * (lo + hi);
        x.bottomRows(per_cluster).col(0).array() += 0.5 * (lo + hi);

        embedding::TsneConfig cfg;
        cfg.perplexity = target_perplexity;
        cfg.seed = seed;
        const auto e = embedding::run_tsne(x, cfg);
        if (e.kl < e.initial_kl) ++decreased;
        double max_intra = 0.0, min_inter = 1e300;
        for (int i = 0; i < x.rows(); ++i)
            for (int j = i + 1; j < x.rows(); ++j) {
                const double d = (e.y.row(i) - e.y.row(j)).norm();
                if ((i < per_cluster) == (j < per_cluster))
                    max_intra = std::max(max_intra, d);
                else
                    min_inter = std::min(min_inter, d);
            }
        if (max_intra < min_inter) ++separated;
        worst_margin = std::min(worst_margin, min_inter / max_intra);
        for (double p : embedding::input_affinities(x, target_perplexity).perplexity)
            worst_perplexity = std::max(worst_perplexity, std::abs(p - target_perplexity));
    }
    const bool pass = separated == 5 && decreased == 5 && worst_perplexity < 1e-4;
    return {pass, "separated " + std::to_string(separated) + "/5 (min inter / max intra >= " + fmt("%.2f", worst_margin) +
                      "), KL decreased " + std::to_string(decreased) + "/5, perplexity error " +
                      fmt("%.1e", worst_perplexity) + " < 1e-4"};
}

// ---------------------------------------------------------------- criterion 3

Verdict distance_properties() {
    using namespace network;
    PowerNetwork two;
    auto b0 = testing::make_bus(0, BusKind::Slack);
    auto b1 = testing::make_bus(1, BusKind::PQ);
    b0.shunt_g = b1.shunt_g = 1.0;
    two.buses = {b0, b1};
    two.branches = {testing::make_branch(0, 1, 0.1, 0.0)};
    const double hand = std::abs(electrical_distance(build_matrices(two).z)(0, 1) - 2.0 / 21.0);

    Rng rng(2024);
    int good = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(14));
        const auto d = electrical_distance(build_matrices(testing::random_radial(rng, n)).z);
        bool ok = true;
        for (int i = 0; i < n; ++i) {
            ok = ok && d(i, i) == 0.0;
            for (int j = 0; j < n; ++j) ok = ok && d(i, j) == d(j, i);
        }
        good += ok;
    }

    const auto net = testing::ieee39();
    const auto m = build_matrices(net, solve_power_flow(net, 1.0));
    const ComplexMatrix r = m.y * m.z - ComplexMatrix::Identity(m.y.rows(), m.y.cols());
    const double residual = r.cwiseAbs().rowwise().sum().maxCoeff();
    const bool pass = hand < 1e-12 && good == 100 && residual < 1e-8;
    return {pass, "|D01 - 2/21| = " + fmt("%.1e", hand) + ", symmetric zero-diagonal " + std::to_string(good) +
                      "/100, ||YZ - I||inf = " + fmt("%.1e", residual)};
}

// ---------------------------------------------------------------- criterion 4

Verdict simulator_physics(const harness::PipelineConfig& demo) {
    using namespace simulator;
    const auto net = testing::ieee39();

    // (a)
    const auto trace = simulate(build_dynamic_model(net, 1.0), Scenario{});
    double drift = 0.0;
    for (std::size_t k = 0; k < trace.steps(); ++k) drift = std::max(drift, std::abs(trace.coi_hz[k] - 60.0));

    // (b) lose 0.1 pu with H = 2 + 3 s left online
    auto three = testing::three_machine(2.0, 3.0, 4.0);
    three.generators[2].p_mech = 0.1;
    Scenario trip;
    trip.kind = DisturbanceKind::GeneratorTrip;
    trip.target = 2;
    SimulationOptions short_run;
    short_run.horizon = 1.0;
    const auto tt = simulate(build_dynamic_model(three, 1.0), trip, short_run);
    const double rocof = (tt.coi_pu[3] - tt.coi_pu[0]) / (3.0 * tt.dt);
    const double expected_rocof = -tt.delta_p / (2.0 * 5.0);
    const double rocof_error = std::abs(rocof / expected_rocof - 1.0);

    // (c) aggregate K = 20, D = 1
    Scenario step;
    step.kind = DisturbanceKind::LoadStep;
    step.target = 3;
    step.delta_p = 0.1;
    const auto st = simulate(build_dynamic_model(testing::three_machine(3.0, 4.0, 5.0, 20.0 / 3.0, 1.0 / 3.0), 1.0), step);
    const double ss_error = std::abs(st.coi_pu.back() - (-0.1 / 21.0));

    // (d) scenarios from the demo generator
    const auto seeds = harness::derive_seeds(demo.seed);
    double worst_shift = 0.0;
    int compared = 0;
    const auto level = log::level();
    log::set_level(log::Level::Silent);
    for (int attempt = 0; attempt < 60; ++attempt) {
        const auto sc = draw_scenario(net, seeds.scenarios, attempt, demo.simulation);
        try {
            const auto model = build_dynamic_model(net, sc.load_level);
            SimulationOptions coarse = demo.simulation.simulation, fine = coarse;
            fine.dt = coarse.dt / 2.0;
            const double a = extract_frequency_features(simulate(model, sc, coarse)).nadir;
            const double b = extract_frequency_features(simulate(model, sc, fine)).nadir;
            worst_shift = std::max(worst_shift, std::abs(a - b));
            ++compared;
        } catch (const Error&) {
            // screened out by the scenario generator as well
        }
    }
    log::set_level(level);

    const bool pass = drift <= 1e-9 && rocof_error < 0.02 && ss_error < 1e-3 && worst_shift < 1e-4 && compared > 40;
    return {pass, "(a) drift " + fmt("%.1e", drift) + " Hz; (b) ROCOF error " + fmt("%.2f", 100 * rocof_error) +
                      "%; (c) steady-state error " + fmt("%.1e", ss_error) + " pu; (d) max nadir shift " +
                      fmt("%.1e", worst_shift) + " Hz over " + std::to_string(compared) + " scenarios"};
}

// ---------------------------------------------------------------- criterion 5

Verdict response_identity(const harness::PipelineConfig& demo) {
    const auto net = network::load_network(demo.network_file);
    const auto set = simulator::read_scenario_set(harness::Workspace{demo.workspace}.scenarios());
    double worst = 0.0;
    for (const auto& rec : set.records) {
        const auto& f = rec.snapshot.get("response_tf");
        double weighted = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) weighted += 2.0 * net.generators[i].inertia_h * f[i];
        worst = std::max(worst, std::abs(weighted));
    }
    return {worst <= 1e-9 && !set.records.empty(),
            "max |sum 2H f| " + fmt("%.1e", worst) + " over " + std::to_string(set.records.size()) + " snapshots"};
}

// ---------------------------------------------------------------- criteria 6 to 8

const harness::Metrics& metrics_for(const harness::PipelineResult& r, harness::ModelKind kind) {
    for (const auto& [k, m] : r.metrics)
        if (k == kind) return m;
    throw Error(ErrorCode::InvalidArgument, "model missing from the report: " + harness::to_string(kind));
}

Verdict end_to_end(const harness::PipelineResult& r, double seconds) {
    using harness::ModelKind;
    const double cnn = metrics_for(r, ModelKind::Cnn).mae;
    const double mlp = metrics_for(r, ModelKind::Mlp).mae;
    const double mean = metrics_for(r, ModelKind::Mean).mae;
    const bool pass = cnn < 0.5 * mean && cnn <= 1.25 * mlp && seconds < 1800.0;
    return {pass, "CNN MAE " + fmt("%.5f", cnn) + " Hz vs 0.5 x mean " + fmt("%.5f", 0.5 * mean) + " and 1.25 x MLP " +
                      fmt("%.5f", 1.25 * mlp) + "; pipeline " + fmt("%.0f", seconds) + " s < 1800 s"};
}

Verdict learning_curve(const harness::PipelineResult& r) {
    std::vector<std::pair<int, double>> cnn;
    for (const auto& row : r.learning_curve)
        if (row.model == harness::ModelKind::Cnn) cnn.emplace_back(row.train_size, row.metrics.mae);
    std::sort(cnn.begin(), cnn.end());
    if (cnn.size() < 2) return {false, "fewer than two CNN sizes"};
    int inversions = 0;
    std::string trail;
    for (std::size_t i = 0; i < cnn.size(); ++i) {
        if (i > 0 && cnn[i].second > cnn[i - 1].second) ++inversions;
        trail += (i ? ", " : "") + std::to_string(cnn[i].first) + ": " + fmt("%.5f", cnn[i].second);
    }
    const bool pass = cnn.back().second < cnn.front().second && inversions <= 1;
    return {pass, "CNN MAE by size {" + trail + "}, " + std::to_string(inversions) + " inversion(s)"};
}

Verdict determinism(const fs::path& a, const fs::path& b) {
    std::vector<fs::path> files;
    for (const char* dir : {"reports", "models"})
        for (const auto& entry : fs::recursive_directory_iterator(a / dir))
            if (entry.is_regular_file()) files.push_back(fs::relative(entry.path(), a));
    std::sort(files.begin(), files.end());
    std::string differing;
    for (const auto& rel : files)
        if (!fs::exists(b / rel) || text::read_file(a / rel) != text::read_file(b / rel))
            differing += " " + rel.generic_string();
    return {differing.empty() && !files.empty(),
            std::to_string(files.size()) + " report and checkpoint files compared" +
                (differing.empty() ? ", all byte-identical" : "; differ:" + differing)};
}

// ---------------------------------------------------------------- criterion 9

Verdict overfit() {
    using namespace nn;
    Rng rng(10);
    std::vector<Tensor3> inputs;
    std::vector<TrainingExample> data;
    for (int i = 0; i < 20; ++i) {
        Tensor3 t(3, 12, 12);
        for (double& v : t.data) v = rng.uniform();
        inputs.push_back(std::move(t));
    }
    for (int i = 0; i < 20; ++i) data.push_back({&inputs[static_cast<std::size_t>(i)], rng.uniform()});
    Network net = stack({3, 12, 12}, [](Network& n) {
        n.add(std::make_unique<ConvLayer>(3, 4, 3, 1, Activation::ReLU));
        n.add(std::make_unique<PoolLayer>(2, 2));
        n.add(std::make_unique<ConvLayer>(4, 5, 2, 1, Activation::Tanh));
        n.add(std::make_unique<PoolLayer>(2, 2));
        n.add(std::make_unique<DenseLayer>(20, 8, Activation::Tanh));
        n.add(std::make_unique<DenseLayer>(8, 1, Activation::Identity));
    });
    net.initialize(4);
    TrainConfig cfg;
    cfg.epochs = 2000;
    cfg.stop_below_mse = 1e-5;
    cfg.seed = 2;
    const auto result = train(net, data, cfg);
    const double mse = evaluate_mse(net, data);
    return {mse < 1e-4, "training MSE " + fmt("%.2e", mse) + " < 1e-4 after " +
                            std::to_string(result.trace.back().epoch) + " epochs (limit 2000)"};
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path config_path = argc > 1 ? fs::path(argv[1]) : fs::path(NADIR_DEMO_CONFIG);
    const fs::path scratch = argc > 2 ? fs::path(argv[2]) : fs::path(NADIR_ACCEPTANCE_DIR);
    log::set_level(log::Level::Warning);

    auto demo = harness::load_config(config_path);
    demo.threads = 1;
    std::printf("acceptance: config %s (hash %s), seed %llu\n", config_path.string().c_str(),
                harness::config_hash(demo).c_str(), static_cast<unsigned long long>(demo.seed));

    report(1, "gradient fidelity", 10.0, gradient_fidelity);
    report(2, "t-SNE correctness", 30.0, tsne_correctness);
    report(3, "electrical distance", 5.0, distance_properties);
    report(4, "simulator physics", 60.0, [&] { return simulator_physics(demo); });

    auto run_a = demo, run_b = demo;
    run_a.workspace = scratch / "run_a";
    run_b.workspace = scratch / "run_b";
    harness::PipelineResult result_a;
    double seconds_a = 0.0;
    bool pipeline_ok = true;
    std::string pipeline_error;
    try {
        fs::remove_all(run_a.workspace);
        const auto start = Clock::now();
        result_a = harness::end_to_end(run_a);
        seconds_a = std::chrono::duration<double>(Clock::now() - start).count();
    } catch (const std::exception& e) {
        pipeline_ok = false;
        pipeline_error = e.what();
    }
    auto needs_pipeline = [&](std::function<Verdict()> body) {
        return [=]() -> Verdict { return pipeline_ok ? body() : Verdict{false, "pipeline failed: " + pipeline_error}; };
    };
    report(5, "response identity", 0.0, needs_pipeline([&] { return response_identity(run_a); }));
    report(6, "end-to-end demo", 0.0, needs_pipeline([&] { return end_to_end(result_a, seconds_a); }));
    report(7, "learning-curve trend", 0.0, needs_pipeline([&] { return learning_curve(result_a); }));
    report(8, "determinism", 0.0, needs_pipeline([&] {
        fs::remove_all(run_b.workspace);
        harness::end_to_end(run_b);
        return determinism(run_a.workspace, run_b.workspace);
    }));
    report(9, "overfit sanity", 0.0, overfit);

    std::printf("acceptance: %d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
