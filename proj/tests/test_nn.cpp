#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "nadir/error.hpp"
#include "nadir/nn.hpp"
#include "nadir/rng.hpp"

using namespace nadir;
using namespace nadir::nn;

namespace {

Tensor3 random_tensor(Rng& rng, int c, int h, int w, double lo = -1.0, double hi = 1.0) {
    Tensor3 t(c, h, w);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

/// Random biases keep ReLU pre-activations away from exactly zero.
void randomize(Network& net, Rng& rng) {
    for (auto p : net.parameters())
        for (double& v : p) v = rng.uniform(-0.5, 0.5);
}

Network small_cnn(int c, int h, std::uint64_t seed) {
    Network net;
    net.name = "small";
    net.input_shape = {c, h, h};
    net.add(std::make_unique<ConvLayer>(c, 4, 3, 1, Activation::ReLU));
    net.add(std::make_unique<PoolLayer>(2, 2));
    net.add(std::make_unique<ConvLayer>(4, 5, 2, 1, Activation::Tanh));
    net.add(std::make_unique<PoolLayer>(2, 2));
    const auto s = net.shape_trace().back();
    net.add(std::make_unique<DenseLayer>(static_cast<int>(s.size()), 8, Activation::Tanh));
    net.add(std::make_unique<DenseLayer>(8, 1, Activation::Identity));
    net.initialize(seed);
    return net;
}

/// Dense layer whose backward deliberately overstates the weight gradient.
class CorruptedDense : public DenseLayer {
public:
    using DenseLayer::DenseLayer;
    void backward(const Tensor3& g, Tensor3& gi, bool need) override {
        DenseLayer::backward(g, gi, need);
        for (double& w : grad_weights) w *= 1.5;
    }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<CorruptedDense>(*this); }
};

}  // namespace

TEST(Conv, OneByOneIdentityKernel) {
    ConvLayer conv(1, 1, 1);
    conv.weights = {1.0};
    Rng rng(1);
    const Tensor3 x = random_tensor(rng, 1, 4, 5, 0.0, 2.0);
    Tensor3 y;
    conv.forward(x, y);
    EXPECT_EQ(y, x);
}

TEST(Conv, HandCrossCorrelation) {
    ConvLayer conv(1, 1, 2, 1, Activation::Identity);
    conv.weights = {1, 0, 0, 1};
    Tensor3 x(1, 3, 3);
    x.data = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    Tensor3 y;
    conv.forward(x, y);
    EXPECT_EQ(y.data, (std::vector<double>{6, 8, 12, 14}));
}

TEST(Conv, ShapeRuleAndErrors) {
    ConvLayer conv(6, 32, 10);
    EXPECT_EQ(conv.output_shape({6, 100, 100}), (Shape{32, 91, 91}));
    ConvLayer strided(2, 3, 3, 2);
    EXPECT_EQ(strided.output_shape({2, 10, 9}), (Shape{3, 4, 4}));
    EXPECT_THROW(conv.output_shape({5, 100, 100}), Error);
    EXPECT_THROW(conv.output_shape({6, 9, 100}), Error);
}

TEST(Conv, SparseAndDensePathsAgree) {
    Rng rng(2);
    for (int stride : {1, 2}) {
        ConvLayer a(3, 4, 3, stride, Activation::Tanh);
        a.initialize(rng);
        for (double& b : a.bias) b = rng.uniform(-0.2, 0.2);
        ConvLayer b = a;
        a.sparse_threshold = 1.0;  // always scatter
        b.sparse_threshold = -1.0;
        Tensor3 x(3, 11, 11);
        for (int i = 0; i < 20; ++i) x.data[static_cast<std::size_t>(rng.below(x.size()))] = rng.uniform(-1, 1);
        Tensor3 ya, yb, ga, gb;
        a.forward(x, ya);
        b.forward(x, yb);
        for (std::size_t i = 0; i < ya.size(); ++i) EXPECT_NEAR(ya.data[i], yb.data[i], 1e-14);
        Tensor3 g = random_tensor(rng, ya.channels, ya.height, ya.width);
        a.backward(g, ga, true);
        b.backward(g, gb, true);
        for (std::size_t i = 0; i < a.grad_weights.size(); ++i) EXPECT_NEAR(a.grad_weights[i], b.grad_weights[i], 1e-13);
        for (std::size_t i = 0; i < ga.size(); ++i) EXPECT_NEAR(ga.data[i], gb.data[i], 1e-13);
    }
}

TEST(Pool, HandMaxConstantAndShape) {
    PoolLayer pool;
    Tensor3 x(1, 2, 2);
    x.data = {1, 2, 3, 4};
    Tensor3 y;
    pool.forward(x, y);
    EXPECT_EQ(y.data, (std::vector<double>{4}));
    Tensor3 c(2, 6, 6, 0.7);
    pool.forward(c, y);
    for (double v : y.data) EXPECT_EQ(v, 0.7);
    EXPECT_EQ(pool.output_shape({32, 91, 91}), (Shape{32, 45, 45}));
}

TEST(Pool, GradientGoesToFirstArgmax) {
    PoolLayer pool;
    Tensor3 x(1, 2, 4);
    x.data = {5, 1, 2, 2, 5, 0, 2, 2};  // ties in both windows
    Tensor3 y, gi;
    pool.forward(x, y);
    Tensor3 g(1, 1, 2);
    g.data = {1.0, 3.0};
    pool.backward(g, gi, true);
    EXPECT_EQ(gi.data, (std::vector<double>{1, 0, 3, 0, 0, 0, 0, 0}));
}

TEST(Dense, IdentityHandValueAndLength) {
    DenseLayer id(3, 3, Activation::Identity);
    id.weights = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    Tensor3 x(3, 1, 1), y;
    x.data = {0.3, -2.0, 7.0};
    id.forward(x, y);
    EXPECT_EQ(y.data, x.data);

    DenseLayer t(2, 1, Activation::Tanh);
    t.weights = {0.1, 0.1};
    t.bias = {0.2};
    Tensor3 v(2, 1, 1);
    v.data = {1.0, 2.0};
    t.forward(v, y);
    EXPECT_NEAR(y.data[0], std::tanh(0.5), 1e-15);
    EXPECT_NEAR(y.data[0], 0.46212, 5e-6);

    DenseLayer wide(4, 7, Activation::ReLU);
    wide.forward(Tensor3(1, 2, 2), y);
    EXPECT_EQ(y.size(), 7u);
    EXPECT_THROW(wide.forward(Tensor3(1, 1, 3), y), Error);
}

TEST(Loss, HandValues) {
    const double p[] = {0.5}, t[] = {0.3};
    const auto l = mse_loss(p, t);
    EXPECT_NEAR(l.loss, 0.02, 1e-15);
    EXPECT_NEAR(l.gradient[0], 0.2, 1e-15);
    EXPECT_EQ(mse_loss(t, t).loss, 0.0);
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        const double a[] = {rng.normal(), rng.normal()}, b[] = {rng.normal(), rng.normal()};
        EXPECT_GE(mse_loss(a, b).loss, 0.0);
    }
    const double two[] = {1.0, 2.0};
    EXPECT_THROW(mse_loss(two, t), Error);
}

TEST(GradientCheck, LinearNetworkIsExact) {
    // One linear layer makes the loss quadratic in every parameter, so central
    // differences carry rounding error only.
    Rng rng(5);
    Network dense;
    dense.input_shape = {2, 5, 5};
    dense.add(std::make_unique<DenseLayer>(50, 1, Activation::Identity));
    Network conv;
    conv.input_shape = {2, 5, 5};
    conv.add(std::make_unique<ConvLayer>(2, 1, 5, 1, Activation::Identity));
    const double target[] = {0.3};
    GradientCheckOptions opt;
    opt.samples_per_block = 0;
    // Magnitudes in [0.5, 1] keep every gradient component well above rounding noise.
    const auto away_from_zero = [&] { return (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.0); };
    for (Network* net : {&dense, &conv}) {
        for (auto p : net->parameters())
            for (double& v : p) v = away_from_zero();
        Tensor3 x(2, 5, 5);
        for (double& v : x.data) v = away_from_zero();
        EXPECT_LT(gradient_check(*net, x, target, opt).worst(), 1e-9);
    }
}

TEST(GradientCheck, EveryLayerTypeOverTenSeeds) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(100 + seed);
        Network net = small_cnn(3, 13, seed);
        randomize(net, rng);
        const double target[] = {rng.normal()};
        GradientCheckOptions opt;
        opt.seed = seed;
        const auto r = gradient_check(net, random_tensor(rng, 3, 13, 13), target, opt);
        EXPECT_LT(r.max_relative_error, 1e-4) << "seed " << seed;
        EXPECT_LT(r.max_input_relative_error, 1e-4) << "seed " << seed;
    }
}

TEST(GradientCheck, PoolWithScaleBiasAndActivation) {
    Rng rng(6);
    Network net;
    net.input_shape = {2, 6, 6};
    net.add(std::make_unique<PoolLayer>(2, 2, 0.7, 0.1, Activation::Tanh));
    net.add(std::make_unique<DenseLayer>(18, 1, Activation::Identity));
    randomize(net, rng);
    const double target[] = {0.2};
    GradientCheckOptions opt;
    opt.samples_per_block = 0;
    EXPECT_LT(gradient_check(net, random_tensor(rng, 2, 6, 6), target, opt).worst(), 1e-6);
}

TEST(GradientCheck, CorruptedBackwardIsDetected) {
    Rng rng(7);
    Network net;
    net.input_shape = {1, 4, 4};
    net.add(std::make_unique<CorruptedDense>(16, 3, Activation::Tanh));
    net.add(std::make_unique<DenseLayer>(3, 1, Activation::Identity));
    randomize(net, rng);
    const double target[] = {1.0};
    const auto r = gradient_check(net, random_tensor(rng, 1, 4, 4), target);
    EXPECT_GT(r.max_relative_error, 1e-2);
}

TEST(GradientCheck, GenericProbe) {
    std::vector<double> x = {0.3, -1.2, 2.0};
    const auto f = [&] { return x[0] * x[0] + std::sin(x[1]) * x[2]; };
    const std::vector<double> right = {0.6, std::cos(-1.2) * 2.0, std::sin(-1.2)};
    const std::vector<double> wrong = {0.6, std::cos(-1.2) * 2.0, 0.5};
    const std::size_t probes[] = {0, 1, 2};
    EXPECT_LT(finite_difference_check(f, x, right, 1e-5, probes), 1e-8);
    EXPECT_GT(finite_difference_check(f, x, wrong, 1e-5, probes), 1e-2);
}

TEST(Builders, PaperShapeTrace) {
    const Network net = build_paper_cnn(100, 6);
    const auto s = net.shape_trace();
    const std::vector<Shape> expected = {{6, 100, 100}, {32, 91, 91}, {32, 45, 45}, {64, 36, 36},
                                         {64, 18, 18},  {256, 1, 1},  {1, 1, 1}};
    EXPECT_EQ(s, expected);
    const std::size_t dense = 18u * 18u * 64u * 256u;
    EXPECT_EQ(dense, 20736u * 256u);
    EXPECT_GT(static_cast<double>(dense) / static_cast<double>(net.parameter_count()), 0.95);
}

TEST(Builders, SmallGridUsesFiveByFive) {
    const Network net = build_paper_cnn(32, 6);
    EXPECT_EQ(paper_kernel_size(32), 5);
    EXPECT_EQ(dynamic_cast<const ConvLayer&>(*net.layers[0]).kernel, 5);
    EXPECT_EQ(net.shape_trace()[4], (Shape{64, 5, 5}));
    EXPECT_EQ(paper_kernel_size(65), 10);
    try {
        build_paper_cnn(12, 6);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::GridTooSmallForKernel);
    }
}

TEST(Builders, MlpFlattensTheGrid) {
    const Network mlp = build_mlp(32, 6);
    EXPECT_EQ(dynamic_cast<const DenseLayer&>(*mlp.layers[0]).inputs, 32 * 32 * 6);
    const std::vector<int> widths = {32, 32, 64, 64, 256, 1};
    ASSERT_EQ(mlp.layers.size(), widths.size());
    for (std::size_t i = 0; i < widths.size(); ++i)
        EXPECT_EQ(dynamic_cast<const DenseLayer&>(*mlp.layers[i]).units, widths[i]);
}

TEST(Training, ZeroLearningRateLeavesParametersUntouched) {
    Rng rng(8);
    Network net = small_cnn(2, 10, 3);
    std::vector<Tensor3> inputs;
    std::vector<TrainingExample> data;
    for (int i = 0; i < 10; ++i) inputs.push_back(random_tensor(rng, 2, 10, 10));
    for (int i = 0; i < 10; ++i) data.push_back({&inputs[static_cast<std::size_t>(i)], rng.uniform()});
    Network before = net;
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 3;
    train(net, data, cfg);
    auto a = before.parameters();
    auto b = net.parameters();
    for (std::size_t k = 0; k < a.size(); ++k)
        for (std::size_t i = 0; i < a[k].size(); ++i) ASSERT_EQ(a[k][i], b[k][i]);
}

TEST(Training, SameSeedSameTrace) {
    Rng rng(9);
    std::vector<Tensor3> inputs;
    std::vector<TrainingExample> data;
    for (int i = 0; i < 24; ++i) inputs.push_back(random_tensor(rng, 2, 10, 10));
    for (int i = 0; i < 24; ++i) data.push_back({&inputs[static_cast<std::size_t>(i)], rng.uniform()});
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = 17;
    Network a = small_cnn(2, 10, 1), b = small_cnn(2, 10, 1);
    const auto ra = train(a, data, cfg);
    const auto rb = train(b, data, cfg);
    ASSERT_EQ(ra.trace.size(), rb.trace.size());
    for (std::size_t i = 0; i < ra.trace.size(); ++i) EXPECT_EQ(ra.trace[i].loss, rb.trace[i].loss);
    EXPECT_LT(ra.trace.back().loss, ra.trace.front().loss);
}

TEST(Training, NonFiniteLossAborts) {
    Tensor3 x(1, 1, 1, 1.0);
    const TrainingExample ex = {&x, std::nan("")};
    Network net;
    net.input_shape = {1, 1, 1};
    net.add(std::make_unique<DenseLayer>(1, 1, Activation::Identity));
    try {
        train(net, std::span(&ex, 1), {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFiniteLoss);
    }
}

TEST(Training, SmallCnnMemorizesTwentySamples) {
    Rng rng(10);
    std::vector<Tensor3> inputs;
    std::vector<TrainingExample> data;
    for (int i = 0; i < 20; ++i) inputs.push_back(random_tensor(rng, 3, 12, 12, 0.0, 1.0));
    for (int i = 0; i < 20; ++i) data.push_back({&inputs[static_cast<std::size_t>(i)], rng.uniform()});
    Network net = small_cnn(3, 12, 4);
    TrainConfig cfg;
    cfg.epochs = 2000;
    cfg.stop_below_mse = 1e-5;
    cfg.seed = 2;
    train(net, data, cfg);
    EXPECT_LT(evaluate_mse(net, data), 1e-4);
}

TEST(Checkpoint, RoundTripPredictsBitwise) {
    Rng rng(11);
    Network net = build_paper_cnn(32, 3, 5);
    net.scaling = {59.1, 59.9};
    const Tensor3 x = random_tensor(rng, 3, 32, 32);
    const double p = net.predict(x);
    EXPECT_EQ(net.predict(x), p);
    const auto path = std::filesystem::temp_directory_path() / "nadir_nn_test" / "model.bin";
    save_checkpoint(path, net);
    Network back = load_checkpoint(path);
    EXPECT_EQ(back.predict(x), p);
    EXPECT_EQ(back.name, "cnn");
    EXPECT_EQ(back.shape_trace(), net.shape_trace());
    EXPECT_THROW(back.predict(Tensor3(3, 31, 32)), Error);
    std::filesystem::remove_all(path.parent_path());
}
