#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nadir/rng.hpp"
#include "nadir/tensor.hpp"

namespace nadir::nn {

enum class Activation { Identity, ReLU, Tanh };

std::string to_string(Activation a);
double activate(Activation a, double z);
/// Derivative expressed through the activation output y = σ(z).
double activation_slope(Activation a, double y);

struct Shape {
    int channels = 1;
    int height = 1;
    int width = 1;

    std::size_t size() const { return static_cast<std::size_t>(channels) * height * width; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

Shape shape_of(const Tensor3& t);

enum class LayerKind : std::uint32_t { Conv = 1, Pool = 2, Dense = 3 };

/// A layer keeps the cache of its latest forward pass and accumulates
/// parameter gradients across backward calls until `zero_gradients`.
class Layer {
public:
    virtual ~Layer() = default;
    virtual LayerKind kind() const = 0;
    virtual std::string describe() const = 0;
    /// Throws ShapeMismatch when the layer cannot accept `in`.
    virtual Shape output_shape(const Shape& in) const = 0;
    virtual void forward(const Tensor3& in, Tensor3& out) = 0;
    /// `grad_in` is only filled when `need_input_gradient` is set.
    virtual void backward(const Tensor3& grad_out, Tensor3& grad_in, bool need_input_gradient) = 0;
    virtual std::vector<std::span<double>> parameters() { return {}; }
    virtual std::vector<std::span<double>> gradients() { return {}; }
    virtual void initialize(Rng&) {}
    virtual std::unique_ptr<Layer> clone() const = 0;

    void zero_gradients();
    std::size_t parameter_count();
};

/// Valid cross-correlation, one k×k×C kernel per output channel.
class ConvLayer : public Layer {
public:
    ConvLayer(int in_channels, int out_channels, int kernel, int stride = 1, Activation act = Activation::ReLU);

    LayerKind kind() const override { return LayerKind::Conv; }
    std::string describe() const override;
    Shape output_shape(const Shape& in) const override;
    void forward(const Tensor3& in, Tensor3& out) override;
    void backward(const Tensor3& grad_out, Tensor3& grad_in, bool need_input_gradient) override;
    std::vector<std::span<double>> parameters() override { return {weights, bias}; }
    std::vector<std::span<double>> gradients() override { return {grad_weights, grad_bias}; }
    void initialize(Rng& rng) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ConvLayer>(*this); }

    int in_channels, out_channels, kernel, stride;
    Activation activation;
    std::vector<double> weights;  // [out][in][kr][kc]
    std::vector<double> bias;
    std::vector<double> grad_weights, grad_bias;
    /// Inputs with at most this fraction of nonzeros use the scatter path.
    double sparse_threshold = 0.25;

private:
    void im2col(const Tensor3& in, int oh, int ow);
    Tensor3 input_;
    Tensor3 output_;
    std::vector<double> columns_;
    bool sparse_ = false;
    std::vector<std::size_t> nonzero_;
};

/// Max over windows, then σ(β·max + bias) with β, bias and σ fixed.
class PoolLayer : public Layer {
public:
    explicit PoolLayer(int window = 2, int stride = 2, double beta = 1.0, double offset = 0.0,
                       Activation act = Activation::Identity);

    LayerKind kind() const override { return LayerKind::Pool; }
    std::string describe() const override;
    Shape output_shape(const Shape& in) const override;
    void forward(const Tensor3& in, Tensor3& out) override;
    void backward(const Tensor3& grad_out, Tensor3& grad_in, bool need_input_gradient) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<PoolLayer>(*this); }

    int window, stride;
    double beta, offset;
    Activation activation;

private:
    Shape in_shape_;
    Tensor3 output_;
    std::vector<std::size_t> argmax_;  // input index per output cell
};

/// σ(W·x + b) on the flattened input; output shape is (units, 1, 1).
class DenseLayer : public Layer {
public:
    DenseLayer(int inputs, int units, Activation act);

    LayerKind kind() const override { return LayerKind::Dense; }
    std::string describe() const override;
    Shape output_shape(const Shape& in) const override;
    void forward(const Tensor3& in, Tensor3& out) override;
    void backward(const Tensor3& grad_out, Tensor3& grad_in, bool need_input_gradient) override;
    std::vector<std::span<double>> parameters() override { return {weights, bias}; }
    std::vector<std::span<double>> gradients() override { return {grad_weights, grad_bias}; }
    void initialize(Rng& rng) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseLayer>(*this); }

    int inputs, units;
    Activation activation;
    std::vector<double> weights;  // [unit][input]
    std::vector<double> bias;
    std::vector<double> grad_weights, grad_bias;

private:
    Shape in_shape_;
    std::vector<double> input_;
    Tensor3 output_;
};

struct LossValue {
    double loss = 0.0;              // ½‖h − y‖²
    std::vector<double> gradient;   // h − y
};

LossValue mse_loss(std::span<const double> prediction, std::span<const double> target);

/// Min-max scaling of the regression target, kept with the model so
/// predictions come back in Hz.
struct TargetScaling {
    double min = 0.0;
    double max = 1.0;

    double unscale(double v) const { return min + v * (max - min); }
};

class Network {
public:
    Network() = default;
    Network(const Network& other);
    Network& operator=(const Network& other);
    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;

    std::string name;
    Shape input_shape;
    TargetScaling scaling;
    std::vector<std::unique_ptr<Layer>> layers;

    Network& add(std::unique_ptr<Layer> layer);
    /// Every intermediate shape, starting with the input; validates the stack.
    std::vector<Shape> shape_trace() const;
    std::size_t parameter_count() const;
    void initialize(std::uint64_t seed);
    void zero_gradients();

    const Tensor3& forward(const Tensor3& input);
    /// Back-propagates dE/d(output); returns dE/d(input) when requested.
    Tensor3 backward(const Tensor3& grad_output, bool need_input_gradient = false);

    /// Network output on the scaled target axis.
    double predict_scaled(const Tensor3& input);
    /// Prediction in Hz after inverse target scaling.
    double predict(const Tensor3& input);

    std::vector<std::span<double>> parameters();
    std::vector<std::span<double>> gradients();

private:
    std::vector<Tensor3> activations_;
};

Network build_paper_cnn(int h, int k, std::uint64_t seed = 0);
Network build_mlp(int h, int k, std::uint64_t seed = 0);
/// Kernel size the paper builder picks for a grid of size h.
int paper_kernel_size(int h);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step = 0;
    std::vector<std::vector<double>> m, v;
};

class Adam {
public:
    explicit Adam(double learning_rate = 1e-3) : learning_rate(learning_rate) {}
    /// Applies one update with the gradients currently accumulated in `net`,
    /// scaled by `gradient_scale` (1 / batch size).
    void step(Network& net, double gradient_scale = 1.0);

    double learning_rate;
    AdamState state;
};

struct TrainingExample {
    const Tensor3* input = nullptr;
    double target = 0.0;  // scaled
};

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 100;
    int batch_size = 16;
    std::uint64_t seed = 0;
    double stop_below_mse = 0.0;  // early stop once the epoch MSE falls below; 0 disables
    bool verbose = false;
};

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;  // mean ½e² over the epoch, before each batch update
    double mse = 0.0;   // mean e²
};

struct TrainResult {
    std::vector<EpochRecord> trace;
    bool stopped_early = false;
    double seconds = 0.0;
};

TrainResult train(Network& net, std::span<const TrainingExample> data, const TrainConfig& config);
/// Mean squared error on the scaled axis with no parameter update.
double evaluate_mse(Network& net, std::span<const TrainingExample> data);

void write_loss_csv(const std::filesystem::path& path, const TrainResult& result);

struct GradientCheckOptions {
    double epsilon = 1e-5;
    int samples_per_block = 40;  // parameters probed per parameter block; ≤ 0 probes all
    bool check_input = true;
    std::uint64_t seed = 0;
};

struct GradientCheckReport {
    double max_relative_error = 0.0;
    double max_input_relative_error = 0.0;
    std::size_t probed = 0;

    double worst() const { return std::max(max_relative_error, max_input_relative_error); }
};

/// Central differences of ½‖net(x) − y‖² against the analytic backward pass.
GradientCheckReport gradient_check(Network& net, const Tensor3& input, std::span<const double> target,
                                   const GradientCheckOptions& options = {});

/// |a − n| / max(|a|, |n|), 0 when both vanish.
double relative_error(double analytic, double numeric);

/// Generic finite-difference probe: `loss` is re-evaluated after perturbing
/// each probed entry of `values`; `analytic` holds the claimed gradient.
double finite_difference_check(const std::function<double()>& loss, std::span<double> values,
                               std::span<const double> analytic, double epsilon, std::span<const std::size_t> probes);

void save_checkpoint(const std::filesystem::path& path, const Network& net);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace nadir::nn
