#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "nadir/error.hpp"
#include "nadir/log.hpp"
#include "nadir/nn.hpp"
#include "nadir/text_io.hpp"

namespace nadir::nn {

Network::Network(const Network& other) : name(other.name), input_shape(other.input_shape), scaling(other.scaling) {
    for (const auto& l : other.layers) layers.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
    if (this != &other) {
        Network copy(other);
        *this = std::move(copy);
    }
    return *this;
}

Network& Network::add(std::unique_ptr<Layer> layer) {
    layers.push_back(std::move(layer));
    return *this;
}

std::vector<Shape> Network::shape_trace() const {
    std::vector<Shape> shapes = {input_shape};
    for (const auto& l : layers) shapes.push_back(l->output_shape(shapes.back()));
    return shapes;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l->parameter_count();
    return n;
}

void Network::initialize(std::uint64_t seed) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Rng rng(derive_seed(seed, i));
        layers[i]->initialize(rng);
    }
}

void Network::zero_gradients() {
    for (auto& l : layers) l->zero_gradients();
}

const Tensor3& Network::forward(const Tensor3& input) {
    if (shape_of(input) != input_shape)
        throw Error(ErrorCode::ShapeMismatch, "input " + std::to_string(input.channels) + "x" + std::to_string(input.height) +
                                                  "x" + std::to_string(input.width) + " does not match the network");
    activations_.resize(layers.size());
    const Tensor3* x = &input;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        layers[i]->forward(*x, activations_[i]);
        x = &activations_[i];
    }
    return *x;
}

Tensor3 Network::backward(const Tensor3& grad_output, bool need_input_gradient) {
    Tensor3 g = grad_output, next;
    for (std::size_t i = layers.size(); i-- > 0;) {
        const bool need = i > 0 || need_input_gradient;
        layers[i]->backward(g, next, need);
        if (need) std::swap(g, next);
    }
    return need_input_gradient ? g : Tensor3{};
}

double Network::predict_scaled(const Tensor3& input) {
    const Tensor3& out = forward(input);
    if (out.size() != 1) throw Error(ErrorCode::ShapeMismatch, "network does not end in a single output");
    return out.data[0];
}

double Network::predict(const Tensor3& input) { return scaling.unscale(predict_scaled(input)); }

std::vector<std::span<double>> Network::parameters() {
    std::vector<std::span<double>> out;
    for (auto& l : layers)
        for (auto p : l->parameters()) out.push_back(p);
    return out;
}

std::vector<std::span<double>> Network::gradients() {
    std::vector<std::span<double>> out;
    for (auto& l : layers)
        for (auto g : l->gradients()) out.push_back(g);
    return out;
}

int paper_kernel_size(int h) { return h <= 64 ? 5 : 10; }

Network build_paper_cnn(int h, int k, std::uint64_t seed) {
    if (h < 1 || k < 1) throw Error(ErrorCode::InvalidArgument, "grid size and channel count must be positive");
    const int kernel = paper_kernel_size(h);
    // h → h−K+1 → ⌊·/2⌋ → −K+1 → ⌊·/2⌋ must stay at least 1.
    const int a = (h - kernel + 1) / 2;
    const int b = (a - kernel + 1) / 2;
    if (h < kernel || a < kernel || b < 1)
        throw Error(ErrorCode::GridTooSmallForKernel,
                    "grid " + std::to_string(h) + " is too small for two " + std::to_string(kernel) + "x" +
                        std::to_string(kernel) + " convolution stages");
    Network net;
    net.name = "cnn";
    net.input_shape = {k, h, h};
    net.add(std::make_unique<ConvLayer>(k, 32, kernel, 1, Activation::ReLU));
    net.add(std::make_unique<PoolLayer>(2, 2));
    net.add(std::make_unique<ConvLayer>(32, 64, kernel, 1, Activation::ReLU));
    net.add(std::make_unique<PoolLayer>(2, 2));
    net.add(std::make_unique<DenseLayer>(64 * b * b, 256, Activation::Tanh));
    net.add(std::make_unique<DenseLayer>(256, 1, Activation::Identity));
    net.shape_trace();
    net.initialize(seed);
    return net;
}

Network build_mlp(int h, int k, std::uint64_t seed) {
    if (h < 1 || k < 1) throw Error(ErrorCode::InvalidArgument, "grid size and channel count must be positive");
    Network net;
    net.name = "mlp";
    net.input_shape = {k, h, h};
    int width = h * h * k;
    for (int units : {32, 32, 64, 64, 256}) {
        net.add(std::make_unique<DenseLayer>(width, units, Activation::Tanh));
        width = units;
    }
    net.add(std::make_unique<DenseLayer>(width, 1, Activation::Identity));
    net.initialize(seed);
    return net;
}

void Adam::step(Network& net, double gradient_scale) {
    auto params = net.parameters();
    auto grads = net.gradients();
    if (state.m.size() != params.size()) {
        state.m.clear();
        state.v.clear();
        for (auto p : params) {
            state.m.emplace_back(p.size(), 0.0);
            state.v.emplace_back(p.size(), 0.0);
        }
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto& m = state.m[b];
        auto& v = state.v[b];
        for (std::size_t i = 0; i < params[b].size(); ++i) {
            const double g = grads[b][i] * gradient_scale;
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            params[b][i] -= learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.epsilon);
        }
    }
}

TrainResult train(Network& net, std::span<const TrainingExample> data, const TrainConfig& config) {
    if (data.empty()) throw Error(ErrorCode::InvalidArgument, "training set is empty");
    if (config.batch_size < 1 || config.epochs < 0) throw Error(ErrorCode::InvalidArgument, "bad batch size or epoch count");
    const auto start = std::chrono::steady_clock::now();
    TrainResult result;
    Adam adam(config.learning_rate);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    Tensor3 grad(1, 1, 1);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(std::span<std::size_t>(order));
        double loss_sum = 0.0, sq_sum = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
            net.zero_gradients();
            for (std::size_t b = begin; b < end; ++b) {
                const auto& ex = data[order[b]];
                const double out = net.predict_scaled(*ex.input);
                const double e = out - ex.target;
                if (!std::isfinite(e)) {
                    std::ostringstream msg;
                    msg << "epoch " << epoch << ", sample " << order[b] << ": prediction " << out << " for target "
                        << ex.target;
                    throw Error(ErrorCode::NonFiniteLoss, msg.str());
                }
                loss_sum += 0.5 * e * e;
                sq_sum += e * e;
                grad.data[0] = e;
                net.backward(grad);
            }
            adam.step(net, 1.0 / static_cast<double>(end - begin));
        }
        const double n = static_cast<double>(data.size());
        result.trace.push_back({epoch, loss_sum / n, sq_sum / n});
        if (config.verbose && (epoch % 10 == 0 || epoch == 1))
            log::info(net.name + " epoch " + std::to_string(epoch) + " mse " + text::format_double(sq_sum / n));
        if (config.stop_below_mse > 0.0 && sq_sum / n < config.stop_below_mse) {
            result.stopped_early = true;
            break;
        }
    }
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

double evaluate_mse(Network& net, std::span<const TrainingExample> data) {
    if (data.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& ex : data) {
        const double e = net.predict_scaled(*ex.input) - ex.target;
        sum += e * e;
    }
    return sum / static_cast<double>(data.size());
}

void write_loss_csv(const std::filesystem::path& path, const TrainResult& result) {
    std::ostringstream out;
    out << "epoch,loss,mse\n";
    for (const auto& r : result.trace)
        out << r.epoch << ',' << text::format_double(r.loss) << ',' << text::format_double(r.mse) << '\n';
    text::write_file(path, out.str());
}

}  // namespace nadir::nn
