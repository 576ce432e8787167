#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "nadir/error.hpp"
#include "nadir/nn.hpp"

namespace nadir::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMatrix>;
using ConstMapRow = Eigen::Map<const RowMatrix>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using ConstMapVec = Eigen::Map<const Eigen::VectorXd>;

void shape_error(const std::string& layer, const std::string& detail) {
    throw Error(ErrorCode::ShapeMismatch, layer + ": " + detail);
}

std::string shape_text(const Shape& s) {
    return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
}

void glorot(std::vector<double>& w, double fan_in, double fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& x : w) x = rng.uniform(-limit, limit);
}

}  // namespace

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::ReLU: return "relu";
        case Activation::Tanh: return "tanh";
    }
    return "identity";
}

double activate(Activation a, double z) {
    switch (a) {
        case Activation::ReLU: return z > 0.0 ? z : 0.0;
        case Activation::Tanh: return std::tanh(z);
        case Activation::Identity: break;
    }
    return z;
}

double activation_slope(Activation a, double y) {
    switch (a) {
        case Activation::ReLU: return y > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: return 1.0 - y * y;
        case Activation::Identity: break;
    }
    return 1.0;
}

Shape shape_of(const Tensor3& t) { return {t.channels, t.height, t.width}; }

void Layer::zero_gradients() {
    for (auto g : gradients()) std::fill(g.begin(), g.end(), 0.0);
}

std::size_t Layer::parameter_count() {
    std::size_t n = 0;
    for (auto p : parameters()) n += p.size();
    return n;
}

// ---------------------------------------------------------------- convolution

ConvLayer::ConvLayer(int in_c, int out_c, int k, int s, Activation act)
    : in_channels(in_c), out_channels(out_c), kernel(k), stride(s), activation(act) {
    if (in_c < 1 || out_c < 1 || k < 1 || s < 1) shape_error("conv", "channels, kernel and stride must be positive");
    const std::size_t n = static_cast<std::size_t>(out_c) * in_c * k * k;
    weights.assign(n, 0.0);
    grad_weights.assign(n, 0.0);
    bias.assign(static_cast<std::size_t>(out_c), 0.0);
    grad_bias.assign(static_cast<std::size_t>(out_c), 0.0);
}

std::string ConvLayer::describe() const {
    std::ostringstream s;
    s << "conv " << kernel << "x" << kernel << "/" << stride << " " << in_channels << "->" << out_channels << " "
      << to_string(activation);
    return s.str();
}

Shape ConvLayer::output_shape(const Shape& in) const {
    if (in.channels != in_channels)
        shape_error("conv", "expects " + std::to_string(in_channels) + " channels, got " + shape_text(in));
    if (in.height < kernel || in.width < kernel)
        shape_error("conv", std::to_string(kernel) + "x" + std::to_string(kernel) + " kernel larger than " + shape_text(in));
    return {out_channels, (in.height - kernel) / stride + 1, (in.width - kernel) / stride + 1};
}

void ConvLayer::initialize(Rng& rng) {
    glorot(weights, static_cast<double>(in_channels) * kernel * kernel,
           static_cast<double>(out_channels) * kernel * kernel, rng);
    std::fill(bias.begin(), bias.end(), 0.0);
}

void ConvLayer::im2col(const Tensor3& in, int oh, int ow) {
    const int kk = kernel * kernel;
    const std::size_t q = static_cast<std::size_t>(oh) * ow;
    columns_.resize(static_cast<std::size_t>(in_channels) * kk * q);
    for (int c = 0; c < in_channels; ++c)
        for (int kr = 0; kr < kernel; ++kr)
            for (int kc = 0; kc < kernel; ++kc) {
                double* row = columns_.data() + (static_cast<std::size_t>(c) * kk + kr * kernel + kc) * q;
                for (int r = 0; r < oh; ++r) {
                    const double* src = in.data.data() + in.index(c, r * stride + kr, kc);
                    for (int col = 0; col < ow; ++col) row[r * ow + col] = src[col * stride];
                }
            }
}

void ConvLayer::forward(const Tensor3& in, Tensor3& out) {
    const Shape os = output_shape(shape_of(in));
    input_ = in;
    out = Tensor3(os.channels, os.height, os.width);
    const std::size_t q = static_cast<std::size_t>(os.height) * os.width;
    const std::size_t p = static_cast<std::size_t>(in_channels) * kernel * kernel;

    nonzero_.clear();
    for (std::size_t i = 0; i < in.data.size(); ++i)
        if (in.data[i] != 0.0) nonzero_.push_back(i);
    sparse_ = static_cast<double>(nonzero_.size()) <= sparse_threshold * static_cast<double>(in.data.size());

    for (int o = 0; o < out_channels; ++o)
        std::fill_n(out.data.begin() + static_cast<std::ptrdiff_t>(o * q), q, bias[static_cast<std::size_t>(o)]);

    if (sparse_) {
        // Each nonzero input scatters into the outputs whose window covers it.
        const std::size_t plane = static_cast<std::size_t>(in.height) * in.width;
        for (std::size_t idx : nonzero_) {
            const int c = static_cast<int>(idx / plane);
            const int y = static_cast<int>((idx % plane) / in.width);
            const int x = static_cast<int>(idx % in.width);
            const double v = in.data[idx];
            for (int kr = 0; kr < kernel; ++kr) {
                const int ry = y - kr;
                if (ry < 0 || ry % stride) continue;
                const int r = ry / stride;
                if (r >= os.height) continue;
                for (int kc = 0; kc < kernel; ++kc) {
                    const int cx = x - kc;
                    if (cx < 0 || cx % stride) continue;
                    const int col = cx / stride;
                    if (col >= os.width) continue;
                    const std::size_t w_off = (static_cast<std::size_t>(c) * kernel + kr) * kernel + kc;
                    const std::size_t o_off = static_cast<std::size_t>(r) * os.width + col;
                    for (int o = 0; o < out_channels; ++o)
                        out.data[o * q + o_off] += weights[o * p + w_off] * v;
                }
            }
        }
    } else {
        im2col(in, os.height, os.width);
        ConstMapRow w(weights.data(), out_channels, static_cast<Eigen::Index>(p));
        ConstMapRow cols(columns_.data(), static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
        MapRow z(out.data.data(), out_channels, static_cast<Eigen::Index>(q));
        z.noalias() += w * cols;
    }
    for (double& v : out.data) v = activate(activation, v);
    output_ = out;
}

void ConvLayer::backward(const Tensor3& grad_out, Tensor3& grad_in, bool need_input_gradient) {
    const Shape os = shape_of(output_);
    if (shape_of(grad_out) != os) shape_error("conv backward", "gradient shape " + shape_text(shape_of(grad_out)));
    const std::size_t q = static_cast<std::size_t>(os.height) * os.width;
    const std::size_t p = static_cast<std::size_t>(in_channels) * kernel * kernel;

    std::vector<double> gz(grad_out.data.size());
    for (std::size_t i = 0; i < gz.size(); ++i) gz[i] = grad_out.data[i] * activation_slope(activation, output_.data[i]);
    for (int o = 0; o < out_channels; ++o) {
        double s = 0.0;
        for (std::size_t i = 0; i < q; ++i) s += gz[o * q + i];
        grad_bias[static_cast<std::size_t>(o)] += s;
    }

    ConstMapRow g(gz.data(), out_channels, static_cast<Eigen::Index>(q));
    if (sparse_) {
        const std::size_t plane = static_cast<std::size_t>(input_.height) * input_.width;
        for (std::size_t idx : nonzero_) {
            const int c = static_cast<int>(idx / plane);
            const int y = static_cast<int>((idx % plane) / input_.width);
            const int x = static_cast<int>(idx % input_.width);
            const double v = input_.data[idx];
            for (int kr = 0; kr < kernel; ++kr) {
                const int ry = y - kr;
                if (ry < 0 || ry % stride) continue;
                const int r = ry / stride;
                if (r >= os.height) continue;
                for (int kc = 0; kc < kernel; ++kc) {
                    const int cx = x - kc;
                    if (cx < 0 || cx % stride) continue;
                    const int col = cx / stride;
                    if (col >= os.width) continue;
                    const std::size_t w_off = (static_cast<std::size_t>(c) * kernel + kr) * kernel + kc;
                    const std::size_t o_off = static_cast<std::size_t>(r) * os.width + col;
                    for (int o = 0; o < out_channels; ++o) grad_weights[o * p + w_off] += gz[o * q + o_off] * v;
                }
            }
        }
    } else {
        ConstMapRow cols(columns_.data(), static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
        MapRow gw(grad_weights.data(), out_channels, static_cast<Eigen::Index>(p));
        gw.noalias() += g * cols.transpose();
    }

    if (!need_input_gradient) return;
    grad_in = Tensor3(input_.channels, input_.height, input_.width);
    ConstMapRow w(weights.data(), out_channels, static_cast<Eigen::Index>(p));
    RowMatrix dcols = w.transpose() * g;  // p × q
    const int kk = kernel * kernel;
    for (int c = 0; c < in_channels; ++c)
        for (int kr = 0; kr < kernel; ++kr)
            for (int kc = 0; kc < kernel; ++kc) {
                const double* row = dcols.data() + (static_cast<std::size_t>(c) * kk + kr * kernel + kc) * q;
                for (int r = 0; r < os.height; ++r) {
                    double* dst = grad_in.data.data() + grad_in.index(c, r * stride + kr, kc);
                    for (int col = 0; col < os.width; ++col) dst[col * stride] += row[r * os.width + col];
                }
            }
}

// ---------------------------------------------------------------- pooling

PoolLayer::PoolLayer(int w, int s, double b, double o, Activation act)
    : window(w), stride(s), beta(b), offset(o), activation(act) {
    if (w < 1 || s < 1) shape_error("pool", "window and stride must be positive");
}

std::string PoolLayer::describe() const {
    std::ostringstream s;
    s << "maxpool " << window << "x" << window << "/" << stride;
    if (beta != 1.0 || offset != 0.0 || activation != Activation::Identity)
        s << " beta=" << beta << " bias=" << offset << " " << to_string(activation);
    return s.str();
}

Shape PoolLayer::output_shape(const Shape& in) const {
    if (in.height < window || in.width < window)
        shape_error("pool", std::to_string(window) + "x" + std::to_string(window) + " window larger than " + shape_text(in));
    return {in.channels, (in.height - window) / stride + 1, (in.width - window) / stride + 1};
}

void PoolLayer::forward(const Tensor3& in, Tensor3& out) {
    const Shape os = output_shape(shape_of(in));
    in_shape_ = shape_of(in);
    out = Tensor3(os.channels, os.height, os.width);
    argmax_.assign(out.size(), 0);
    for (int c = 0; c < os.channels; ++c)
        for (int r = 0; r < os.height; ++r)
            for (int col = 0; col < os.width; ++col) {
                std::size_t best = in.index(c, r * stride, col * stride);
                // Strict comparison keeps the first maximum in row-major order.
                for (int wr = 0; wr < window; ++wr)
                    for (int wc = 0; wc < window; ++wc) {
                        const std::size_t i = in.index(c, r * stride + wr, col * stride + wc);
                        if (in.data[i] > in.data[best]) best = i;
                    }
                const std::size_t o = out.index(c, r, col);
                argmax_[o] = best;
                out.data[o] = activate(activation, beta * in.data[best] + offset);
            }
    output_ = out;
}

void PoolLayer::backward(const Tensor3& grad_out, Tensor3& grad_in, bool need_input_gradient) {
    if (grad_out.size() != output_.size()) shape_error("pool backward", "gradient shape " + shape_text(shape_of(grad_out)));
    if (!need_input_gradient) return;
    grad_in = Tensor3(in_shape_.channels, in_shape_.height, in_shape_.width);
    for (std::size_t o = 0; o < grad_out.size(); ++o)
        grad_in.data[argmax_[o]] += grad_out.data[o] * beta * activation_slope(activation, output_.data[o]);
}

// ---------------------------------------------------------------- dense

DenseLayer::DenseLayer(int in, int out, Activation act) : inputs(in), units(out), activation(act) {
    if (in < 1 || out < 1) shape_error("dense", "sizes must be positive");
    const std::size_t n = static_cast<std::size_t>(in) * out;
    weights.assign(n, 0.0);
    grad_weights.assign(n, 0.0);
    bias.assign(static_cast<std::size_t>(out), 0.0);
    grad_bias.assign(static_cast<std::size_t>(out), 0.0);
}

std::string DenseLayer::describe() const {
    return "dense " + std::to_string(inputs) + "->" + std::to_string(units) + " " + to_string(activation);
}

Shape DenseLayer::output_shape(const Shape& in) const {
    if (in.size() != static_cast<std::size_t>(inputs))
        shape_error("dense", "expects " + std::to_string(inputs) + " inputs, got " + shape_text(in));
    return {units, 1, 1};
}

void DenseLayer::initialize(Rng& rng) {
    glorot(weights, inputs, units, rng);
    std::fill(bias.begin(), bias.end(), 0.0);
}

void DenseLayer::forward(const Tensor3& in, Tensor3& out) {
    output_shape(shape_of(in));
    in_shape_ = shape_of(in);
    input_ = in.data;
    out = Tensor3(units, 1, 1);
    ConstMapRow w(weights.data(), units, inputs);
    MapVec z(out.data.data(), units);
    z = w * ConstMapVec(input_.data(), inputs) + ConstMapVec(bias.data(), units);
    for (double& v : out.data) v = activate(activation, v);
    output_ = out;
}

void DenseLayer::backward(const Tensor3& grad_out, Tensor3& grad_in, bool need_input_gradient) {
    if (grad_out.size() != static_cast<std::size_t>(units)) shape_error("dense backward", "gradient length");
    Eigen::VectorXd gz(units);
    for (int i = 0; i < units; ++i)
        gz(i) = grad_out.data[static_cast<std::size_t>(i)] * activation_slope(activation, output_.data[static_cast<std::size_t>(i)]);
    MapVec(grad_bias.data(), units) += gz;
    MapRow(grad_weights.data(), units, inputs).noalias() += gz * ConstMapVec(input_.data(), inputs).transpose();
    if (!need_input_gradient) return;
    grad_in = Tensor3(in_shape_.channels, in_shape_.height, in_shape_.width);
    MapVec(grad_in.data.data(), inputs).noalias() = ConstMapRow(weights.data(), units, inputs).transpose() * gz;
}

// ---------------------------------------------------------------- loss

LossValue mse_loss(std::span<const double> prediction, std::span<const double> target) {
    if (prediction.size() != target.size())
        throw Error(ErrorCode::ShapeMismatch, "prediction and target lengths differ");
    LossValue out;
    out.gradient.resize(prediction.size());
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        const double e = prediction[i] - target[i];
        out.gradient[i] = e;
        out.loss += 0.5 * e * e;
    }
    return out;
}

}  // namespace nadir::nn
