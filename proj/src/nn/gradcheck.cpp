#include <algorithm>
#include <cmath>

#include "nadir/error.hpp"
#include "nadir/nn.hpp"

namespace nadir::nn {

double relative_error(double analytic, double numeric) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    return scale == 0.0 ? 0.0 : std::abs(analytic - numeric) / scale;
}

double finite_difference_check(const std::function<double()>& loss, std::span<double> values,
                               std::span<const double> analytic, double epsilon, std::span<const std::size_t> probes) {
    if (values.size() != analytic.size()) throw Error(ErrorCode::ShapeMismatch, "gradient and values differ in length");
    double worst = 0.0;
    for (std::size_t i : probes) {
        const double keep = values[i];
        values[i] = keep + epsilon;
        const double up = loss();
        values[i] = keep - epsilon;
        const double down = loss();
        values[i] = keep;
        worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * epsilon)));
    }
    return worst;
}

namespace {

std::vector<std::size_t> pick(std::size_t n, int count, Rng& rng) {
    std::vector<std::size_t> out;
    if (count <= 0 || static_cast<std::size_t>(count) >= n) {
        for (std::size_t i = 0; i < n; ++i) out.push_back(i);
        return out;
    }
    for (int i = 0; i < count; ++i) out.push_back(static_cast<std::size_t>(rng.below(n)));
    return out;
}

}  // namespace

GradientCheckReport gradient_check(Network& net, const Tensor3& input, std::span<const double> target,
                                   const GradientCheckOptions& options) {
    GradientCheckReport report;
    Rng rng(options.seed);
    const auto loss = [&] {
        const Tensor3& out = net.forward(input);
        return mse_loss(out.data, target).loss;
    };

    net.zero_gradients();
    const Tensor3& out = net.forward(input);
    const auto value = mse_loss(out.data, target);
    Tensor3 grad(shape_of(out).channels, shape_of(out).height, shape_of(out).width);
    grad.data = value.gradient;
    const Tensor3 input_grad = net.backward(grad, options.check_input);

    auto params = net.parameters();
    auto grads = net.gradients();
    for (std::size_t b = 0; b < params.size(); ++b) {
        const std::vector<double> analytic(grads[b].begin(), grads[b].end());
        const auto probes = pick(params[b].size(), options.samples_per_block, rng);
        report.probed += probes.size();
        report.max_relative_error = std::max(
            report.max_relative_error, finite_difference_check(loss, params[b], analytic, options.epsilon, probes));
    }
    if (options.check_input) {
        Tensor3 x = input;
        const auto input_loss = [&] {
            const Tensor3& o = net.forward(x);
            return mse_loss(o.data, target).loss;
        };
        const auto probes = pick(x.size(), options.samples_per_block, rng);
        report.probed += probes.size();
        report.max_input_relative_error =
            finite_difference_check(input_loss, x.data, input_grad.data, options.epsilon, probes);
    }
    return report;
}

}  // namespace nadir::nn
