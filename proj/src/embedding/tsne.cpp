#include <algorithm>
#include <cmath>
#include <limits>

#include "nadir/embedding.hpp"
#include "nadir/error.hpp"
#include "nadir/log.hpp"
#include "nadir/rng.hpp"

namespace nadir::embedding {

namespace {

RealMatrix squared_distances(const RealMatrix& points) {
    const auto n = points.rows();
    RealMatrix d = RealMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double value = (points.row(i) - points.row(j)).squaredNorm();
            d(i, j) = value;
            d(j, i) = value;
        }
    return d;
}

/// Row i of p_{·|i} for precision beta = 1 / (2σ²); returns entropy in nats.
double conditional_row(const RealMatrix& d2, Eigen::Index i, double beta, double shift, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row) {
    const auto n = d2.cols();
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        row(j) = j == i ? 0.0 : std::exp(-beta * (d2(i, j) - shift));
        total += row(j);
    }
    double weighted = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        row(j) /= total;
        if (j != i) weighted += row(j) * (d2(i, j) - shift);
    }
    return std::log(total) + beta * weighted;
}

}  // namespace

Affinities input_affinities(const RealMatrix& points, double perplexity, int max_search_iterations) {
    const auto n = points.rows();
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "affinities need at least two points");
    if (!points.allFinite()) throw Error(ErrorCode::InvalidArgument, "points contain non-finite values");
    if (!(perplexity > 1.0) || perplexity > static_cast<double>(n - 1))
        throw Error(ErrorCode::PerplexityOutOfRange, "perplexity " + std::to_string(perplexity) + " outside (1, " +
                                                         std::to_string(n - 1) + "]");

    const RealMatrix d2 = squared_distances(points);
    const double target = std::log(perplexity);

    Affinities out;
    out.conditional = RealMatrix::Zero(n, n);
    out.sigma.assign(static_cast<std::size_t>(n), 0.0);
    out.perplexity.assign(static_cast<std::size_t>(n), 0.0);

    for (Eigen::Index i = 0; i < n; ++i) {
        double lo_d = std::numeric_limits<double>::infinity(), hi_d = 0.0, mean_d = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            lo_d = std::min(lo_d, d2(i, j));
            hi_d = std::max(hi_d, d2(i, j));
            mean_d += d2(i, j);
        }
        mean_d /= static_cast<double>(n - 1);
        auto row = out.conditional.row(i);

        if (hi_d - lo_d <= 1e-12 * std::max(hi_d, 1e-300)) {
            // Every neighbour is equidistant: the kernel is uniform for any bandwidth.
            for (Eigen::Index j = 0; j < n; ++j) row(j) = j == i ? 0.0 : 1.0 / static_cast<double>(n - 1);
            out.perplexity[static_cast<std::size_t>(i)] = static_cast<double>(n - 1);
            out.sigma[static_cast<std::size_t>(i)] = std::numeric_limits<double>::infinity();
            out.degenerate_rows.push_back(static_cast<int>(i));
            log::warn("DegenerateDistances: point " + std::to_string(i) + " is equidistant from all others, using a uniform row");
            continue;
        }

        double beta = 1.0 / std::max(mean_d - lo_d, 1e-300);
        double beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
        double entropy = conditional_row(d2, i, beta, lo_d, row);
        for (int it = 0; it < max_search_iterations; ++it) {
            const double diff = entropy - target;
            if (std::abs(diff) < 1e-12) break;
            if (diff > 0.0) {
                beta_lo = beta;
                beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta + beta_hi);
            } else {
                beta_hi = beta;
                beta = 0.5 * (beta + beta_lo);
            }
            entropy = conditional_row(d2, i, beta, lo_d, row);
        }
        out.perplexity[static_cast<std::size_t>(i)] = std::exp(entropy);
        out.sigma[static_cast<std::size_t>(i)] = std::sqrt(1.0 / (2.0 * beta));
    }

    out.joint = (out.conditional + out.conditional.transpose()) / (2.0 * static_cast<double>(n));
    return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw Error(ErrorCode::ShapeMismatch, "distributions differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) total += p[i] * std::log(p[i] / q[i]);
    return total;
}

RealMatrix output_affinities(const RealMatrix& y) {
    const auto n = y.rows();
    RealMatrix q = RealMatrix::Zero(n, n);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double kernel = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
            q(i, j) = kernel;
            q(j, i) = kernel;
            total += 2.0 * kernel;
        }
    return q / total;
}

namespace {

/// Gradient 4 Σ_j (p_ij − q_ij)(y_i − y_j)(1 + ‖y_i − y_j‖²)⁻¹ with P scaled by `p_scale`.
RealMatrix kl_gradient(const RealMatrix& joint, const RealMatrix& y, double p_scale, RealMatrix* q_out) {
    const auto n = y.rows();
    RealMatrix kernel(n, n);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        kernel(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double k = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
            kernel(i, j) = k;
            kernel(j, i) = k;
            total += 2.0 * k;
        }
    }
    RealMatrix grad = RealMatrix::Zero(n, y.cols());
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const double q = kernel(i, j) / total;
            grad.row(i) += 4.0 * (p_scale * joint(i, j) - q) * kernel(i, j) * (y.row(i) - y.row(j));
        }
    if (q_out) *q_out = kernel / total;
    return grad;
}

double kl_cost(const RealMatrix& joint, const RealMatrix& q) {
    return kl_divergence(std::span<const double>(joint.data(), static_cast<std::size_t>(joint.size())),
                         std::span<const double>(q.data(), static_cast<std::size_t>(q.size())));
}

}  // namespace

KlResult kl_objective(const RealMatrix& joint, const RealMatrix& y) {
    if (joint.rows() != y.rows() || joint.cols() != y.rows())
        throw Error(ErrorCode::ShapeMismatch, "affinity matrix does not match the number of points");
    KlResult out;
    RealMatrix q;
    out.gradient = kl_gradient(joint, y, 1.0, &q);
    out.cost = kl_cost(joint, q);
    return out;
}

Embedding run_tsne(const RealMatrix& points, const TsneConfig& config) {
    Embedding out;
    out.seed = config.seed;
    const auto n = points.rows();
    if (n == 1) {
        out.y = RealMatrix::Zero(1, 2);
        return out;
    }

    const Affinities affinities = input_affinities(points, config.perplexity, config.max_search_iterations);
    const RealMatrix& p = affinities.joint;

    Rng rng(config.seed);
    RealMatrix y(n, 2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < 2; ++c) y(i, c) = rng.normal(0.0, config.init_stddev);

    RealMatrix update = RealMatrix::Zero(n, 2);
    RealMatrix gains = RealMatrix::Ones(n, 2);
    RealMatrix q;

    out.initial_kl = kl_cost(p, output_affinities(y));
    out.trace.push_back({0, out.initial_kl});

    for (int iter = 0; iter < config.iterations; ++iter) {
        const double scale = iter < config.exaggeration_iterations ? config.exaggeration : 1.0;
        const RealMatrix grad = kl_gradient(p, y, scale, nullptr);
        const double momentum =
            iter < config.momentum_switch_iteration ? config.initial_momentum : config.final_momentum;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index c = 0; c < 2; ++c) {
                if (config.adaptive_gains) {
                    const bool same_sign = (grad(i, c) > 0.0) == (update(i, c) > 0.0);
                    gains(i, c) = same_sign ? std::max(gains(i, c) * 0.8, 0.01) : gains(i, c) + 0.2;
                }
                update(i, c) = momentum * update(i, c) - config.learning_rate * gains(i, c) * grad(i, c);
                y(i, c) += update(i, c);
            }
        const Eigen::RowVector2d mean = y.colwise().mean();
        y.rowwise() -= mean;
        if (!y.allFinite()) throw Error(ErrorCode::NumericalDivergence, "t-SNE coordinates diverged");
        if ((iter + 1) % 50 == 0 || iter + 1 == config.iterations)
            out.trace.push_back({iter + 1, kl_cost(p, output_affinities(y))});
    }

    out.y = y;
    out.iterations = config.iterations;
    out.kl = out.trace.back().cost;
    return out;
}

}  // namespace nadir::embedding
