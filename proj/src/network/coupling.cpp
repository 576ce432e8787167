#include <cmath>
#include <numeric>

#include "nadir/error.hpp"
#include "nadir/log.hpp"
#include "nadir/network.hpp"

namespace nadir::network {

ReducedNetwork reduce_to_internal_nodes(const PowerNetwork& net, const PowerFlowSolution& sol,
                                        const std::vector<int>& extra_buses, int excluded_generator) {
    const auto& op = sol.operating_point;
    const int n = static_cast<int>(net.bus_count());
    for (int b : extra_buses)
        if (b < 0 || b >= n) throw Error(ErrorCode::UnknownNode, "bus index " + std::to_string(b));

    ReducedNetwork out;
    out.extra_buses = extra_buses;
    for (std::size_t g = 0; g < net.generators.size(); ++g)
        if (op.gen_in_service[g] && static_cast<int>(g) != excluded_generator) out.generators.push_back(static_cast<int>(g));
    if (out.generators.empty()) throw Error(ErrorCode::InvalidArgument, "no machine left to reduce onto");

    const int m = static_cast<int>(out.generators.size());
    ComplexMatrix y = ComplexMatrix::Zero(n + m, n + m);
    y.topLeftCorner(n, n) = admittance_matrix(net);
    for (int b = 0; b < n; ++b) {
        const double v2 = sol.vm[static_cast<std::size_t>(b)] * sol.vm[static_cast<std::size_t>(b)];
        y(b, b) += Complex(op.load_p[static_cast<std::size_t>(b)], -op.load_q[static_cast<std::size_t>(b)]) / v2;
    }
    std::vector<int> keep;
    for (int i = 0; i < m; ++i) {
        const auto g = static_cast<std::size_t>(out.generators[static_cast<std::size_t>(i)]);
        const auto& gen = net.generators[g];
        const Complex link = 1.0 / Complex(0.0, gen.transient_reactance);
        const int node = n + i;
        y(node, node) += link;
        y(gen.bus, gen.bus) += link;
        y(node, gen.bus) -= link;
        y(gen.bus, node) -= link;
        keep.push_back(node);

        const Complex vt = std::polar(sol.vm[static_cast<std::size_t>(gen.bus)], sol.va[static_cast<std::size_t>(gen.bus)]);
        const Complex current = std::conj(Complex(sol.gen_p[g], sol.gen_q[g]) / vt);
        out.emf.push_back(vt + Complex(0.0, gen.transient_reactance) * current);
    }
    for (int b : extra_buses) keep.push_back(b);
    out.y = kron_reduce(y, keep);
    return out;
}

double sync_coefficient(double v_i, double v_k, double b_ik, double g_ik, double delta_ik) {
    return v_i * v_k * (b_ik * std::cos(delta_ik) - g_ik * std::sin(delta_ik));
}

SyncCoefficients sync_coefficients(const PowerNetwork& net, const PowerFlowSolution& sol, int disturbance_bus,
                                   int excluded_generator) {
    if (disturbance_bus < 0 || disturbance_bus >= static_cast<int>(net.bus_count()))
        throw Error(ErrorCode::UnknownNode, "disturbance bus index " + std::to_string(disturbance_bus));
    const ReducedNetwork reduced = reduce_to_internal_nodes(net, sol, {disturbance_bus}, excluded_generator);
    const auto m = static_cast<Eigen::Index>(reduced.generators.size());

    SyncCoefficients out;
    out.disturbance_bus = disturbance_bus;
    out.generators = reduced.generators;
    out.v_disturbance = sol.vm[static_cast<std::size_t>(disturbance_bus)];
    const double theta_k = sol.va[static_cast<std::size_t>(disturbance_bus)];
    for (Eigen::Index i = 0; i < m; ++i) {
        const Complex transfer = reduced.y(i, m);
        const Complex emf = reduced.emf[static_cast<std::size_t>(i)];
        const double delta = std::arg(emf) - theta_k;
        out.v_machine.push_back(std::abs(emf));
        out.delta.push_back(delta);
        out.g.push_back(transfer.real());
        out.b.push_back(transfer.imag());
        out.coefficient.push_back(sync_coefficient(std::abs(emf), out.v_disturbance, transfer.imag(), transfer.real(), delta));
        out.inertia_h.push_back(net.generators[static_cast<std::size_t>(reduced.generators[static_cast<std::size_t>(i)])].inertia_h);
    }
    return out;
}

std::vector<double> distribute_unbalanced_power(const SyncCoefficients& coeffs, double delta_p) {
    const std::size_t m = coeffs.coefficient.size();
    if (m == 0) throw Error(ErrorCode::InvalidArgument, "no generator to distribute unbalanced power to");

    std::vector<double> weights = coeffs.coefficient;
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0) || !std::isfinite(total)) {
        log::warn(std::string(to_string(ErrorCode::DegenerateCoefficients)) +
                  ": synchronizing coefficients sum to " + std::to_string(total) + ", using inertia weights");
        if (coeffs.inertia_h.size() != m)
            throw Error(ErrorCode::DegenerateCoefficients, "no inertia weights available for fallback");
        weights = coeffs.inertia_h;
        total = std::accumulate(weights.begin(), weights.end(), 0.0);
    }

    std::vector<double> shares(m);
    std::size_t largest = 0;
    for (std::size_t i = 0; i < m; ++i) {
        shares[i] = weights[i] / total * delta_p;
        if (std::abs(shares[i]) > std::abs(shares[largest])) largest = i;
    }
    const double assigned = std::accumulate(shares.begin(), shares.end(), 0.0);
    shares[largest] += delta_p - assigned;
    return shares;
}

RealMatrix synchronizing_matrix(const ReducedNetwork& reduced) {
    if (!reduced.extra_buses.empty())
        throw Error(ErrorCode::InvalidArgument, "synchronizing matrix expects a reduction onto machines only");
    const auto m = static_cast<Eigen::Index>(reduced.generators.size());
    RealMatrix k = RealMatrix::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            if (i == j) continue;
            const Complex ei = reduced.emf[static_cast<std::size_t>(i)];
            const Complex ej = reduced.emf[static_cast<std::size_t>(j)];
            const Complex yij = reduced.y(i, j);
            k(i, j) = sync_coefficient(std::abs(ei), std::abs(ej), yij.imag(), yij.real(), std::arg(ei) - std::arg(ej));
        }
    }
    const RealMatrix sym = 0.5 * (k + k.transpose());
    RealMatrix laplacian = -sym;
    for (Eigen::Index i = 0; i < m; ++i) laplacian(i, i) = sym.row(i).sum();
    return laplacian;
}

}  // namespace nadir::network
