#include <algorithm>
#include <cmath>
#include <numeric>

#include "nadir/error.hpp"
#include "nadir/log.hpp"
#include "nadir/network.hpp"

namespace nadir::network {

double PowerFlowSolution::total_generation() const {
    double total = 0.0;
    for (std::size_t g = 0; g < gen_p.size(); ++g)
        if (operating_point.gen_in_service[g]) total += gen_p[g];
    return total;
}

OperatingPoint scaled_operating_point(const PowerNetwork& net, double load_scale) {
    if (!(load_scale > 0.0 && load_scale <= 1.5))
        throw Error(ErrorCode::InvalidArgument, "load scale must lie in (0, 1.5]");
    OperatingPoint op;
    op.load_scale = load_scale;
    for (const auto& bus : net.buses) {
        op.load_p.push_back(bus.load_p * load_scale);
        op.load_q.push_back(bus.load_q * load_scale);
    }
    for (const auto& gen : net.generators) op.gen_p.push_back(gen.p_mech * load_scale);
    op.gen_in_service.assign(net.generators.size(), true);
    for (const auto& ren : net.renewables) {
        op.renewable_p.push_back(ren.p * load_scale);
        op.renewable_q.push_back(ren.q * load_scale);
    }
    return op;
}

namespace {

void check_sizes(const PowerNetwork& net, const OperatingPoint& op) {
    if (op.load_p.size() != net.bus_count() || op.load_q.size() != net.bus_count() ||
        op.gen_p.size() != net.generators.size() || op.gen_in_service.size() != net.generators.size() ||
        op.renewable_p.size() != net.renewables.size() || op.renewable_q.size() != net.renewables.size())
        throw Error(ErrorCode::InvalidArgument, "operating point does not match the network dimensions");
}

/// Slack generator for this solve, or -1 when the slack bus carries no machines.
int choose_slack_generator(const PowerNetwork& net, const OperatingPoint& op, int& slack_bus) {
    slack_bus = net.slack_bus();
    bool has_any = false;
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        if (net.generators[g].bus != slack_bus) continue;
        has_any = true;
        if (op.gen_in_service[g]) return static_cast<int>(g);
    }
    if (!has_any) return -1;
    int best = -1;
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        if (!op.gen_in_service[g]) continue;
        if (best < 0 || net.generators[g].p_max > net.generators[static_cast<std::size_t>(best)].p_max)
            best = static_cast<int>(g);
    }
    if (best < 0) throw Error(ErrorCode::InfeasibleDispatch, "no generator in service");
    slack_bus = net.generators[static_cast<std::size_t>(best)].bus;
    return best;
}

}  // namespace

PowerFlowSolution solve_power_flow(const PowerNetwork& net, const OperatingPoint& op,
                                   const PowerFlowOptions& options) {
    check_sizes(net, op);
    const std::size_t n = net.bus_count();

    if (!net.generators.empty()) {
        double capacity = std::accumulate(op.renewable_p.begin(), op.renewable_p.end(), 0.0);
        for (std::size_t g = 0; g < net.generators.size(); ++g)
            if (op.gen_in_service[g]) capacity += net.generators[g].p_max;
        const double demand = std::accumulate(op.load_p.begin(), op.load_p.end(), 0.0);
        if (capacity < demand)
            throw Error(ErrorCode::InfeasibleDispatch, "generation capacity " + std::to_string(capacity) +
                                                           " pu below demand " + std::to_string(demand) + " pu");
    }

    int slack_bus = -1;
    const int slack_gen = choose_slack_generator(net, op, slack_bus);

    std::vector<BusKind> kind(n, BusKind::PQ);
    for (std::size_t g = 0; g < net.generators.size(); ++g)
        if (op.gen_in_service[g]) kind[static_cast<std::size_t>(net.generators[g].bus)] = BusKind::PV;
    for (const auto& bus : net.buses)
        if (bus.kind == BusKind::PV && kind[static_cast<std::size_t>(bus.id)] != BusKind::PV) {
            bool has_gen = false;
            for (const auto& gen : net.generators) has_gen |= gen.bus == bus.id;
            // PV buses without any machine in the file keep their voltage control.
            if (!has_gen) kind[static_cast<std::size_t>(bus.id)] = BusKind::PV;
        }
    kind[static_cast<std::size_t>(slack_bus)] = BusKind::Slack;

    std::vector<double> p_spec(n, 0.0), q_spec(n, 0.0);
    for (std::size_t b = 0; b < n; ++b) {
        p_spec[b] = -op.load_p[b];
        q_spec[b] = -op.load_q[b];
    }
    for (std::size_t g = 0; g < net.generators.size(); ++g)
        if (op.gen_in_service[g] && static_cast<int>(g) != slack_gen)
            p_spec[static_cast<std::size_t>(net.generators[g].bus)] += op.gen_p[g];
    for (std::size_t r = 0; r < net.renewables.size(); ++r) {
        p_spec[static_cast<std::size_t>(net.renewables[r].bus)] += op.renewable_p[r];
        q_spec[static_cast<std::size_t>(net.renewables[r].bus)] += op.renewable_q[r];
    }

    std::vector<int> pvpq, pq;
    for (std::size_t b = 0; b < n; ++b) {
        if (kind[b] != BusKind::Slack) pvpq.push_back(static_cast<int>(b));
        if (kind[b] == BusKind::PQ) pq.push_back(static_cast<int>(b));
    }

    const ComplexMatrix y = admittance_matrix(net);
    std::vector<double> vm(n, 1.0), va(n, 0.0);
    for (std::size_t b = 0; b < n; ++b)
        if (kind[b] != BusKind::PQ) vm[b] = net.buses[b].voltage_setpoint;

    const auto npv = static_cast<Eigen::Index>(pvpq.size());
    const auto npq = static_cast<Eigen::Index>(pq.size());
    auto mismatch = [&](const std::vector<Complex>& s, Eigen::VectorXd& f) {
        f.resize(npv + npq);
        for (Eigen::Index a = 0; a < npv; ++a) {
            const auto b = static_cast<std::size_t>(pvpq[static_cast<std::size_t>(a)]);
            f(a) = s[b].real() - p_spec[b];
        }
        for (Eigen::Index a = 0; a < npq; ++a) {
            const auto b = static_cast<std::size_t>(pq[static_cast<std::size_t>(a)]);
            f(npv + a) = s[b].imag() - q_spec[b];
        }
        return f.size() == 0 ? 0.0 : f.cwiseAbs().maxCoeff();
    };

    Eigen::VectorXd f;
    double norm = mismatch(bus_injections(y, vm, va), f);
    int iterations = 0;
    while (!(norm < options.tolerance)) {
        if (iterations >= options.max_iterations || !std::isfinite(norm))
            throw Error(ErrorCode::NoConvergence, "power flow did not converge after " + std::to_string(iterations) +
                                                      " iterations, mismatch " + std::to_string(norm));
        const auto nn = static_cast<Eigen::Index>(n);
        Eigen::VectorXcd v(nn), vnorm(nn);
        for (Eigen::Index i = 0; i < nn; ++i) {
            v(i) = std::polar(vm[static_cast<std::size_t>(i)], va[static_cast<std::size_t>(i)]);
            vnorm(i) = v(i) / vm[static_cast<std::size_t>(i)];
        }
        const Eigen::VectorXcd current = y * v;
        const ComplexMatrix ds_dva =
            Complex(0.0, 1.0) * v.asDiagonal() * (ComplexMatrix(current.asDiagonal()) - y * v.asDiagonal()).conjugate();
        const ComplexMatrix ds_dvm = v.asDiagonal() * (y * vnorm.asDiagonal()).conjugate() +
                                     ComplexMatrix(current.conjugate().asDiagonal()) * vnorm.asDiagonal();

        Eigen::MatrixXd jac(npv + npq, npv + npq);
        for (Eigen::Index r = 0; r < npv; ++r) {
            const int br = pvpq[static_cast<std::size_t>(r)];
            for (Eigen::Index c = 0; c < npv; ++c) jac(r, c) = ds_dva(br, pvpq[static_cast<std::size_t>(c)]).real();
            for (Eigen::Index c = 0; c < npq; ++c) jac(r, npv + c) = ds_dvm(br, pq[static_cast<std::size_t>(c)]).real();
        }
        for (Eigen::Index r = 0; r < npq; ++r) {
            const int br = pq[static_cast<std::size_t>(r)];
            for (Eigen::Index c = 0; c < npv; ++c) jac(npv + r, c) = ds_dva(br, pvpq[static_cast<std::size_t>(c)]).imag();
            for (Eigen::Index c = 0; c < npq; ++c) jac(npv + r, npv + c) = ds_dvm(br, pq[static_cast<std::size_t>(c)]).imag();
        }
        const Eigen::VectorXd dx = jac.partialPivLu().solve(-f);
        for (Eigen::Index a = 0; a < npv; ++a) va[static_cast<std::size_t>(pvpq[static_cast<std::size_t>(a)])] += dx(a);
        for (Eigen::Index a = 0; a < npq; ++a) vm[static_cast<std::size_t>(pq[static_cast<std::size_t>(a)])] += dx(npv + a);
        ++iterations;
        norm = mismatch(bus_injections(y, vm, va), f);
    }

    PowerFlowSolution sol;
    sol.operating_point = op;
    sol.mismatch_norm = norm;
    sol.iterations = iterations;
    sol.slack_generator = slack_gen;

    // Angles are always referenced to the network's slack bus.
    const int reference = net.slack_bus();
    const double shift = va[static_cast<std::size_t>(reference)];
    for (double& a : va) a -= shift;
    sol.reference_bus = reference;
    sol.vm = vm;
    sol.va = va;

    const auto s = bus_injections(y, vm, va);
    sol.gen_p.assign(net.generators.size(), 0.0);
    sol.gen_q.assign(net.generators.size(), 0.0);
    std::vector<int> machines_at(n, 0);
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        if (!op.gen_in_service[g]) continue;
        sol.gen_p[g] = op.gen_p[g];
        if (kind[static_cast<std::size_t>(net.generators[g].bus)] != BusKind::PQ)
            ++machines_at[static_cast<std::size_t>(net.generators[g].bus)];
    }
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        if (!op.gen_in_service[g]) continue;
        const auto b = static_cast<std::size_t>(net.generators[g].bus);
        if (machines_at[b] > 0) sol.gen_q[g] = (s[b].imag() - q_spec[b]) / machines_at[b];
    }
    if (slack_gen >= 0) {
        const auto b = static_cast<std::size_t>(slack_bus);
        sol.gen_p[static_cast<std::size_t>(slack_gen)] = s[b].real() - p_spec[b];
        const auto& gen = net.generators[static_cast<std::size_t>(slack_gen)];
        if (sol.gen_p[static_cast<std::size_t>(slack_gen)] > gen.p_max + 1e-9)
            log::debug("slack generator output " + std::to_string(sol.gen_p[static_cast<std::size_t>(slack_gen)]) +
                      " pu exceeds its rating " + std::to_string(gen.p_max) + " pu");
    }
    sol.operating_point.gen_p = sol.gen_p;
    return sol;
}

PowerFlowSolution solve_power_flow(const PowerNetwork& net, double load_scale, const PowerFlowOptions& options) {
    return solve_power_flow(net, scaled_operating_point(net, load_scale), options);
}

}  // namespace nadir::network
