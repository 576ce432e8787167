#include <cmath>

#include "nadir/error.hpp"
#include "nadir/network.hpp"

namespace nadir::network {

ComplexMatrix admittance_matrix(const PowerNetwork& net) {
    const auto n = static_cast<Eigen::Index>(net.bus_count());
    ComplexMatrix y = ComplexMatrix::Zero(n, n);
    for (const auto& br : net.branches) {
        const Complex series = 1.0 / br.series_impedance;
        const Complex half_charging(0.0, br.shunt_susceptance / 2.0);
        const double t = br.tap_ratio;
        y(br.from, br.from) += (series + half_charging) / (t * t);
        y(br.to, br.to) += series + half_charging;
        y(br.from, br.to) -= series / t;
        y(br.to, br.from) -= series / t;
    }
    for (const auto& bus : net.buses) y(bus.id, bus.id) += Complex(bus.shunt_g, bus.shunt_b);
    return y;
}

std::vector<Complex> bus_injections(const ComplexMatrix& y, const std::vector<double>& vm,
                                    const std::vector<double>& va) {
    const auto n = y.rows();
    Eigen::VectorXcd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = std::polar(vm[static_cast<std::size_t>(i)], va[static_cast<std::size_t>(i)]);
    const Eigen::VectorXcd current = y * v;
    std::vector<Complex> s(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = v(i) * std::conj(current(i));
    return s;
}

NetworkMatrices invert_admittance(ComplexMatrix y) {
    const auto n = y.rows();
    if (n == 0 || y.cols() != n) throw Error(ErrorCode::InvalidArgument, "admittance matrix must be square and non-empty");
    Eigen::FullPivLU<ComplexMatrix> lu(y);
    if (!lu.isInvertible())
        throw Error(ErrorCode::SingularMatrix, "admittance matrix is singular (no path to ground?)");
    NetworkMatrices out;
    out.z = lu.inverse();
    out.residual = (y * out.z - ComplexMatrix::Identity(n, n)).cwiseAbs().maxCoeff();
    if (!(out.residual < 1e-8))
        throw Error(ErrorCode::SingularMatrix, "admittance matrix is numerically singular, residual " +
                                                   std::to_string(out.residual));
    out.y = std::move(y);
    return out;
}

namespace {

ComplexMatrix grounded_admittance(const PowerNetwork& net, const std::vector<double>& load_p,
                                  const std::vector<double>& load_q, const std::vector<double>& vm,
                                  const std::vector<bool>& in_service) {
    ComplexMatrix y = admittance_matrix(net);
    for (std::size_t b = 0; b < net.bus_count(); ++b) {
        const double v2 = vm[b] * vm[b];
        y(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(b)) += Complex(load_p[b], -load_q[b]) / v2;
    }
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        if (!in_service[g]) continue;
        const auto& gen = net.generators[g];
        y(gen.bus, gen.bus) += 1.0 / Complex(0.0, gen.transient_reactance);
    }
    return y;
}

}  // namespace

NetworkMatrices build_matrices(const PowerNetwork& net, const PowerFlowSolution& solution) {
    const auto& op = solution.operating_point;
    return invert_admittance(grounded_admittance(net, op.load_p, op.load_q, solution.vm, op.gen_in_service));
}

NetworkMatrices build_matrices(const PowerNetwork& net) {
    net.validate();
    std::vector<double> load_p, load_q, vm;
    for (const auto& bus : net.buses) {
        load_p.push_back(bus.load_p);
        load_q.push_back(bus.load_q);
        vm.push_back(bus.voltage_setpoint);
    }
    return invert_admittance(
        grounded_admittance(net, load_p, load_q, vm, std::vector<bool>(net.generators.size(), true)));
}

RealMatrix electrical_distance(const ComplexMatrix& z) {
    const auto n = z.rows();
    if (z.cols() != n) throw Error(ErrorCode::InvalidArgument, "impedance matrix must be square");
    if (!z.allFinite()) throw Error(ErrorCode::InvalidArgument, "impedance matrix has non-finite entries");
    RealMatrix d = RealMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double value = std::abs(z(i, i) + z(j, j) - z(i, j) - z(j, i));
            d(i, j) = value;
            d(j, i) = value;
        }
    }
    return d;
}

ComplexMatrix kron_reduce(const ComplexMatrix& y, const std::vector<int>& keep) {
    const auto n = y.rows();
    std::vector<bool> kept(static_cast<std::size_t>(n), false);
    for (int k : keep) {
        if (k < 0 || k >= n) throw Error(ErrorCode::UnknownNode, "kron_reduce index " + std::to_string(k));
        if (kept[static_cast<std::size_t>(k)]) throw Error(ErrorCode::InvalidArgument, "duplicate kept index");
        kept[static_cast<std::size_t>(k)] = true;
    }
    std::vector<int> eliminated;
    for (int i = 0; i < n; ++i)
        if (!kept[static_cast<std::size_t>(i)]) eliminated.push_back(i);

    const auto nk = static_cast<Eigen::Index>(keep.size());
    const auto ne = static_cast<Eigen::Index>(eliminated.size());
    ComplexMatrix ykk(nk, nk), yke(nk, ne), yek(ne, nk), yee(ne, ne);
    for (Eigen::Index a = 0; a < nk; ++a) {
        for (Eigen::Index b = 0; b < nk; ++b) ykk(a, b) = y(keep[a], keep[b]);
        for (Eigen::Index b = 0; b < ne; ++b) yke(a, b) = y(keep[a], eliminated[b]);
    }
    for (Eigen::Index a = 0; a < ne; ++a) {
        for (Eigen::Index b = 0; b < nk; ++b) yek(a, b) = y(eliminated[a], keep[b]);
        for (Eigen::Index b = 0; b < ne; ++b) yee(a, b) = y(eliminated[a], eliminated[b]);
    }
    if (ne == 0) return ykk;
    Eigen::FullPivLU<ComplexMatrix> lu(yee);
    if (!lu.isInvertible()) throw Error(ErrorCode::SingularMatrix, "eliminated block of Kron reduction is singular");
    return ykk - yke * lu.solve(yek);
}

}  // namespace nadir::network
