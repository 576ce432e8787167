#include <algorithm>

#include "nadir/error.hpp"
#include "nadir/simulator.hpp"

namespace nadir::simulator {

const std::array<FeatureInfo, kFeatureCount>& feature_catalog() {
    static const std::array<FeatureInfo, kFeatureCount> catalog = {{
        {"pe_t0", FeatureSite::Generator},
        {"pe_tf", FeatureSite::Generator},
        {"pm_t0", FeatureSite::Generator},
        {"pm_tf", FeatureSite::Generator},
        {"reserve_t0", FeatureSite::Generator},
        {"reserve_tf", FeatureSite::Generator},
        {"vm_t0", FeatureSite::Bus},
        {"vm_tf", FeatureSite::Bus},
        {"va_t0", FeatureSite::Bus},
        {"va_tf", FeatureSite::Bus},
        {"load_t0", FeatureSite::Bus},
        {"load_tf", FeatureSite::Bus},
        {"shortage_tf", FeatureSite::Generator},
        {"response_tf", FeatureSite::Generator},
    }};
    return catalog;
}

int feature_index(const std::string& key) {
    const auto& cat = feature_catalog();
    for (std::size_t i = 0; i < cat.size(); ++i)
        if (key == cat[i].key) return static_cast<int>(i);
    return -1;
}

const std::vector<double>& SnapshotFeatures::get(const std::string& key) const {
    const int i = feature_index(key);
    if (i < 0) throw Error(ErrorCode::InvalidArgument, "unknown feature '" + key + "'");
    return values[static_cast<std::size_t>(i)];
}

std::vector<double> generator_response(const std::vector<double>& pm, const std::vector<double>& pe,
                                       const std::vector<double>& h, const std::vector<bool>& active) {
    if (pm.size() != pe.size() || pm.size() != h.size() || pm.size() != active.size())
        throw Error(ErrorCode::ShapeMismatch, "generator response inputs differ in length");
    double sum_pm = 0.0, sum_pe = 0.0, sum_h = 0.0;
    for (std::size_t i = 0; i < pm.size(); ++i)
        if (active[i]) {
            sum_pm += pm[i];
            sum_pe += pe[i];
            sum_h += h[i];
        }
    std::vector<double> f(pm.size(), 0.0);
    if (sum_h <= 0.0) return f;
    const double system = (sum_pm - sum_pe) / (2.0 * sum_h);
    for (std::size_t i = 0; i < pm.size(); ++i)
        if (active[i]) f[i] = (pm[i] - pe[i]) / (2.0 * h[i]) - system;
    return f;
}

namespace {

enum Slot : std::size_t {
    PeT0, PeTf, PmT0, PmTf, ReserveT0, ReserveTf, VmT0, VmTf, VaT0, VaTf, LoadT0, LoadTf, ShortageTf, ResponseTf
};

}  // namespace

SnapshotFeatures snapshot_features(const DynamicModel& model, const SimulationTrace& trace, const Scenario& scenario) {
    if (trace.steps() < 2) throw Error(ErrorCode::InvalidArgument, "snapshot needs the pre- and post-event samples");
    const std::size_t m = model.machine_count();
    const auto& pf = model.power_flow;
    SnapshotFeatures out;

    out[PeT0] = trace.pe[0];
    out[PmT0] = trace.pm[0];
    out[PeTf] = trace.pe[1];
    out[PmTf] = trace.pm[1];
    out[ReserveT0].assign(m, 0.0);
    out[ReserveTf].assign(m, 0.0);
    out[ShortageTf].assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        // Headroom cannot go negative; an out-of-service machine offers none.
        if (model.in_service[i]) out[ReserveT0][i] = std::max(0.0, model.p_max[i] - trace.pe[0][i]);
        if (trace.active[i]) {
            out[ReserveTf][i] = std::max(0.0, model.p_max[i] - trace.pe[1][i]);
            out[ShortageTf][i] = trace.shares[i];
        }
    }
    out[ResponseTf] = generator_response(trace.pm[1], trace.pe[1], model.h, trace.active);

    out[VmT0] = pf.vm;
    out[VaT0] = pf.va;
    out[LoadT0] = pf.operating_point.load_p;

    network::OperatingPoint post = pf.operating_point;
    for (std::size_t i = 0; i < m; ++i) {
        post.gen_in_service[i] = trace.active[i];
        post.gen_p[i] = trace.active[i] ? model.pe0[i] + trace.shares[i] : 0.0;
    }
    if (scenario.kind == DisturbanceKind::LoadStep)
        post.load_p[static_cast<std::size_t>(scenario.target)] += scenario.delta_p;
    const auto after = network::solve_power_flow(model.network, post);
    out[VmTf] = after.vm;
    out[VaTf] = after.va;
    out[LoadTf] = post.load_p;
    return out;
}

}  // namespace nadir::simulator
