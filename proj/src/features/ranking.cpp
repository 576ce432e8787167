#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nadir/error.hpp"
#include "nadir/features.hpp"
#include "nadir/log.hpp"

namespace nadir::features {

std::string to_string(Target target) { return target == Target::Nadir ? "nadir" : "steady_state"; }

Target target_from_string(const std::string& text) {
    if (text == "nadir") return Target::Nadir;
    if (text == "steady_state") return Target::SteadyState;
    throw Error(ErrorCode::InvalidArgument, "unknown target '" + text + "'");
}

std::vector<Sample> samples_from(const simulator::ScenarioSet& set) {
    std::vector<Sample> out;
    out.reserve(set.records.size());
    for (const auto& rec : set.records) {
        Sample s;
        s.scenario_id = rec.scenario.id;
        s.values = rec.snapshot.values;
        s.nadir = rec.frequency.nadir;
        s.steady_state = rec.frequency.steady_state;
        for (const auto& v : s.values)
            for (double x : v)
                if (!std::isfinite(x))
                    throw Error(ErrorCode::InvalidArgument, "scenario " + std::to_string(s.scenario_id) + " has a non-finite feature");
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y, bool* constant) {
    if (x.size() != y.size()) throw Error(ErrorCode::ShapeMismatch, "series differ in length");
    if (constant) *constant = false;
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) {
        if (constant) *constant = true;
        return 0.0;
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

FeatureRanking spearman_rank(std::span<const Sample> samples, Target target, int k) {
    if (samples.size() < 3) throw Error(ErrorCode::InvalidArgument, "Spearman ranking needs at least 3 samples");
    if (k < 1 || k > static_cast<int>(kFeatureCount))
        throw Error(ErrorCode::InvalidArgument, "k must lie in [1, 14]");
    const auto& cat = simulator::feature_catalog();
    FeatureRanking out;
    out.target = target;
    std::vector<double> y;
    for (const auto& s : samples) y.push_back(s.target(target));
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        std::vector<double> x;
        for (const auto& s : samples) {
            const auto& v = s.values[f];
            x.push_back(v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()));
        }
        bool constant = false;
        out.rho[f] = spearman(x, y, &constant);
        if (constant) log::warn(std::string("ConstantSeries: feature ") + cat[f].key + " has no spread, coefficient set to 0");
    }
    std::vector<int> order(kFeatureCount);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return std::abs(out.rho[static_cast<std::size_t>(a)]) > std::abs(out.rho[static_cast<std::size_t>(b)]);
    });
    out.selected.assign(order.begin(), order.begin() + k);
    return out;
}

double NormalizationStats::scale(std::size_t feature, double value) const {
    const double span = max[feature] - min[feature];
    return span > 0.0 ? (value - min[feature]) / span : 0.0;
}

double NormalizationStats::scale_target(double hz) const {
    const double span = target_max - target_min;
    return span > 0.0 ? (hz - target_min) / span : 0.0;
}

double NormalizationStats::unscale_target(double normalized) const {
    return target_min + normalized * (target_max - target_min);
}

NormalizationStats fit_normalization(std::span<const Sample> train, Target target) {
    if (train.empty()) throw Error(ErrorCode::InvalidArgument, "normalization needs a non-empty training split");
    NormalizationStats st;
    st.min.fill(std::numeric_limits<double>::infinity());
    st.max.fill(-std::numeric_limits<double>::infinity());
    st.target_min = st.target_max = train.front().target(target);
    for (const auto& s : train) {
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            for (double v : s.values[f]) {
                st.min[f] = std::min(st.min[f], v);
                st.max[f] = std::max(st.max[f], v);
            }
        st.target_min = std::min(st.target_min, s.target(target));
        st.target_max = std::max(st.target_max, s.target(target));
    }
    for (std::size_t f = 0; f < kFeatureCount; ++f)
        if (!std::isfinite(st.min[f])) st.min[f] = st.max[f] = 0.0;
    return st;
}

Sample apply_normalization(const NormalizationStats& stats, const Sample& sample) {
    Sample out = sample;
    for (std::size_t f = 0; f < kFeatureCount; ++f)
        for (double& v : out.values[f]) v = stats.scale(f, v);
    return out;
}

}  // namespace nadir::features
