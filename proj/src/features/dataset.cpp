#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "nadir/binary_io.hpp"
#include "nadir/error.hpp"
#include "nadir/features.hpp"
#include "nadir/rng.hpp"
#include "nadir/text_io.hpp"

namespace nadir::features {

namespace {

using nlohmann::ordered_json;
constexpr int kFormatVersion = 1;

std::string record_name(std::size_t position) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "samples/%06zu.bin", position);
    return buf;
}

}  // namespace

TensorSample tensorize(const Sample& sample, const network::PowerNetwork& net, const embedding::GridCoordinates& grid,
                       const FeatureRanking& ranking, const NormalizationStats& stats) {
    const auto& cat = simulator::feature_catalog();
    const int h = grid.h;
    const int k = ranking.channels();
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "ranking selects no feature");
    TensorSample out;
    out.scenario_id = sample.scenario_id;
    out.tensor = Tensor3(k, h, h, 0.0);
    out.target_hz = sample.target(ranking.target);
    out.target = stats.scale_target(out.target_hz);

    auto cell_of = [&](int bus) -> const embedding::GridCell& {
        if (bus < 0 || bus >= static_cast<int>(grid.cells.size()))
            throw Error(ErrorCode::MissingNodeCoordinate, "bus index " + std::to_string(bus) + " has no grid cell");
        return grid.cells[static_cast<std::size_t>(bus)];
    };

    for (int c = 0; c < k; ++c) {
        const auto f = static_cast<std::size_t>(ranking.selected[static_cast<std::size_t>(c)]);
        const auto& values = sample.values[f];
        if (cat[f].site == simulator::FeatureSite::Bus) {
            if (values.size() != net.bus_count())
                throw Error(ErrorCode::ShapeMismatch, std::string(cat[f].key) + " does not have one entry per bus");
            for (std::size_t b = 0; b < values.size(); ++b) {
                const auto& cell = cell_of(static_cast<int>(b));
                out.tensor.at(c, cell.row - 1, cell.col - 1) = values[b];
            }
        } else {
            if (values.size() != net.generators.size())
                throw Error(ErrorCode::ShapeMismatch, std::string(cat[f].key) + " does not have one entry per generator");
            // Machines sharing a bus add up in that bus's cell.
            std::vector<bool> seen(net.bus_count(), false);
            for (std::size_t g = 0; g < values.size(); ++g) {
                const int bus = net.generators[g].bus;
                const auto& cell = cell_of(bus);
                double& slot = out.tensor.at(c, cell.row - 1, cell.col - 1);
                slot = seen[static_cast<std::size_t>(bus)] ? slot + values[g] : values[g];
                seen[static_cast<std::size_t>(bus)] = true;
            }
        }
    }
    return out;
}

Split split_indices(int total, int train_count, std::uint64_t seed) {
    if (train_count < 1 || train_count >= total)
        throw Error(ErrorCode::InvalidArgument, "train count " + std::to_string(train_count) + " must lie in [1, " +
                                                    std::to_string(total - 1) + "]");
    std::vector<int> order(static_cast<std::size_t>(total));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(std::span<int>(order));
    Split s;
    s.seed = seed;
    s.train.assign(order.begin(), order.begin() + train_count);
    s.test.assign(order.begin() + train_count, order.end());
    return s;
}

std::vector<const TensorSample*> Dataset::subset(const std::vector<int>& positions) const {
    std::vector<const TensorSample*> out;
    for (int p : positions) {
        if (p < 0 || p >= static_cast<int>(samples.size()))
            throw Error(ErrorCode::InvalidArgument, "sample position " + std::to_string(p) + " out of range");
        out.push_back(&samples[static_cast<std::size_t>(p)]);
    }
    return out;
}

void write_tensor_record(const std::filesystem::path& path, const TensorSample& sample) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Storage, "cannot open " + path.string() + " for writing");
    if (sample.tensor.height != sample.tensor.width)
        throw Error(ErrorCode::ShapeMismatch, "tensor records hold square grids");
    binary::write<std::uint64_t>(out, static_cast<std::uint64_t>(sample.tensor.height));
    binary::write<std::uint64_t>(out, static_cast<std::uint64_t>(sample.tensor.channels));
    binary::write<double>(out, sample.target_hz);
    binary::write_f64s(out, sample.tensor.data);
    if (!out) throw Error(ErrorCode::Storage, "write failed for " + path.string());
}

TensorSample read_tensor_record(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Storage, "cannot open " + path.string());
    try {
        const auto h = binary::read<std::uint64_t>(in);
        const auto k = binary::read<std::uint64_t>(in);
        if (h == 0 || k == 0 || h > 4096 || k > 64) throw Error(ErrorCode::Storage, "implausible header");
        TensorSample s;
        s.target_hz = binary::read<double>(in);
        s.tensor = Tensor3(static_cast<int>(k), static_cast<int>(h), static_cast<int>(h));
        binary::read_f64s(in, s.tensor.data);
        return s;
    } catch (const Error& e) {
        throw Error(ErrorCode::Storage, path.string() + ": " + e.what());
    }
}

void persist_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    const auto& cat = simulator::feature_catalog();
    ordered_json m;
    m["format_version"] = kFormatVersion;
    m["layout"] = "channel, row, column; little-endian float64";
    m["h"] = ds.h;
    m["k"] = ds.channels();
    m["scenario_seed"] = ds.scenario_seed;
    ordered_json grid = ordered_json::array();
    for (std::size_t i = 0; i < ds.grid.cells.size(); ++i)
        grid.push_back({{"node", i < ds.labels.size() ? ds.labels[i] : static_cast<int>(i)},
                        {"row", ds.grid.cells[i].row},
                        {"col", ds.grid.cells[i].col}});
    m["grid"] = grid;
    ordered_json ranking;
    ranking["target"] = to_string(ds.ranking.target);
    ordered_json rho;
    for (std::size_t f = 0; f < kFeatureCount; ++f) rho[cat[f].key] = ds.ranking.rho[f];
    ranking["rho"] = rho;
    ranking["selected"] = ordered_json::array();
    for (int f : ds.ranking.selected) ranking["selected"].push_back(cat[static_cast<std::size_t>(f)].key);
    m["ranking"] = ranking;
    ordered_json stats;
    for (std::size_t f = 0; f < kFeatureCount; ++f) stats[cat[f].key] = {ds.stats.min[f], ds.stats.max[f]};
    m["stats"] = {{"features", stats}, {"target", {ds.stats.target_min, ds.stats.target_max}}};
    m["split"] = {{"seed", ds.split.seed}, {"train", ds.split.train}, {"test", ds.split.test}};
    text::write_file(dir / "manifest.json", m.dump(2) + "\n");

    std::vector<std::string> role(ds.samples.size(), "unused");
    for (int p : ds.split.train) role[static_cast<std::size_t>(p)] = "train";
    for (int p : ds.split.test) role[static_cast<std::size_t>(p)] = "test";
    std::ostringstream index;
    index << "position,file,scenario_id,split,target_hz,target_scaled\n";
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        index << i << ',' << record_name(i) << ',' << s.scenario_id << ',' << role[i] << ','
              << text::format_double(s.target_hz) << ',' << text::format_double(s.target) << '\n';
        write_tensor_record(dir / record_name(i), s);
    }
    text::write_file(dir / "index.csv", index.str());
}

Dataset load_dataset(const std::filesystem::path& dir) {
    Dataset ds;
    ordered_json m;
    try {
        m = ordered_json::parse(text::read_file(dir / "manifest.json"));
        if (m.at("format_version").get<int>() != kFormatVersion)
            throw Error(ErrorCode::Storage, "unsupported dataset format version");
        ds.h = m.at("h").get<int>();
        ds.scenario_seed = m.at("scenario_seed").get<std::uint64_t>();
        ds.grid.h = ds.h;
        for (const auto& c : m.at("grid")) {
            ds.labels.push_back(c.at("node").get<int>());
            ds.grid.cells.push_back({c.at("row").get<int>(), c.at("col").get<int>()});
        }
        const auto& r = m.at("ranking");
        ds.ranking.target = target_from_string(r.at("target").get<std::string>());
        const auto& cat = simulator::feature_catalog();
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            ds.ranking.rho[f] = r.at("rho").at(cat[f].key).get<double>();
            const auto& range = m.at("stats").at("features").at(cat[f].key);
            ds.stats.min[f] = range.at(0).get<double>();
            ds.stats.max[f] = range.at(1).get<double>();
        }
        for (const auto& key : r.at("selected")) {
            const int f = simulator::feature_index(key.get<std::string>());
            if (f < 0) throw Error(ErrorCode::Storage, "unknown feature " + key.get<std::string>());
            ds.ranking.selected.push_back(f);
        }
        ds.stats.target_min = m.at("stats").at("target").at(0).get<double>();
        ds.stats.target_max = m.at("stats").at("target").at(1).get<double>();
        ds.split.seed = m.at("split").at("seed").get<std::uint64_t>();
        ds.split.train = m.at("split").at("train").get<std::vector<int>>();
        ds.split.test = m.at("split").at("test").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Storage, (dir / "manifest.json").string() + ": " + e.what());
    }

    std::istringstream index(text::read_file(dir / "index.csv"));
    std::string line;
    std::getline(index, line);
    while (std::getline(index, line)) {
        if (line.empty()) continue;
        const auto fields = text::split(line, ',');
        if (fields.size() != 6) throw Error(ErrorCode::Storage, (dir / "index.csv").string() + ": malformed row");
        TensorSample s = read_tensor_record(dir / fields[1]);
        s.scenario_id = static_cast<int>(text::parse_int(fields[2]));
        s.target = text::parse_double(fields[5]);
        if (s.tensor.height != ds.h || s.tensor.channels != ds.channels())
            throw Error(ErrorCode::Storage, fields[1] + ": shape disagrees with the manifest");
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

Split split_and_persist(Dataset& dataset, int train_count, std::uint64_t seed, const std::filesystem::path& dir) {
    dataset.split = split_indices(static_cast<int>(dataset.samples.size()), train_count, seed);
    persist_dataset(dir, dataset);
    return dataset.split;
}

}  // namespace nadir::features
