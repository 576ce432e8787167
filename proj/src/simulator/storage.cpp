#include <sstream>

#include <json.hpp>

#include "nadir/error.hpp"
#include "nadir/simulator.hpp"
#include "nadir/text_io.hpp"

namespace nadir::simulator {

namespace {

using nlohmann::ordered_json;

ordered_json scenario_json(const Scenario& sc) {
    ordered_json j;
    j["id"] = sc.id;
    j["load_level"] = sc.load_level;
    j["kind"] = to_string(sc.kind);
    j["target"] = sc.target;
    j["delta_p"] = sc.delta_p;
    j["seed"] = sc.seed;
    return j;
}

Scenario scenario_from_json(const ordered_json& j) {
    Scenario sc;
    sc.id = j.at("id").get<int>();
    sc.load_level = j.at("load_level").get<double>();
    sc.kind = disturbance_from_string(j.at("kind").get<std::string>());
    sc.target = j.at("target").get<int>();
    sc.delta_p = j.at("delta_p").get<double>();
    sc.seed = j.at("seed").get<std::uint64_t>();
    return sc;
}

}  // namespace

void write_scenario_set(const std::filesystem::path& dir, const ScenarioSet& set) {
    const auto& cat = feature_catalog();
    ordered_json manifest;
    manifest["network"] = set.network_name;
    manifest["seed"] = set.seed;
    manifest["requested"] = set.requested;
    manifest["units"] = "per-unit on the system base; frequencies in Hz; angles in radians";
    ordered_json lengths = ordered_json::object();
    if (!set.records.empty())
        for (std::size_t f = 0; f < kFeatureCount; ++f) lengths[cat[f].key] = set.records.front().snapshot[f].size();
    manifest["feature_lengths"] = lengths;
    manifest["scenarios"] = ordered_json::array();
    for (const auto& rec : set.records) manifest["scenarios"].push_back(scenario_json(rec.scenario));
    manifest["exclusions"] = ordered_json::array();
    for (const auto& ex : set.exclusions) {
        auto j = scenario_json(ex.scenario);
        j["reason"] = ex.reason;
        manifest["exclusions"].push_back(j);
    }
    text::write_file(dir / "manifest.json", manifest.dump(2) + "\n");

    std::ostringstream csv;
    csv << "scenario_id,nadir_hz,nadir_time_s,steady_state_hz";
    if (!set.records.empty())
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            for (std::size_t i = 0; i < set.records.front().snapshot[f].size(); ++i) csv << ',' << cat[f].key << '_' << i;
    csv << '\n';
    for (const auto& rec : set.records) {
        csv << rec.scenario.id << ',' << text::format_double(rec.frequency.nadir) << ','
            << text::format_double(rec.frequency.nadir_time) << ',' << text::format_double(rec.frequency.steady_state);
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            if (rec.snapshot[f].size() != set.records.front().snapshot[f].size())
                throw Error(ErrorCode::ShapeMismatch, "feature vectors differ in length across scenarios");
            for (double v : rec.snapshot[f]) csv << ',' << text::format_double(v);
        }
        csv << '\n';
    }
    text::write_file(dir / "samples.csv", csv.str());
}

ScenarioSet read_scenario_set(const std::filesystem::path& dir) {
    const auto& cat = feature_catalog();
    ScenarioSet set;
    ordered_json manifest;
    try {
        manifest = ordered_json::parse(text::read_file(dir / "manifest.json"));
        set.network_name = manifest.at("network").get<std::string>();
        set.seed = manifest.at("seed").get<std::uint64_t>();
        set.requested = manifest.at("requested").get<int>();
        for (const auto& j : manifest.at("exclusions")) set.exclusions.push_back({scenario_from_json(j), j.at("reason")});
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Storage, (dir / "manifest.json").string() + ": " + e.what());
    }
    std::vector<std::size_t> lengths(kFeatureCount, 0);
    const auto& jl = manifest["feature_lengths"];
    for (std::size_t f = 0; f < kFeatureCount; ++f)
        if (jl.contains(cat[f].key)) lengths[f] = jl[cat[f].key].get<std::size_t>();

    std::istringstream in(text::read_file(dir / "samples.csv"));
    std::string line;
    std::getline(in, line);
    std::size_t row = 0;
    const auto& scenarios = manifest["scenarios"];
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = text::split(line, ',');
        std::size_t expected = 4;
        for (auto n : lengths) expected += n;
        if (fields.size() != expected || row >= scenarios.size())
            throw Error(ErrorCode::Storage, (dir / "samples.csv").string() + ": malformed row " + std::to_string(row + 1));
        ScenarioRecord rec;
        rec.scenario = scenario_from_json(scenarios[row]);
        if (text::parse_int(fields[0]) != rec.scenario.id)
            throw Error(ErrorCode::Storage, (dir / "samples.csv").string() + ": scenario ids disagree with the manifest");
        rec.frequency.nadir = text::parse_double(fields[1]);
        rec.frequency.nadir_time = text::parse_double(fields[2]);
        rec.frequency.steady_state = text::parse_double(fields[3]);
        std::size_t at = 4;
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            for (std::size_t i = 0; i < lengths[f]; ++i) rec.snapshot[f].push_back(text::parse_double(fields[at++]));
        set.records.push_back(std::move(rec));
        ++row;
    }
    if (row != scenarios.size())
        throw Error(ErrorCode::Storage, (dir / "samples.csv").string() + ": row count disagrees with the manifest");
    return set;
}

}  // namespace nadir::simulator
