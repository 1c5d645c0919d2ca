#include "swr/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace swr {

using nlohmann::json;

const FeatureSpec& DatasetManifest::feature(const std::string& fname) const {
    for (const auto& f : features)
        if (f.name == fname) return f;
    fail("manifest '", name, "' declares no feature named '", fname, "'");
}

namespace {

FeatureKind parse_kind(const std::string& k, const std::string& fname) {
    if (k == "sparse") return FeatureKind::sparse;
    if (k == "dense") return FeatureKind::dense;
    if (k == "scenario") return FeatureKind::scenario;
    fail("feature '", fname, "': unknown kind '", k, "' (expected sparse, dense or scenario)");
}

}  // namespace

DatasetManifest parse_manifest(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const std::exception& e) {
        fail("manifest is not valid JSON: ", e.what());
    }
    DatasetManifest m;
    require(j.contains("name") && j["name"].is_string(), "manifest missing string field 'name'");
    m.name = j["name"].get<std::string>();

    const std::string fmt = j.value("format", std::string("delimited"));
    if (fmt == "movielens_1m") m.format = RawFormat::movielens_1m;
    else if (fmt == "delimited") m.format = RawFormat::delimited;
    else if (fmt == "jsonl") m.format = RawFormat::jsonl;
    else fail("manifest '", m.name, "': unknown format '", fmt, "'");

    require(j.contains("features") && j["features"].is_array() && !j["features"].empty(),
            "manifest '", m.name, "' needs a non-empty 'features' array");
    for (const auto& jf : j["features"]) {
        FeatureSpec f;
        require(jf.contains("name"), "feature entry missing 'name'");
        f.name = jf["name"].get<std::string>();
        f.kind = parse_kind(jf.value("kind", std::string("sparse")), f.name);
        if (jf.contains("buckets")) {
            require(f.kind == FeatureKind::dense, "feature '", f.name, "': buckets only apply to dense");
            f.buckets = jf["buckets"].get<std::vector<double>>();
            for (size_t i = 1; i < f.buckets.size(); ++i)
                require(f.buckets[i] > f.buckets[i - 1], "feature '", f.name,
                        "': bucket boundaries must be strictly ascending");
        }
        for (const auto& other : m.features)
            require(other.name != f.name, "duplicate feature '", f.name, "'");
        m.features.push_back(std::move(f));
    }

    size_t n_scen_feats = 0;
    for (const auto& f : m.features)
        if (f.kind == FeatureKind::scenario) {
            ++n_scen_feats;
            m.scenario_feature = f.name;
        }
    if (j.contains("scenario_feature")) {
        const auto declared = j["scenario_feature"].get<std::string>();
        require(n_scen_feats == 1 && declared == m.scenario_feature, "manifest '", m.name,
                "': scenario_feature '", declared, "' must match the single feature with kind scenario");
    }
    require(n_scen_feats == 1, "manifest '", m.name, "' must declare exactly one feature with kind scenario, found ",
            n_scen_feats);

    require(j.contains("scenario_map") && j["scenario_map"].is_object() && !j["scenario_map"].empty(),
            "manifest '", m.name, "' needs a non-empty 'scenario_map'");
    std::set<int32_t> ids;
    for (const auto& [raw, id] : j["scenario_map"].items()) {
        require(id.is_number_integer(), "scenario_map['", raw, "'] must be an integer id");
        const int32_t v = id.get<int32_t>();
        require(v >= 0, "scenario_map['", raw, "'] is negative");
        m.scenario_map[raw] = v;
        ids.insert(v);
    }
    m.n_scenarios = ids.size();
    require(m.n_scenarios >= 2, "manifest '", m.name, "' must map at least 2 scenarios, found ", m.n_scenarios);
    require(*ids.begin() == 0 && *ids.rbegin() == static_cast<int32_t>(m.n_scenarios) - 1,
            "manifest '", m.name, "': scenario ids must be contiguous 0..S-1");

    require(j.contains("label_rule") && j["label_rule"].is_object(), "manifest '", m.name,
            "' needs a 'label_rule' object");
    const auto& lr = j["label_rule"];
    const std::string rule = lr.value("rule", std::string());
    require(lr.contains("column"), "label_rule needs a 'column'");
    m.label_column = lr["column"].get<std::string>();
    if (rule == "threshold") {
        m.label_rule = LabelRule::threshold;
        require(lr.contains("threshold"), "label_rule threshold needs a 'threshold' value");
        m.label_threshold = lr["threshold"].get<double>();
    } else if (rule == "binary") {
        m.label_rule = LabelRule::binary;
    } else {
        fail("manifest '", m.name, "': unknown label rule '", rule, "' (expected threshold or binary)");
    }

    if (j.contains("split")) {
        const auto& sp = j["split"];
        const std::string mode = sp.value("mode", std::string("ratio_811"));
        if (mode == "ratio_811") {
            m.split_mode = SplitMode::ratio_811;
        } else if (mode == "predefined_folds") {
            m.split_mode = SplitMode::predefined_folds;
            require(sp.contains("column"), "predefined_folds split needs a 'column'");
            m.fold_column = sp["column"].get<std::string>();
            require(sp.contains("order") && sp["order"].is_array() && sp["order"].size() == 3,
                    "predefined_folds split needs 'order': [train, val, test] fold values");
            m.fold_order = sp["order"].get<std::vector<std::string>>();
        } else {
            fail("manifest '", m.name, "': unknown split mode '", mode, "'");
        }
    }

    if (m.format != RawFormat::movielens_1m) {
        require(j.contains("file"), "manifest '", m.name, "' (format ", fmt, ") needs a 'file'");
        m.file = j["file"].get<std::string>();
    }
    if (m.format == RawFormat::delimited) {
        const std::string d = j.value("delimiter", std::string(","));
        require(d.size() == 1, "delimiter must be a single character");
        m.delimiter = d[0];
        m.has_header = j.value("header", true);
        if (!m.has_header) {
            require(j.contains("columns"), "headerless delimited format needs a 'columns' list");
            m.columns = j["columns"].get<std::vector<std::string>>();
        }
    }

    m.user_feature = j.value("user_feature", std::string());
    m.item_feature = j.value("item_feature", std::string());
    for (const std::string& idc : {m.user_feature, m.item_feature})
        if (!idc.empty()) (void)m.feature(idc);

    return m;
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open manifest: ", path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str());
}

}  // namespace swr
