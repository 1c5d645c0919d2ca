#include "swr/ingest.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace swr {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> needed_columns(const DatasetManifest& m) {
    std::vector<std::string> cols;
    auto want = [&cols](const std::string& c) {
        if (!c.empty() && std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
    };
    for (const auto& f : m.features) want(f.name);
    want(m.label_column);
    if (m.split_mode == SplitMode::predefined_folds) want(m.fold_column);
    return cols;
}

std::vector<std::string> split_on(const std::string& line, const std::string& sep) {
    std::vector<std::string> out;
    size_t at = 0;
    while (true) {
        const size_t next = line.find(sep, at);
        if (next == std::string::npos) {
            out.push_back(line.substr(at));
            return out;
        }
        out.push_back(line.substr(at, next - at));
        at = next + sep.size();
    }
}

void chomp(std::string& line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
}

RawTable load_movielens(const DatasetManifest& m, const std::string& root) {
    static const std::vector<std::string> known = {"user_id", "movie_id", "rating",     "timestamp",
                                                   "gender",  "age",      "occupation", "zip",
                                                   "title",   "genres"};
    RawTable t;
    t.columns = needed_columns(m);
    for (const auto& c : t.columns)
        require(std::find(known.begin(), known.end(), c) != known.end(),
                "column '", c, "' does not exist in the MovieLens-1M layout");

    auto read_lines = [&root](const char* name, auto&& fn) {
        const std::string path = (fs::path(root) / name).string();
        std::ifstream in(path, std::ios::binary);
        require(in.good(), "cannot open ", path);
        std::string line;
        while (std::getline(in, line)) {
            chomp(line);
            if (!line.empty()) fn(line);
        }
    };

    // users.dat: UserID::Gender::Age::Occupation::Zip-code
    std::unordered_map<std::string, std::array<std::string, 4>> users;
    read_lines("users.dat", [&](const std::string& line) {
        auto f = split_on(line, "::");
        if (f.size() != 5) return;
        users[f[0]] = {f[1], f[2], f[3], f[4]};
    });
    // movies.dat: MovieID::Title::Genres
    std::unordered_map<std::string, std::array<std::string, 2>> movies;
    read_lines("movies.dat", [&](const std::string& line) {
        auto f = split_on(line, "::");
        if (f.size() != 3) return;
        movies[f[0]] = {f[1], f[2]};
    });

    const size_t width = t.columns.size();
    // ratings.dat: UserID::MovieID::Rating::Timestamp, kept in file order
    read_lines("ratings.dat", [&](const std::string& line) {
        auto f = split_on(line, "::");
        if (f.size() != 4) {
            t.skipped_rows++;
            return;
        }
        const auto u = users.find(f[0]);
        const auto mv = movies.find(f[1]);
        if (u == users.end() || mv == movies.end()) {
            t.skipped_rows++;
            return;
        }
        for (size_t c = 0; c < width; ++c) {
            const std::string& name = t.columns[c];
            if (name == "user_id") t.cells.push_back(f[0]);
            else if (name == "movie_id") t.cells.push_back(f[1]);
            else if (name == "rating") t.cells.push_back(f[2]);
            else if (name == "timestamp") t.cells.push_back(f[3]);
            else if (name == "gender") t.cells.push_back(u->second[0]);
            else if (name == "age") t.cells.push_back(u->second[1]);
            else if (name == "occupation") t.cells.push_back(u->second[2]);
            else if (name == "zip") t.cells.push_back(u->second[3]);
            else if (name == "title") t.cells.push_back(mv->second[0]);
            else t.cells.push_back(mv->second[1]);
        }
        t.n_rows++;
    });
    return t;
}

RawTable load_delimited(const DatasetManifest& m, const std::string& root) {
    const std::string path = (fs::path(root) / m.file).string();
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open ", path);
    RawTable t;
    t.columns = needed_columns(m);

    std::vector<std::string> file_cols = m.columns;
    std::string line;
    if (m.has_header) {
        require(static_cast<bool>(std::getline(in, line)), "empty raw file ", path);
        chomp(line);
        file_cols = split_on(line, std::string(1, m.delimiter));
    }
    std::vector<size_t> pick(t.columns.size());
    for (size_t c = 0; c < t.columns.size(); ++c) {
        const auto it = std::find(file_cols.begin(), file_cols.end(), t.columns[c]);
        require(it != file_cols.end(), path, " has no column '", t.columns[c], "'");
        pick[c] = static_cast<size_t>(it - file_cols.begin());
    }
    while (std::getline(in, line)) {
        chomp(line);
        if (line.empty()) continue;
        auto f = split_on(line, std::string(1, m.delimiter));
        if (f.size() != file_cols.size()) {
            t.skipped_rows++;
            continue;
        }
        for (size_t c = 0; c < pick.size(); ++c) t.cells.push_back(std::move(f[pick[c]]));
        t.n_rows++;
    }
    return t;
}

RawTable load_jsonl(const DatasetManifest& m, const std::string& root) {
    const std::string path = (fs::path(root) / m.file).string();
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open ", path);
    RawTable t;
    t.columns = needed_columns(m);
    std::string line;
    while (std::getline(in, line)) {
        chomp(line);
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            t.skipped_rows++;
            continue;
        }
        std::vector<std::string> vals;
        vals.reserve(t.columns.size());
        bool ok = true;
        for (const auto& c : t.columns) {
            if (!j.contains(c)) {
                ok = false;
                break;
            }
            const auto& v = j[c];
            if (v.is_string()) vals.push_back(v.get<std::string>());
            else if (v.is_boolean()) vals.push_back(v.get<bool>() ? "1" : "0");
            else if (v.is_number()) vals.push_back(v.dump());
            else {
                ok = false;
                break;
            }
        }
        if (!ok) {
            t.skipped_rows++;
            continue;
        }
        for (auto& v : vals) t.cells.push_back(std::move(v));
        t.n_rows++;
    }
    return t;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

}  // namespace

RawTable load_raw(const DatasetManifest& m, const std::string& raw_root) {
    require(fs::exists(raw_root), "raw path not found: ", raw_root);
    switch (m.format) {
        case RawFormat::movielens_1m: return load_movielens(m, raw_root);
        case RawFormat::delimited: return load_delimited(m, raw_root);
        case RawFormat::jsonl: return load_jsonl(m, raw_root);
    }
    fail("unreachable raw format");
}

ProcessedDataset encode_table(const DatasetManifest& m, const RawTable& raw, uint64_t split_seed) {
    ProcessedDataset ds;
    ds.name = m.name;
    ds.space.n_scenarios = m.n_scenarios;
    ds.stats.dropped_unparseable = raw.skipped_rows;

    const size_t label_c = raw.col(m.label_column);
    const size_t scen_c = raw.col(m.scenario_feature);
    const size_t fold_c = m.split_mode == SplitMode::predefined_folds ? raw.col(m.fold_column) : 0;

    // column plan: sparse (manifest order, bucketized dense included), dense
    struct SparsePlan {
        std::string name;
        size_t raw_col;
        const std::vector<double>* buckets;  // null: vocabulary encoding
    };
    struct DensePlan {
        std::string name;
        size_t raw_col;
    };
    std::vector<SparsePlan> sparse_plan;
    std::vector<DensePlan> dense_plan;
    for (const auto& f : m.features) {
        if (f.kind == FeatureKind::scenario) continue;
        if (f.kind == FeatureKind::sparse) sparse_plan.push_back({f.name, raw.col(f.name), nullptr});
        else if (!f.buckets.empty()) sparse_plan.push_back({f.name, raw.col(f.name), &f.buckets});
        else dense_plan.push_back({f.name, raw.col(f.name)});
    }

    // pass 1: keep rows with a parseable label, parseable dense cells and a
    // mapped scenario value
    std::vector<int32_t> keep;
    std::vector<int8_t> labels;
    std::vector<int32_t> scen;
    for (size_t i = 0; i < raw.n_rows; ++i) {
        double lv = 0.0;
        if (!parse_double(raw.cell(i, label_c), lv)) {
            ds.stats.dropped_unparseable++;
            continue;
        }
        int8_t lab;
        if (m.label_rule == LabelRule::threshold) {
            lab = lv > m.label_threshold ? 1 : 0;
        } else {
            if (lv != 0.0 && lv != 1.0) {
                ds.stats.dropped_unparseable++;
                continue;
            }
            lab = static_cast<int8_t>(lv);
        }
        bool ok = true;
        double tmp;
        for (const auto& dp : dense_plan)
            if (!parse_double(raw.cell(i, dp.raw_col), tmp)) {
                ok = false;
                break;
            }
        for (const auto& sp : sparse_plan) {
            if (!ok) break;
            if (sp.buckets && !parse_double(raw.cell(i, sp.raw_col), tmp)) ok = false;
        }
        if (ok && m.split_mode == SplitMode::predefined_folds &&
            std::find(m.fold_order.begin(), m.fold_order.end(), raw.cell(i, fold_c)) == m.fold_order.end())
            ok = false;
        if (!ok) {
            ds.stats.dropped_unparseable++;
            continue;
        }
        const auto sit = m.scenario_map.find(raw.cell(i, scen_c));
        if (sit == m.scenario_map.end()) {
            ds.stats.dropped_unmapped_scenario++;
            continue;
        }
        keep.push_back(static_cast<int32_t>(i));
        labels.push_back(lab);
        scen.push_back(sit->second);
    }
    ds.n = keep.size();
    if (ds.n == 0) ds.warnings.push_back("no usable rows: processed dataset is empty");

    // row order: raw order for ratio splits, fold-major for predefined folds
    ds.split.mode = m.split_mode;
    std::vector<bool> in_train(ds.n, false);
    if (m.split_mode == SplitMode::predefined_folds) {
        std::vector<int32_t> reorder;
        reorder.reserve(ds.n);
        ds.split.fold_sizes.assign(3, 0);
        for (int fold = 0; fold < 3; ++fold) {
            for (size_t k = 0; k < keep.size(); ++k)
                if (raw.cell(static_cast<size_t>(keep[k]), fold_c) == m.fold_order[static_cast<size_t>(fold)]) {
                    reorder.push_back(static_cast<int32_t>(k));
                    ds.split.fold_sizes[static_cast<size_t>(fold)]++;
                }
        }
        require(reorder.size() == ds.n, "fold assignment lost rows");
        std::vector<int32_t> keep2(ds.n);
        std::vector<int8_t> lab2(ds.n);
        std::vector<int32_t> scen2(ds.n);
        for (size_t k = 0; k < reorder.size(); ++k) {
            keep2[k] = keep[static_cast<size_t>(reorder[k])];
            lab2[k] = labels[static_cast<size_t>(reorder[k])];
            scen2[k] = scen[static_cast<size_t>(reorder[k])];
        }
        keep.swap(keep2);
        labels.swap(lab2);
        scen.swap(scen2);
        for (size_t k = 0; k < ds.split.fold_sizes[0]; ++k) in_train[k] = true;
    } else {
        ds.split.seed = split_seed;
        if (ds.n > 0) {
            ProcessedDataset probe;  // split needs only scenario ids
            probe.n = ds.n;
            probe.space.n_scenarios = m.n_scenarios;
            probe.scenario = scen;
            const auto idx = split_811(probe, split_seed);
            for (int32_t i : idx.train) in_train[static_cast<size_t>(i)] = true;
        }
    }
    ds.scenario = std::move(scen);
    ds.label = std::move(labels);

    // pass 2: vocabularies from training rows (first-appearance order), then
    // encode everything; OOV = 0
    const size_t ns = sparse_plan.size(), nd = dense_plan.size();
    for (const auto& sp : sparse_plan) ds.space.sparse_names.push_back(sp.name);
    for (const auto& dp : dense_plan) ds.space.dense_names.push_back(dp.name);
    ds.sparse.assign(ds.n * ns, 0);
    ds.dense.assign(ds.n * nd, 0.0f);
    for (size_t j = 0; j < ns; ++j) {
        const auto& sp = sparse_plan[j];
        if (sp.buckets) {
            const auto& b = *sp.buckets;
            for (size_t k = 0; k < ds.n; ++k) {
                double v = 0.0;
                parse_double(raw.cell(static_cast<size_t>(keep[k]), sp.raw_col), v);
                const auto pos = std::upper_bound(b.begin(), b.end(), v) - b.begin();
                ds.sparse[k * ns + j] = static_cast<int32_t>(pos) + 1;
            }
            ds.space.vocab_sizes.push_back(b.size() + 2);
        } else {
            std::unordered_map<std::string, int32_t> vocab;
            int32_t next = 1;
            for (size_t k = 0; k < ds.n; ++k) {
                if (!in_train[k]) continue;
                const auto& cell = raw.cell(static_cast<size_t>(keep[k]), sp.raw_col);
                if (vocab.emplace(cell, next).second) ++next;
            }
            for (size_t k = 0; k < ds.n; ++k) {
                const auto it = vocab.find(raw.cell(static_cast<size_t>(keep[k]), sp.raw_col));
                ds.sparse[k * ns + j] = it == vocab.end() ? 0 : it->second;
            }
            ds.space.vocab_sizes.push_back(static_cast<size_t>(next));
        }
    }
    for (size_t j = 0; j < nd; ++j) {
        const auto& dp = dense_plan[j];
        double lo = 0.0, hi = 0.0;
        bool first = true;
        std::vector<double> parsed(ds.n);
        for (size_t k = 0; k < ds.n; ++k) {
            parse_double(raw.cell(static_cast<size_t>(keep[k]), dp.raw_col), parsed[k]);
            if (!in_train[k]) continue;
            if (first) {
                lo = hi = parsed[k];
                first = false;
            } else {
                lo = std::min(lo, parsed[k]);
                hi = std::max(hi, parsed[k]);
            }
        }
        ds.dense_min.push_back(lo);
        ds.dense_max.push_back(hi);
        const double range = hi - lo;
        for (size_t k = 0; k < ds.n; ++k) {
            const double x = range > 0.0 ? (parsed[k] - lo) / range : 0.0;
            ds.dense[k * nd + j] = static_cast<float>(std::clamp(x, 0.0, 1.0));
        }
    }

    // scenario statistics over all kept rows, identity columns on raw values
    recount_scenarios(ds);
    auto distinct_per_scenario = [&](const std::string& column, std::vector<int64_t>& out,
                                     std::vector<std::vector<int64_t>>& inter) {
        const size_t c = raw.col(column);
        std::vector<std::unordered_set<std::string>> sets(m.n_scenarios);
        for (size_t k = 0; k < ds.n; ++k)
            sets[static_cast<size_t>(ds.scenario[k])].insert(raw.cell(static_cast<size_t>(keep[k]), c));
        out.resize(m.n_scenarios);
        for (size_t s = 0; s < m.n_scenarios; ++s) out[s] = static_cast<int64_t>(sets[s].size());
        inter.assign(m.n_scenarios, std::vector<int64_t>(m.n_scenarios, 0));
        for (size_t a = 0; a < m.n_scenarios; ++a) {
            inter[a][a] = out[a];
            for (size_t b = a + 1; b < m.n_scenarios; ++b) {
                int64_t shared = 0;
                const auto& small = sets[a].size() <= sets[b].size() ? sets[a] : sets[b];
                const auto& big = sets[a].size() <= sets[b].size() ? sets[b] : sets[a];
                for (const auto& v : small) shared += big.count(v);
                inter[a][b] = inter[b][a] = shared;
            }
        }
    };
    if (!m.user_feature.empty())
        distinct_per_scenario(m.user_feature, ds.stats.users, ds.stats.user_intersections);
    if (!m.item_feature.empty())
        distinct_per_scenario(m.item_feature, ds.stats.items, ds.stats.item_intersections);
    return ds;
}

ProcessedDataset ingest(const DatasetManifest& m, const std::string& raw_root, uint64_t split_seed) {
    const RawTable raw = load_raw(m, raw_root);
    return encode_table(m, raw, split_seed);
}

}  // namespace swr
