#include "swr/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "swr/rng.hpp"

namespace swr {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<std::array<size_t, 3>> stratified_counts(const std::vector<size_t>& per_scenario,
                                                     std::vector<std::string>* warnings) {
    const size_t s_count = per_scenario.size();
    require(s_count >= 1, "stratified_counts: no scenarios");
    size_t n = 0;
    for (size_t c : per_scenario) n += c;
    require(n > 0, "stratified_counts: empty dataset");
    const size_t n_train = 8 * n / 10, n_val = n / 10;

    // tenths arithmetic: 0.8c = t0 + r8/10, 0.1c = v0 + rv/10
    std::vector<size_t> t0(s_count), r8(s_count), v0(s_count), rv(s_count);
    std::vector<int> bt(s_count, 0), bv(s_count, 0);
    size_t sum_t0 = 0, sum_v0 = 0;
    for (size_t s = 0; s < s_count; ++s) {
        t0[s] = 8 * per_scenario[s] / 10;
        r8[s] = 8 * per_scenario[s] % 10;
        v0[s] = per_scenario[s] / 10;
        rv[s] = per_scenario[s] % 10;
        sum_t0 += t0[s];
        sum_v0 += v0[s];
        if (per_scenario[s] > 0 && per_scenario[s] < 10 && warnings)
            warnings->push_back(strcat_msg("scenario ", s, " has only ", per_scenario[s],
                                           " examples; splitting best-effort"));
    }

    // train bonuses by largest remainder
    {
        size_t bonus = n_train - sum_t0;
        std::vector<size_t> order(s_count);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return r8[a] > r8[b]; });
        for (size_t i = 0; i < bonus; ++i) bt[order[i]] = 1;
    }

    // val bonuses: a scenario's test share (in tenths) deviates by
    // e = r8+rv-10*bt without a bonus and by e-10 with one. Handing the
    // bonuses to the largest e first minimizes the worst deviation; with
    // enough bonuses for every e > 10 scenario, all shares stay within one
    // example. (Counts like {9,9} leave one scenario short; unavoidable once
    // the global sizes are pinned to floor(0.8n)/floor(0.1n)/rest.)
    {
        size_t bonus = n_val - sum_v0;
        auto room = [&](size_t s) { return t0[s] + static_cast<size_t>(bt[s]) + v0[s] < per_scenario[s]; };
        std::vector<size_t> order(s_count);
        std::iota(order.begin(), order.end(), 0);
        auto pressure = [&](size_t s) { return static_cast<long>(r8[s] + rv[s]) - 10L * bt[s]; };
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t a, size_t b) { return pressure(a) > pressure(b); });
        for (size_t s : order) {
            if (bonus == 0) break;
            if (room(s)) {
                bv[s] = 1;
                --bonus;
            }
        }
        require(bonus == 0, "stratified split could not place ", bonus, " validation examples");
    }

    std::vector<std::array<size_t, 3>> out(s_count);
    for (size_t s = 0; s < s_count; ++s) {
        const size_t t = t0[s] + static_cast<size_t>(bt[s]);
        const size_t v = v0[s] + static_cast<size_t>(bv[s]);
        require(t + v <= per_scenario[s], "stratified split overflow in scenario ", s);
        out[s] = {t, v, per_scenario[s] - t - v};
        if (warnings) {
            const long dev = static_cast<long>(r8[s] + rv[s]) - 10 * (bt[s] + bv[s]);
            if (dev > 10 || dev < -10)
                warnings->push_back(strcat_msg("scenario ", s, " test share deviates by more than one example"));
        }
    }
    return out;
}

SplitIndices split_811(const ProcessedDataset& ds, uint64_t seed) {
    require(ds.n > 0, "split_811: empty dataset");
    const size_t s_count = ds.space.n_scenarios;
    std::vector<size_t> counts(s_count, 0);
    for (int32_t s : ds.scenario) counts[static_cast<size_t>(s)]++;
    auto alloc = stratified_counts(counts);

    std::vector<std::vector<int32_t>> by_scenario(s_count);
    for (size_t s = 0; s < s_count; ++s) by_scenario[s].reserve(counts[s]);
    for (size_t i = 0; i < ds.n; ++i) by_scenario[static_cast<size_t>(ds.scenario[i])].push_back(static_cast<int32_t>(i));

    SplitIndices out;
    for (size_t s = 0; s < s_count; ++s) {
        auto& ids = by_scenario[s];
        Rng rng(mix_seed(seed, s));
        rng.shuffle(ids.data(), ids.size());
        const auto [t, v, te] = alloc[s];
        out.train.insert(out.train.end(), ids.begin(), ids.begin() + t);
        out.val.insert(out.val.end(), ids.begin() + t, ids.begin() + t + v);
        out.test.insert(out.test.end(), ids.begin() + t + v, ids.end());
        (void)te;
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

SplitIndices dataset_split(const ProcessedDataset& ds) {
    if (ds.split.mode == SplitMode::ratio_811) return split_811(ds, ds.split.seed);
    require(ds.split.fold_sizes.size() == 3, "dataset '", ds.name, "' has no stored fold sizes");
    const auto& fs3 = ds.split.fold_sizes;
    require(fs3[0] + fs3[1] + fs3[2] == ds.n, "fold sizes do not sum to dataset size");
    SplitIndices out;
    std::vector<int32_t>* parts[3] = {&out.train, &out.val, &out.test};
    size_t at = 0;
    for (int k = 0; k < 3; ++k) {
        parts[k]->resize(fs3[k]);
        std::iota(parts[k]->begin(), parts[k]->end(), static_cast<int32_t>(at));
        at += fs3[k];
    }
    return out;
}

std::vector<int32_t> epoch_order(const std::vector<int32_t>& indices, uint64_t shuffle_seed, int64_t epoch) {
    auto out = indices;
    Rng rng(mix_seed(shuffle_seed, static_cast<uint64_t>(epoch)));
    rng.shuffle(out.data(), out.size());
    return out;
}

Batch gather_batch(const ProcessedDataset& ds, const int32_t* idx, size_t count) {
    Batch b;
    b.rows = count;
    b.n_sparse = ds.space.n_sparse();
    b.n_dense = ds.space.n_dense();
    b.sparse.resize(count * b.n_sparse);
    b.dense.resize(count * b.n_dense);
    b.scenario.resize(count);
    b.label.resize(count);
    for (size_t i = 0; i < count; ++i) {
        const size_t r = static_cast<size_t>(idx[i]);
        require(r < ds.n, "batch index ", idx[i], " out of range");
        std::copy_n(ds.sparse.data() + r * b.n_sparse, b.n_sparse, b.sparse.data() + i * b.n_sparse);
        std::copy_n(ds.dense.data() + r * b.n_dense, b.n_dense, b.dense.data() + i * b.n_dense);
        b.scenario[i] = ds.scenario[r];
        b.label[i] = ds.label[r];
    }
    return b;
}

void recount_scenarios(ProcessedDataset& ds) {
    ds.stats.interactions.assign(ds.space.n_scenarios, 0);
    for (int32_t s : ds.scenario) ds.stats.interactions[static_cast<size_t>(s)]++;
    ds.stats.cov = (ds.n > 0 && ds.space.n_scenarios > 1) ? cov_of(ds.stats.interactions) : 0.0;
}

double positive_rate(const ProcessedDataset& ds) {
    if (ds.n == 0) return 0.0;
    size_t pos = 0;
    for (int8_t l : ds.label) pos += static_cast<size_t>(l);
    return static_cast<double>(pos) / static_cast<double>(ds.n);
}

ProcessedDataset filter_scenarios(const ProcessedDataset& ds, const std::vector<int32_t>& keep) {
    require(!keep.empty(), "filter_scenarios: empty keep list");
    std::vector<int32_t> remap(ds.space.n_scenarios, -1);
    for (size_t k = 0; k < keep.size(); ++k) {
        require(keep[k] >= 0 && static_cast<size_t>(keep[k]) < ds.space.n_scenarios,
                "filter_scenarios: scenario ", keep[k], " out of range");
        require(remap[static_cast<size_t>(keep[k])] == -1, "filter_scenarios: duplicate scenario ", keep[k]);
        remap[static_cast<size_t>(keep[k])] = static_cast<int32_t>(k);
    }
    ProcessedDataset out;
    out.name = ds.name;
    out.space = ds.space;
    out.space.n_scenarios = keep.size();
    out.dense_min = ds.dense_min;
    out.dense_max = ds.dense_max;
    out.split = ds.split;
    require(ds.split.mode == SplitMode::ratio_811, "filter_scenarios requires a ratio-split dataset");
    const size_t ns = ds.space.n_sparse(), nd = ds.space.n_dense();
    for (size_t i = 0; i < ds.n; ++i) {
        const int32_t m = remap[static_cast<size_t>(ds.scenario[i])];
        if (m < 0) continue;
        out.sparse.insert(out.sparse.end(), ds.sparse.begin() + i * ns, ds.sparse.begin() + (i + 1) * ns);
        out.dense.insert(out.dense.end(), ds.dense.begin() + i * nd, ds.dense.begin() + (i + 1) * nd);
        out.scenario.push_back(m);
        out.label.push_back(ds.label[i]);
    }
    out.n = out.scenario.size();
    recount_scenarios(out);
    return out;
}

// ---- persistence ----

namespace {

void write_stats_json(const ProcessedDataset& ds, const std::string& path) {
    json j;
    j["name"] = ds.name;
    j["n"] = ds.n;
    j["n_scenarios"] = ds.space.n_scenarios;
    j["sparse"] = json::array();
    for (size_t i = 0; i < ds.space.n_sparse(); ++i)
        j["sparse"].push_back({{"name", ds.space.sparse_names[i]}, {"vocab_size", ds.space.vocab_sizes[i]}});
    j["dense"] = json::array();
    for (size_t i = 0; i < ds.space.n_dense(); ++i)
        j["dense"].push_back(
            {{"name", ds.space.dense_names[i]}, {"min", ds.dense_min[i]}, {"max", ds.dense_max[i]}});
    if (ds.split.mode == SplitMode::ratio_811)
        j["split"] = {{"mode", "ratio_811"}, {"seed", ds.split.seed}};
    else
        j["split"] = {{"mode", "predefined_folds"}, {"fold_sizes", ds.split.fold_sizes}};
    json st;
    st["interactions"] = ds.stats.interactions;
    st["cov"] = ds.stats.cov;
    if (!ds.stats.users.empty()) {
        st["users"] = ds.stats.users;
        st["user_intersections"] = ds.stats.user_intersections;
    }
    if (!ds.stats.items.empty()) {
        st["items"] = ds.stats.items;
        st["item_intersections"] = ds.stats.item_intersections;
    }
    st["dropped_unmapped_scenario"] = ds.stats.dropped_unmapped_scenario;
    st["dropped_unparseable"] = ds.stats.dropped_unparseable;
    j["scenario_stats"] = std::move(st);
    size_t pos = 0;
    for (int8_t l : ds.label) pos += static_cast<size_t>(l);
    j["positives"] = pos;

    std::ofstream out(path, std::ios::trunc);
    require(out.good(), "cannot write ", path);
    out << j.dump(2) << "\n";
    require(out.good(), "write failure on ", path);
}

}  // namespace

void save_processed(const ProcessedDataset& ds, const std::string& dir) {
    fs::create_directories(dir);
    const std::string csv_path = (fs::path(dir) / "data.csv").string();
    std::ofstream out(csv_path, std::ios::trunc | std::ios::binary);
    require(out.good(), "cannot write ", csv_path);
    std::string line;
    for (size_t j = 0; j < ds.space.n_sparse(); ++j) {
        if (j) line += ',';
        line += ds.space.sparse_names[j];
    }
    for (size_t j = 0; j < ds.space.n_dense(); ++j) {
        if (!line.empty()) line += ',';
        line += ds.space.dense_names[j];
    }
    if (!line.empty()) line += ',';
    line += "scenario,label\n";
    out << line;
    char buf[64];
    const size_t ns = ds.space.n_sparse(), nd = ds.space.n_dense();
    for (size_t i = 0; i < ds.n; ++i) {
        line.clear();
        for (size_t j = 0; j < ns; ++j) {
            snprintf(buf, sizeof buf, "%d,", ds.sparse[i * ns + j]);
            line += buf;
        }
        for (size_t j = 0; j < nd; ++j) {
            snprintf(buf, sizeof buf, "%.9g,", static_cast<double>(ds.dense[i * nd + j]));
            line += buf;
        }
        snprintf(buf, sizeof buf, "%d,%d\n", ds.scenario[i], static_cast<int>(ds.label[i]));
        line += buf;
        out << line;
    }
    require(out.good(), "write failure on ", csv_path);
    out.close();
    write_stats_json(ds, (fs::path(dir) / "stats.json").string());
}

ProcessedDataset load_processed(const std::string& dir) {
    const std::string stats_path = (fs::path(dir) / "stats.json").string();
    std::ifstream sin(stats_path);
    require(sin.good(), "cannot open ", stats_path);
    json j;
    try {
        j = json::parse(sin);
    } catch (const std::exception& e) {
        fail("unparseable stats file ", stats_path, ": ", e.what());
    }
    ProcessedDataset ds;
    ds.name = j.at("name").get<std::string>();
    ds.n = j.at("n").get<size_t>();
    ds.space.n_scenarios = j.at("n_scenarios").get<size_t>();
    for (const auto& f : j.at("sparse")) {
        ds.space.sparse_names.push_back(f.at("name").get<std::string>());
        ds.space.vocab_sizes.push_back(f.at("vocab_size").get<size_t>());
    }
    for (const auto& f : j.at("dense")) {
        ds.space.dense_names.push_back(f.at("name").get<std::string>());
        ds.dense_min.push_back(f.at("min").get<double>());
        ds.dense_max.push_back(f.at("max").get<double>());
    }
    const auto& sp = j.at("split");
    if (sp.at("mode") == "ratio_811") {
        ds.split.mode = SplitMode::ratio_811;
        ds.split.seed = sp.at("seed").get<uint64_t>();
    } else {
        ds.split.mode = SplitMode::predefined_folds;
        ds.split.fold_sizes = sp.at("fold_sizes").get<std::vector<size_t>>();
    }
    if (j.contains("scenario_stats")) {
        const auto& st = j["scenario_stats"];
        ds.stats.interactions = st.value("interactions", std::vector<int64_t>{});
        ds.stats.cov = st.value("cov", 0.0);
        ds.stats.users = st.value("users", std::vector<int64_t>{});
        ds.stats.items = st.value("items", std::vector<int64_t>{});
        ds.stats.user_intersections = st.value("user_intersections", std::vector<std::vector<int64_t>>{});
        ds.stats.item_intersections = st.value("item_intersections", std::vector<std::vector<int64_t>>{});
        ds.stats.dropped_unmapped_scenario = st.value("dropped_unmapped_scenario", int64_t(0));
        ds.stats.dropped_unparseable = st.value("dropped_unparseable", int64_t(0));
    }

    const std::string csv_path = (fs::path(dir) / "data.csv").string();
    std::ifstream in(csv_path, std::ios::binary);
    require(in.good(), "cannot open ", csv_path);
    std::string header;
    require(static_cast<bool>(std::getline(in, header)), "empty processed file ", csv_path);
    const size_t ns = ds.space.n_sparse(), nd = ds.space.n_dense();
    ds.sparse.reserve(ds.n * ns);
    ds.dense.reserve(ds.n * nd);
    ds.scenario.reserve(ds.n);
    ds.label.reserve(ds.n);
    std::string cell, row;
    size_t rows = 0;
    while (std::getline(in, row)) {
        if (row.empty()) continue;
        std::istringstream ss(row);
        for (size_t j = 0; j < ns; ++j) {
            require(static_cast<bool>(std::getline(ss, cell, ',')), "short row ", rows + 2, " in ", csv_path);
            ds.sparse.push_back(static_cast<int32_t>(std::stol(cell)));
        }
        for (size_t j = 0; j < nd; ++j) {
            require(static_cast<bool>(std::getline(ss, cell, ',')), "short row ", rows + 2, " in ", csv_path);
            ds.dense.push_back(std::strtof(cell.c_str(), nullptr));
        }
        require(static_cast<bool>(std::getline(ss, cell, ',')), "short row ", rows + 2, " in ", csv_path);
        ds.scenario.push_back(static_cast<int32_t>(std::stol(cell)));
        require(static_cast<bool>(std::getline(ss, cell, ',')), "short row ", rows + 2, " in ", csv_path);
        ds.label.push_back(static_cast<int8_t>(std::stol(cell)));
        ++rows;
    }
    require(rows == ds.n, csv_path, " holds ", rows, " rows but stats declare ", ds.n);
    for (size_t i = 0; i < ds.n; ++i)
        require(ds.scenario[i] >= 0 && static_cast<size_t>(ds.scenario[i]) < ds.space.n_scenarios,
                "row ", i, ": scenario id ", ds.scenario[i], " out of range");
    return ds;
}

}  // namespace swr
