#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "swr/ingest.hpp"
#include "swr/metrics.hpp"
#include "swr/models.hpp"
#include "swr/synthetic.hpp"
#include "swr/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace swr;

namespace {

// Exit codes: 0 ok, 2 usage or config, 3 unreadable artifact, 4 partial failure.
constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kArtifact = 3;
constexpr int kPartial = 4;

struct GlobalOpts {
    uint64_t seed = 42;
    size_t jobs = 1;
    std::string precision = "f64";
    bool quiet = false;
};

void say(const GlobalOpts& g, const std::string& text) {
    if (!g.quiet) std::fputs((text + "\n").c_str(), stdout);
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string metric_str(double v) { return std::isnan(v) ? std::string("-") : fmt("%.6f", v); }

/// Relative dataset paths fall back to SWR_DATA_DIR when they do not resolve
/// from the working directory.
std::string resolve_data_dir(const std::string& path) {
    if (fs::exists(path)) return path;
    if (const char* root = std::getenv("SWR_DATA_DIR")) {
        const fs::path alt = fs::path(root) / path;
        if (fs::exists(alt)) return alt.string();
    }
    fail("dataset directory not found: ", path);
}

ProcessedDataset load_data(const std::string& path) { return load_processed(resolve_data_dir(path)); }

std::vector<int64_t> interaction_counts(const ProcessedDataset& ds) {
    std::vector<int64_t> counts(ds.space.n_scenarios, 0);
    for (int32_t s : ds.scenario) ++counts[static_cast<size_t>(s)];
    return counts;
}

void print_dataset_report(const GlobalOpts& g, const ProcessedDataset& ds) {
    const std::vector<int64_t> counts = interaction_counts(ds);
    std::vector<std::vector<std::string>> rows;
    for (size_t s = 0; s < counts.size(); ++s) {
        std::vector<std::string> row{std::to_string(s), std::to_string(counts[s])};
        row.push_back(s < ds.stats.users.size() ? std::to_string(ds.stats.users[s]) : "-");
        row.push_back(s < ds.stats.items.size() ? std::to_string(ds.stats.items[s]) : "-");
        rows.push_back(std::move(row));
    }
    say(g, format_table({"scenario", "interactions", "users", "items"}, rows));
    say(g, "rows: " + std::to_string(ds.n) + "  sparse: " + std::to_string(ds.space.n_sparse()) +
               "  dense: " + std::to_string(ds.space.n_dense()) +
               "  positive rate: " + fmt("%.4f", positive_rate(ds)));
    say(g, "interaction cov: " + fmt("%.4f", cov_of(counts)));
    if (ds.stats.dropped_unparseable || ds.stats.dropped_unmapped_scenario)
        say(g, "dropped rows: " + std::to_string(ds.stats.dropped_unparseable) + " unparseable, " +
                   std::to_string(ds.stats.dropped_unmapped_scenario) + " unmapped scenario");
    for (const std::string& w : ds.warnings) say(g, "warning: " + w);
}

// ---- prepare / analyze / synth ----

int cmd_prepare(const GlobalOpts& g, const std::string& manifest_path, const std::string& raw_root,
                const std::string& out_dir) {
    DatasetManifest manifest;
    try {
        manifest = load_manifest(manifest_path);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    }
    if (!fs::exists(raw_root)) {
        std::fprintf(stderr, "error: raw path not found: %s\n", raw_root.c_str());
        return kUsage;
    }
    try {
        const ProcessedDataset ds = ingest(manifest, raw_root, g.seed);
        save_processed(ds, out_dir);
        say(g, "prepared '" + ds.name + "' into " + out_dir);
        print_dataset_report(g, ds);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    }
    return kOk;
}

int cmd_analyze(const GlobalOpts& g, const std::string& data_dir) {
    try {
        ProcessedDataset ds = load_data(data_dir);
        say(g, "dataset '" + ds.name + "'");
        print_dataset_report(g, ds);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kArtifact;
    }
    return kOk;
}

int cmd_synth(const GlobalOpts& g, const std::string& out_dir, size_t scenarios, size_t rows,
              size_t users, size_t items, const std::vector<double>& base_ctr) {
    try {
        SyntheticSpec spec;
        spec.n_scenarios = scenarios;
        spec.n_rows = rows;
        spec.n_users = users;
        spec.n_items = items;
        spec.base_ctr = base_ctr;
        spec.seed = seed_for_synth(g.seed);
        const ProcessedDataset ds = gen_synthetic(spec);
        save_processed(ds, out_dir);
        say(g, "wrote synthetic dataset to " + out_dir);
        print_dataset_report(g, ds);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    }
    return kOk;
}

// ---- model and train configuration from flags ----

struct TrainFlags {
    double lr = -1.0;
    int64_t batch_size = -1;
    int64_t max_epochs = -1;
    int64_t patience = -1;
    std::string scheduler;

    TrainConfig merge(const GlobalOpts& g) const {
        TrainConfig cfg;
        cfg.seed = g.seed;
        cfg.precision = g.precision;
        if (lr > 0.0) cfg.lr = lr;
        if (batch_size > 0) cfg.batch_size = static_cast<size_t>(batch_size);
        if (max_epochs > 0) cfg.max_epochs = static_cast<size_t>(max_epochs);
        if (patience > 0) cfg.early_stop_patience = static_cast<size_t>(patience);
        if (!scheduler.empty())
            cfg.scheduler = scheduler == "plateau" ? Scheduler::plateau : Scheduler::none;
        validate_train_config(cfg);
        return cfg;
    }
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--lr", f.lr, "learning rate (default 1e-3)");
    cmd->add_option("--batch-size", f.batch_size, "batch size (default 4096)");
    cmd->add_option("--max-epochs", f.max_epochs, "epoch cap (default 10)");
    cmd->add_option("--patience", f.patience, "early-stop patience (default 2)");
    cmd->add_option("--scheduler", f.scheduler, "lr scheduler: none or plateau")
        ->check(CLI::IsMember({"none", "plateau"}));
}

ModelConfig config_for(const std::string& kind, const std::string& config_file, int64_t embed_dim,
                       const std::vector<size_t>& tower_dims) {
    ModelConfig cfg;
    if (!config_file.empty()) {
        std::ifstream in(config_file);
        require(in.good(), "cannot open model config file: ", config_file);
        std::string text((std::istreambuf_iterator<char>(in)), {});
        cfg = parse_model_config(text);
    }
    if (!kind.empty()) cfg.kind = kind;
    if (embed_dim > 0) cfg.embed_dim = static_cast<size_t>(embed_dim);
    if (!tower_dims.empty()) cfg.tower_dims = tower_dims;
    return cfg;
}

// ---- run execution shared by train / bench / sweep ----

struct RunResult {
    std::string kind;
    uint64_t seed = 0;
    std::string run_dir;
    std::string status;  // completed, early_stopped, failed, error
    std::string error;
    size_t best_epoch = 0;
    double best_val_auc = std::numeric_limits<double>::quiet_NaN();
    double test_auc = std::numeric_limits<double>::quiet_NaN();
    double test_logloss = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> scenario_auc;

    bool ok() const { return status == "completed" || status == "early_stopped"; }
};

template <class S>
RunResult run_one(const ProcessedDataset& ds, const SplitIndices& split, const ModelConfig& mc,
                  const TrainConfig& tc, const std::string& run_dir) {
    RunResult r;
    r.kind = mc.kind;
    r.seed = tc.seed;
    r.run_dir = run_dir;
    try {
        auto model = build_model<S>(mc, ds.space, seed_for_init(tc.seed));
        const RunRecord rec = train(*model, ds, split, tc, run_dir);
        r.status = run_status_name(rec.status);
        r.best_epoch = rec.best_epoch;
        r.best_val_auc = rec.best_val_auc;
        if (!rec.test_metrics.is_null()) {
            const ScenarioReport rep = report_from_json(rec.test_metrics);
            r.test_auc = rep.overall.auc;
            r.test_logloss = rep.overall.logloss;
            for (const MetricCell& c : rep.per_scenario) r.scenario_auc.push_back(c.auc);
        }
    } catch (const std::exception& e) {
        r.status = "error";
        r.error = e.what();
    }
    return r;
}

RunResult run_one_any(const GlobalOpts& g, const ProcessedDataset& ds, const SplitIndices& split,
                      const ModelConfig& mc, const TrainConfig& tc, const std::string& run_dir) {
    if (g.precision == "f32") return run_one<float>(ds, split, mc, tc, run_dir);
    return run_one<double>(ds, split, mc, tc, run_dir);
}

void run_pool(size_t jobs, size_t n, const std::function<void(size_t)>& body) {
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= n) return;
            body(i);
        }
    };
    if (jobs <= 1 || n <= 1) {
        worker();
        return;
    }
    std::vector<std::thread> pool;
    for (size_t t = 0; t < std::min(jobs, n); ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
}

json run_result_to_json(const RunResult& r) {
    json j;
    j["kind"] = r.kind;
    j["seed"] = r.seed;
    j["run_dir"] = r.run_dir;
    j["status"] = r.status;
    if (!r.error.empty()) j["error"] = r.error;
    j["best_epoch"] = r.best_epoch;
    j["best_val_auc"] = std::isnan(r.best_val_auc) ? json(nullptr) : json(r.best_val_auc);
    j["test_auc"] = std::isnan(r.test_auc) ? json(nullptr) : json(r.test_auc);
    j["test_logloss"] = std::isnan(r.test_logloss) ? json(nullptr) : json(r.test_logloss);
    return j;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), "cannot write ", path.string());
    out << text;
    out.flush();
    require(out.good(), "write failure on ", path.string());
}

// ---- train ----

int cmd_train(const GlobalOpts& g, const std::string& data_dir, const std::string& kind,
              const std::string& config_file, int64_t embed_dim,
              const std::vector<size_t>& tower_dims, const TrainFlags& tf,
              const std::string& out_dir) {
    ModelConfig mc;
    TrainConfig tc;
    try {
        mc = config_for(kind, config_file, embed_dim, tower_dims);
        validate_model_config(mc);
        tc = tf.merge(g);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    }
    ProcessedDataset ds;
    try {
        ds = load_data(data_dir);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kArtifact;
    }
    const SplitIndices split = dataset_split(ds);
    const RunResult r = run_one_any(g, ds, split, mc, tc, out_dir);
    if (r.status == "error") {
        std::fprintf(stderr, "error: %s\n", r.error.c_str());
        return kUsage;
    }
    say(g, "run " + r.status + ": best epoch " + std::to_string(r.best_epoch) + ", val auc " +
               metric_str(r.best_val_auc) + ", test auc " + metric_str(r.test_auc) +
               ", test logloss " + metric_str(r.test_logloss));
    say(g, "artifacts in " + out_dir);
    return r.status == "failed" ? kPartial : kOk;
}

// ---- evaluate ----

template <class S>
int evaluate_with(const GlobalOpts& g, const ProcessedDataset& ds, const json& resolved,
                  const fs::path& run_dir, const std::string& split_name) {
    const ModelConfig mc = model_config_from_json(resolved.at("model"));
    const TrainConfig tc = train_config_from_json(resolved.at("train"));
    auto model = build_model<S>(mc, ds.space, seed_for_init(tc.seed));
    try {
        load_checkpoint(model->params(), (run_dir / "model.best.swr").string());
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kArtifact;
    }

    const SplitIndices split = dataset_split(ds);
    const std::vector<int32_t>& idx = split_name == "train" ? split.train
                                      : split_name == "val" ? split.val
                                                            : split.test;
    require(!idx.empty(), "split '", split_name, "' is empty");
    const ScenarioReport rep = evaluate_split(*model, ds, idx, tc.batch_size);

    json m;
    m["version"] = kArtifactVersion;
    m["split"] = split_name;
    m["report"] = report_to_json(rep);
    const std::string fname = split_name == "test" ? "metrics.json" : "metrics." + split_name + ".json";
    write_text_file(run_dir / fname, m.dump(2) + "\n");

    std::vector<std::vector<std::string>> rows;
    rows.push_back({"overall", std::to_string(rep.overall.count), metric_str(rep.overall.auc),
                    metric_str(rep.overall.logloss)});
    for (size_t s = 0; s < rep.per_scenario.size(); ++s)
        rows.push_back({std::to_string(s), std::to_string(rep.per_scenario[s].count),
                        metric_str(rep.per_scenario[s].auc),
                        metric_str(rep.per_scenario[s].logloss)});
    say(g, format_table({"scenario", "rows", "auc", "logloss"}, rows));
    say(g, "macro auc: " + metric_str(rep.macro_auc));
    say(g, "wrote " + (run_dir / fname).string());
    return kOk;
}

int cmd_evaluate(const GlobalOpts& g, const std::string& run_dir_s, const std::string& data_dir,
                 const std::string& split_name) {
    const fs::path run_dir(run_dir_s);
    json resolved;
    try {
        std::ifstream in(run_dir / "config.resolved.json");
        require(in.good(), "cannot open ", (run_dir / "config.resolved.json").string());
        resolved = json::parse(in, nullptr, true);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kArtifact;
    }
    ProcessedDataset ds;
    try {
        ds = load_data(data_dir);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kArtifact;
    }
    try {
        const std::string precision = resolved.at("train").value("precision", "f64");
        if (precision == "f32") return evaluate_with<float>(g, ds, resolved, run_dir, split_name);
        return evaluate_with<double>(g, ds, resolved, run_dir, split_name);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    }
}

// ---- bench ----

std::vector<std::string> parse_kinds(const std::string& kinds_arg) {
    if (kinds_arg.empty() || kinds_arg == "all")
        return {kModelKinds.begin(), kModelKinds.end()};
    std::vector<std::string> kinds;
    std::string token;
    std::istringstream in(kinds_arg);
    while (std::getline(in, token, ',')) {
        ModelConfig probe;
        probe.kind = token;
        validate_model_config(probe);  // unknown kinds fail here with the full list
        kinds.push_back(token);
    }
    require(!kinds.empty(), "no model kinds given");
    return kinds;
}

int cmd_bench(const GlobalOpts& g, const std::string& data_dir, const std::string& kinds_arg,
              size_t n_seeds, int64_t embed_dim, const std::vector<size_t>& tower_dims,
              const TrainFlags& tf, const std::string& out_dir) {
    std::vector<std::string> kinds;
    TrainConfig base_tc;
    try {
        kinds = parse_kinds(kinds_arg);
        base_tc = tf.merge(g);
        require(n_seeds >= 1, "bench needs at least one seed");
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    }
    ProcessedDataset ds;
    try {
        ds = load_data(data_dir);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kArtifact;
    }
    const SplitIndices split = dataset_split(ds);

    struct PlanItem {
        ModelConfig mc;
        TrainConfig tc;
        std::string run_dir;
    };
    std::vector<PlanItem> plan;
    for (const std::string& kind : kinds)
        for (size_t i = 0; i < n_seeds; ++i) {
            PlanItem item;
            item.mc.kind = kind;
            if (embed_dim > 0) item.mc.embed_dim = static_cast<size_t>(embed_dim);
            if (!tower_dims.empty()) item.mc.tower_dims = tower_dims;
            validate_model_config(item.mc);
            item.tc = base_tc;
            item.tc.seed = g.seed + i;
            item.run_dir = (fs::path(out_dir) / kind / ("seed" + std::to_string(item.tc.seed))).string();
            plan.push_back(std::move(item));
        }

    std::vector<RunResult> results(plan.size());
    run_pool(g.jobs, plan.size(), [&](size_t i) {
        results[i] = run_one_any(g, ds, split, plan[i].mc, plan[i].tc, plan[i].run_dir);
    });

    // Aggregate per kind in plan order.
    struct KindSummary {
        std::string kind;
        std::vector<double> aucs, loglosses;
        size_t failures = 0;
    };
    std::vector<KindSummary> summary;
    for (const std::string& kind : kinds) summary.push_back({kind, {}, {}, 0});
    size_t idx = 0;
    bool any_failed = false;
    for (size_t k = 0; k < kinds.size(); ++k)
        for (size_t i = 0; i < n_seeds; ++i, ++idx) {
            const RunResult& r = results[idx];
            if (r.ok() && !std::isnan(r.test_auc)) {
                summary[k].aucs.push_back(r.test_auc);
                summary[k].loglosses.push_back(r.test_logloss);
            } else {
                ++summary[k].failures;
                any_failed = true;
            }
        }

    int best = -1, second = -1;
    for (size_t k = 0; k < summary.size(); ++k) {
        if (summary[k].aucs.empty()) continue;
        const double mean = aggregate(summary[k].aucs).mean;
        if (best < 0 || mean > aggregate(summary[static_cast<size_t>(best)].aucs).mean) {
            second = best;
            best = static_cast<int>(k);
        } else if (second < 0 || mean > aggregate(summary[static_cast<size_t>(second)].aucs).mean) {
            second = static_cast<int>(k);
        }
    }

    std::string csv = csv_line({"kind", "seeds_ok", "auc_mean", "auc_std", "logloss_mean",
                                "logloss_std", "best", "second", "welch_p_vs_best", "failures"});
    std::vector<std::vector<std::string>> rows;
    for (size_t k = 0; k < summary.size(); ++k) {
        const KindSummary& s = summary[k];
        std::vector<std::string> row{s.kind, std::to_string(s.aucs.size())};
        std::string p_vs_best;
        if (!s.aucs.empty()) {
            const Aggregate auc_agg = aggregate(s.aucs);
            const Aggregate ll_agg = aggregate(s.loglosses);
            row.push_back(fmt("%.6f", auc_agg.mean));
            row.push_back(fmt("%.6f", auc_agg.std));
            row.push_back(fmt("%.6f", ll_agg.mean));
            row.push_back(fmt("%.6f", ll_agg.std));
            if (best >= 0 && static_cast<size_t>(best) != k && s.aucs.size() >= 2 &&
                summary[static_cast<size_t>(best)].aucs.size() >= 2)
                p_vs_best = fmt("%.6g", welch_ttest(s.aucs, summary[static_cast<size_t>(best)].aucs).p);
        } else {
            row.insert(row.end(), {"-", "-", "-", "-"});
        }
        row.push_back(static_cast<int>(k) == best ? "1" : "0");
        row.push_back(static_cast<int>(k) == second ? "1" : "0");
        row.push_back(p_vs_best);
        row.push_back(std::to_string(s.failures));
        csv += csv_line(row);
        if (row[2] == "-") row[2] = "failed";
        rows.push_back(row);
    }

    json out;
    out["version"] = kArtifactVersion;
    out["dataset"] = ds.name;
    out["seeds"] = json::array();
    for (size_t i = 0; i < n_seeds; ++i) out["seeds"].push_back(g.seed + i);
    out["runs"] = json::array();
    for (const RunResult& r : results) out["runs"].push_back(run_result_to_json(r));

    try {
        fs::create_directories(out_dir);
        write_text_file(fs::path(out_dir) / "bench_summary.csv", csv);
        const std::string table =
            format_table({"kind", "seeds_ok", "auc_mean", "auc_std", "logloss_mean", "logloss_std",
                          "best", "second", "welch_p_vs_best", "failures"},
                         rows);
        write_text_file(fs::path(out_dir) / "bench_summary.txt", table);
        write_text_file(fs::path(out_dir) / "bench.json", out.dump(2) + "\n");
        say(g, table);
        say(g, "bench artifacts in " + out_dir);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kArtifact;
    }
    return any_failed ? kPartial : kOk;
}

// ---- sweep ----

int cmd_sweep(const GlobalOpts& g, const std::string& data_dir, const std::string& kinds_arg,
              std::vector<size_t> ks, const TrainFlags& tf, const std::string& out_dir) {
    std::vector<std::string> kinds;
    TrainConfig base_tc;
    try {
        kinds = parse_kinds(kinds_arg);
        base_tc = tf.merge(g);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    }
    ProcessedDataset ds;
    try {
        ds = load_data(data_dir);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kArtifact;
    }

    if (ks.empty()) ks = {3, 4, 5, 6, 7};
    const size_t available = ds.space.n_scenarios;
    for (size_t k : ks) {
        if (k < 2 || k > available) {
            std::fprintf(stderr,
                         "error: sweep k=%zu is out of range: dataset has %zu scenarios and k must "
                         "be at least 2\n",
                         k, available);
            return kUsage;
        }
    }

    // Scenario ids ordered by interaction count, largest first; id breaks ties.
    const std::vector<int64_t> counts = interaction_counts(ds);
    std::vector<int32_t> by_count(counts.size());
    for (size_t s = 0; s < counts.size(); ++s) by_count[s] = static_cast<int32_t>(s);
    std::stable_sort(by_count.begin(), by_count.end(), [&](int32_t a, int32_t b) {
        return counts[static_cast<size_t>(a)] > counts[static_cast<size_t>(b)];
    });

    struct PlanItem {
        size_t k;
        ModelConfig mc;
        std::string run_dir;
    };
    std::vector<PlanItem> plan;
    std::vector<ProcessedDataset> filtered;
    std::vector<size_t> plan_dataset;  // plan item -> filtered index
    for (size_t k : ks) {
        std::vector<int32_t> keep(by_count.begin(), by_count.begin() + static_cast<long>(k));
        std::sort(keep.begin(), keep.end());
        filtered.push_back(filter_scenarios(ds, keep));
        for (const std::string& kind : kinds) {
            PlanItem item;
            item.k = k;
            item.mc.kind = kind;
            item.mc.tower_dims = {64, 32};
            validate_model_config(item.mc);
            item.run_dir = (fs::path(out_dir) / ("k" + std::to_string(k)) / kind).string();
            plan.push_back(std::move(item));
            plan_dataset.push_back(filtered.size() - 1);
        }
    }

    std::vector<RunResult> results(plan.size());
    run_pool(g.jobs, plan.size(), [&](size_t i) {
        const ProcessedDataset& sub = filtered[plan_dataset[i]];
        results[i] = run_one_any(g, sub, dataset_split(sub), plan[i].mc, base_tc, plan[i].run_dir);
    });

    std::string csv = csv_line({"k", "kind", "status", "overall_auc", "scenario", "scenario_auc"});
    json out;
    out["version"] = kArtifactVersion;
    out["dataset"] = ds.name;
    out["runs"] = json::array();
    bool any_failed = false;
    std::vector<std::vector<std::string>> rows;
    for (size_t i = 0; i < plan.size(); ++i) {
        const RunResult& r = results[i];
        any_failed |= !r.ok();
        json jr = run_result_to_json(r);
        jr["k"] = plan[i].k;
        jr["scenario_auc"] = json::array();
        for (double a : r.scenario_auc)
            jr["scenario_auc"].push_back(std::isnan(a) ? json(nullptr) : json(a));
        out["runs"].push_back(jr);
        if (r.scenario_auc.empty())
            csv += csv_line({std::to_string(plan[i].k), r.kind, r.status, metric_str(r.test_auc),
                             "-", "-"});
        for (size_t s = 0; s < r.scenario_auc.size(); ++s)
            csv += csv_line({std::to_string(plan[i].k), r.kind, r.status, metric_str(r.test_auc),
                             std::to_string(s), metric_str(r.scenario_auc[s])});
        std::vector<std::string> row{std::to_string(plan[i].k), r.kind, r.status,
                                     metric_str(r.test_auc)};
        std::string per;
        for (size_t s = 0; s < r.scenario_auc.size(); ++s)
            per += (s ? " " : "") + metric_str(r.scenario_auc[s]);
        row.push_back(per);
        rows.push_back(std::move(row));
    }

    try {
        fs::create_directories(out_dir);
        write_text_file(fs::path(out_dir) / "sweep_summary.csv", csv);
        const std::string table =
            format_table({"k", "kind", "status", "overall_auc", "per_scenario_auc"}, rows);
        write_text_file(fs::path(out_dir) / "sweep_summary.txt", table);
        write_text_file(fs::path(out_dir) / "sweep.json", out.dump(2) + "\n");
        say(g, table);
        say(g, "sweep artifacts in " + out_dir);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kArtifact;
    }
    return any_failed ? kPartial : kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-scenario CTR benchmark"};
    app.require_subcommand(1);
    app.fallthrough(true);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "base seed (default 42)");
    app.add_option("--jobs", g.jobs, "worker threads for bench and sweep");
    app.add_option("--precision", g.precision, "float width: f32 or f64")
        ->check(CLI::IsMember({"f32", "f64"}));
    app.add_flag("--quiet", g.quiet, "suppress progress output");

    int rc = kOk;

    auto* prepare = app.add_subcommand("prepare", "encode a raw dataset from a manifest");
    std::string manifest_path, raw_root, prepare_out;
    prepare->add_option("--manifest", manifest_path, "manifest json")->required();
    prepare->add_option("--raw", raw_root, "raw data directory")->required();
    prepare->add_option("--out", prepare_out, "output directory")->required();
    prepare->callback([&] { rc = cmd_prepare(g, manifest_path, raw_root, prepare_out); });

    auto* analyze = app.add_subcommand("analyze", "report scenario statistics of a processed dataset");
    std::string analyze_data;
    analyze->add_option("--data", analyze_data, "processed dataset directory")->required();
    analyze->callback([&] { rc = cmd_analyze(g, analyze_data); });

    auto* synth = app.add_subcommand("synth", "generate the synthetic multi-scenario task");
    std::string synth_out;
    size_t synth_scen = 3, synth_rows = 100000, synth_users = 300, synth_items = 300;
    std::vector<double> synth_ctr;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--scenarios", synth_scen, "scenario count (default 3)");
    synth->add_option("--rows", synth_rows, "row count (default 100000)");
    synth->add_option("--users", synth_users, "user vocabulary (default 300)");
    synth->add_option("--items", synth_items, "item vocabulary (default 300)");
    synth->add_option("--base-ctr", synth_ctr, "per-scenario base rate");
    synth->callback([&] {
        rc = cmd_synth(g, synth_out, synth_scen, synth_rows, synth_users, synth_items, synth_ctr);
    });

    auto* train_cmd = app.add_subcommand("train", "train one model and write a run directory");
    std::string train_data, train_kind, train_cfg_file, train_out;
    int64_t train_embed = -1;
    std::vector<size_t> train_towers;
    TrainFlags train_flags;
    train_cmd->add_option("--data", train_data, "processed dataset directory")->required();
    train_cmd->add_option("--kind", train_kind, "model kind");
    train_cmd->add_option("--model-config", train_cfg_file, "model config json file");
    train_cmd->add_option("--embed-dim", train_embed, "embedding width");
    train_cmd->add_option("--tower-dims", train_towers, "tower hidden widths");
    train_cmd->add_option("--out", train_out, "run directory")->required();
    add_train_flags(train_cmd, train_flags);
    train_cmd->callback([&] {
        if (train_kind.empty() && train_cfg_file.empty()) {
            std::fprintf(stderr, "error: train needs --kind or --model-config\n");
            rc = kUsage;
            return;
        }
        rc = cmd_train(g, train_data, train_kind, train_cfg_file, train_embed, train_towers,
                       train_flags, train_out);
    });

    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a run directory's checkpoint");
    std::string eval_run, eval_data, eval_split = "test";
    eval_cmd->add_option("--run", eval_run, "run directory")->required();
    eval_cmd->add_option("--data", eval_data, "processed dataset directory")->required();
    eval_cmd->add_option("--split", eval_split, "train, val or test (default test)")
        ->check(CLI::IsMember({"train", "val", "test"}));
    eval_cmd->callback([&] { rc = cmd_evaluate(g, eval_run, eval_data, eval_split); });

    auto* bench = app.add_subcommand("bench", "train a model x seed matrix and summarize");
    std::string bench_data, bench_kinds = "all", bench_out;
    size_t bench_seeds = 10;
    int64_t bench_embed = -1;
    std::vector<size_t> bench_towers;
    TrainFlags bench_flags;
    bench->add_option("--data", bench_data, "processed dataset directory")->required();
    bench->add_option("--kinds", bench_kinds, "comma list of kinds or 'all'");
    bench->add_option("--seeds", bench_seeds, "seeds per kind (default 10)");
    bench->add_option("--embed-dim", bench_embed, "embedding width");
    bench->add_option("--tower-dims", bench_towers, "tower hidden widths");
    bench->add_option("--out", bench_out, "output directory")->required();
    add_train_flags(bench, bench_flags);
    bench->callback([&] {
        rc = cmd_bench(g, bench_data, bench_kinds, bench_seeds, bench_embed, bench_towers,
                       bench_flags, bench_out);
    });

    auto* sweep = app.add_subcommand("sweep", "retrain on top-k scenario subsets");
    std::string sweep_data, sweep_kinds = "all", sweep_out;
    std::vector<size_t> sweep_ks;
    TrainFlags sweep_flags;
    sweep->add_option("--data", sweep_data, "processed dataset directory")->required();
    sweep->add_option("--kinds", sweep_kinds, "comma list of kinds or 'all'");
    sweep->add_option("--ks", sweep_ks, "scenario subset sizes (default 3 4 5 6 7)");
    sweep->add_option("--out", sweep_out, "output directory")->required();
    add_train_flags(sweep, sweep_flags);
    sweep->callback(
        [&] { rc = cmd_sweep(g, sweep_data, sweep_kinds, sweep_ks, sweep_flags, sweep_out); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    }
    return rc;
}
