#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "swr/adam.hpp"
#include "swr/checkpoint.hpp"
#include "swr/dataset.hpp"
#include "swr/metrics.hpp"
#include "swr/model.hpp"

namespace swr {

enum class Scheduler { none, plateau };

struct TrainConfig {
    double lr = 1e-3;
    size_t batch_size = 4096;
    size_t max_epochs = 10;
    size_t early_stop_patience = 2;
    Scheduler scheduler = Scheduler::none;
    double plateau_factor = 0.5;
    size_t plateau_patience = 1;
    double lr_floor = 1e-6;
    uint64_t seed = 42;
    std::string precision = "f64";
};

void validate_train_config(const TrainConfig& cfg);
nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// One run seed fans out to fixed per-component streams.
inline uint64_t seed_for_init(uint64_t run_seed) { return mix_seed(run_seed, 0xA11CE); }
inline uint64_t seed_for_shuffle(uint64_t run_seed) { return mix_seed(run_seed, 0x5C0FF); }
inline uint64_t seed_for_synth(uint64_t run_seed) { return mix_seed(run_seed, 0x5EED5); }

/// True once the running maximum is `patience` or more entries old. Ties with
/// the maximum do not refresh it.
bool early_stop_check(const std::vector<double>& val_metric, size_t patience);

/// Multiplies lr by `factor` after more than `patience` consecutive epochs
/// without strict metric improvement, never below `floor`.
class PlateauScheduler {
public:
    PlateauScheduler(double factor, size_t patience, double floor)
        : factor_(factor), patience_(patience), floor_(floor) {}

    double observe(double metric, double lr) {
        if (metric > best_) {
            best_ = metric;
            bad_ = 0;
            return lr;
        }
        ++bad_;
        if (bad_ > patience_) {
            bad_ = 0;
            return std::max(floor_, lr * factor_);
        }
        return lr;
    }

private:
    double factor_;
    size_t patience_;
    double floor_;
    double best_ = -std::numeric_limits<double>::infinity();
    size_t bad_ = 0;
};

struct EpochLog {
    size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_auc = 0.0;
    double val_logloss = 0.0;
    double lr = 0.0;
    double seconds = 0.0;  // wall time, excluded from determinism guarantees
};

enum class RunStatus { completed, early_stopped, failed };
const char* run_status_name(RunStatus s);

struct RunRecord {
    nlohmann::json resolved_config;
    std::vector<EpochLog> epochs;
    RunStatus status = RunStatus::completed;
    size_t best_epoch = 0;  // 0 until a validation pass finishes
    double best_val_auc = std::numeric_limits<double>::quiet_NaN();
    int64_t failed_epoch = -1;
    int64_t failed_batch = -1;  // batch index within the failing epoch
    std::string checkpoint_path;
    std::string run_dir;
    nlohmann::json test_metrics;  // report of the restored model on the test split
};

nlohmann::json epoch_log_to_json(const EpochLog& e);
nlohmann::json run_status_to_json(const RunRecord& rec);
void write_run_dir(const RunRecord& rec);

template <class S>
std::vector<double> predict_split(Model<S>& model, const ProcessedDataset& ds,
                                  const std::vector<int32_t>& idx, size_t batch_size) {
    std::vector<double> scores;
    scores.reserve(idx.size());
    for (size_t off = 0; off < idx.size(); off += batch_size) {
        const size_t count = std::min(batch_size, idx.size() - off);
        const Batch b = gather_batch(ds, idx.data() + off, count);
        for (S p : model.predict(b)) scores.push_back(static_cast<double>(p));
    }
    return scores;
}

inline std::vector<int8_t> labels_at(const ProcessedDataset& ds, const std::vector<int32_t>& idx) {
    std::vector<int8_t> out(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) out[i] = ds.label[static_cast<size_t>(idx[i])];
    return out;
}

inline std::vector<int32_t> scenarios_at(const ProcessedDataset& ds, const std::vector<int32_t>& idx) {
    std::vector<int32_t> out(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) out[i] = ds.scenario[static_cast<size_t>(idx[i])];
    return out;
}

template <class S>
ScenarioReport evaluate_split(Model<S>& model, const ProcessedDataset& ds,
                              const std::vector<int32_t>& idx, size_t batch_size) {
    require(!idx.empty(), "evaluate_split: empty index set");
    const std::vector<double> scores = predict_split(model, ds, idx, batch_size);
    return evaluate_per_scenario(labels_at(ds, idx), scores, scenarios_at(ds, idx),
                                 ds.space.n_scenarios);
}

template <class S>
std::vector<std::vector<S>> snapshot_values(const ParameterStore<S>& store) {
    std::vector<std::vector<S>> snap;
    snap.reserve(store.size());
    for (const auto& e : store) snap.push_back(e.value.values);
    return snap;
}

template <class S>
void restore_values(ParameterStore<S>& store, const std::vector<std::vector<S>>& snap) {
    require(snap.size() == store.size(), "restore_values: snapshot entry count mismatch");
    for (size_t i = 0; i < snap.size(); ++i) {
        auto& e = store.entry(i);
        require(snap[i].size() == e.value.numel(), "restore_values: size mismatch for '", e.path, "'");
        e.value.values = snap[i];
    }
}

/// Runs Adam on binary cross entropy with per-epoch validation. The model is
/// left holding the best-validation-AUC parameters. When run_dir is non-empty
/// the run artifacts are written there.
template <class S>
RunRecord train(Model<S>& model, const ProcessedDataset& ds, const SplitIndices& split,
                const TrainConfig& cfg, const std::string& run_dir = "") {
    validate_train_config(cfg);
    require(!split.train.empty(), "train: empty train split");
    require(!split.val.empty(), "train: empty validation split");

    RunRecord rec;
    rec.run_dir = run_dir;
    rec.resolved_config = {{"version", kArtifactVersion},
                           {"dataset", ds.name},
                           {"model", model_config_to_json(model.config())},
                           {"train", train_config_to_json(cfg)}};

    Adam<S> opt(cfg.lr);
    PlateauScheduler sched(cfg.plateau_factor, cfg.plateau_patience, cfg.lr_floor);
    double lr = cfg.lr;
    std::vector<std::vector<S>> best_snapshot;
    std::vector<double> auc_history;

    const std::vector<int8_t> val_labels = labels_at(ds, split.val);
    const std::vector<int32_t> val_scen = scenarios_at(ds, split.val);

    auto finish = [&](RunStatus status) {
        rec.status = status;
        if (!best_snapshot.empty()) restore_values(model.params(), best_snapshot);
        model.set_training(false);
        if (!run_dir.empty()) {
            rec.checkpoint_path = (std::filesystem::path(run_dir) / "model.best.swr").string();
            if (rec.best_epoch > 0 && !split.test.empty())
                rec.test_metrics = report_to_json(
                    evaluate_split(model, ds, split.test, cfg.batch_size));
            std::filesystem::create_directories(run_dir);
            if (rec.best_epoch > 0) save_checkpoint(model.params(), rec.checkpoint_path);
            write_run_dir(rec);
        } else if (rec.best_epoch > 0 && !split.test.empty()) {
            rec.test_metrics = report_to_json(evaluate_split(model, ds, split.test, cfg.batch_size));
        }
        return rec;
    };

    for (size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        model.set_training(true);
        opt.set_lr(lr);

        const std::vector<int32_t> order =
            epoch_order(split.train, seed_for_shuffle(cfg.seed), static_cast<int64_t>(epoch));
        double loss_sum = 0.0;
        int64_t batch_index = 0;
        for (size_t off = 0; off < order.size(); off += cfg.batch_size, ++batch_index) {
            const size_t count = std::min(cfg.batch_size, order.size() - off);
            const Batch b = gather_batch(ds, order.data() + off, count);
            std::vector<S> y(b.label.begin(), b.label.end());

            Graph<S> g;
            const auto loss = g.bce_with_logits(model.logits(g, b), y);
            const double loss_val = static_cast<double>(g.value(loss).values[0]);
            if (!std::isfinite(loss_val)) {
                rec.failed_epoch = static_cast<int64_t>(epoch);
                rec.failed_batch = batch_index;
                return finish(RunStatus::failed);
            }
            loss_sum += loss_val * static_cast<double>(count);

            g.backward(loss);
            g.flush_param_grads();
            opt.step(model.params());
            model.params().zero_grads();
            model.after_step();
        }

        model.set_training(false);
        const std::vector<double> val_scores = predict_split(model, ds, split.val, cfg.batch_size);
        const double val_auc = auc(val_labels, val_scores);
        const double val_ll = logloss(val_labels, val_scores);

        EpochLog e;
        e.epoch = epoch;
        e.train_loss = loss_sum / static_cast<double>(order.size());
        e.val_auc = val_auc;
        e.val_logloss = val_ll;
        e.lr = lr;
        e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rec.epochs.push_back(e);

        const double comparable =
            std::isnan(val_auc) ? -std::numeric_limits<double>::infinity() : val_auc;
        auc_history.push_back(comparable);
        if (rec.best_epoch == 0 || comparable > rec.best_val_auc) {
            rec.best_epoch = epoch;
            rec.best_val_auc = comparable;
            best_snapshot = snapshot_values(model.params());
        }

        if (early_stop_check(auc_history, cfg.early_stop_patience))
            return finish(RunStatus::early_stopped);
        if (cfg.scheduler == Scheduler::plateau) lr = sched.observe(comparable, lr);
    }
    return finish(RunStatus::completed);
}

struct EfficiencyReport {
    double train_seconds_per_epoch = 0.0;
    double inference_seconds_per_batch = 0.0;
    size_t batches_timed = 0;
    size_t param_count = 0;
};

/// Times raw optimizer epochs and warm inference batches. The first inference
/// batch is a warm-up and never counted.
template <class S>
EfficiencyReport profile_model(Model<S>& model, const ProcessedDataset& ds,
                               const SplitIndices& split, const TrainConfig& cfg,
                               size_t epochs = 1) {
    validate_train_config(cfg);
    require(!split.train.empty(), "profile_model: empty train split");
    require(epochs >= 1, "profile_model: need at least one epoch");
    EfficiencyReport rep;
    rep.param_count = model.param_count();

    Adam<S> opt(cfg.lr);
    model.set_training(true);
    const auto t0 = std::chrono::steady_clock::now();
    for (size_t epoch = 1; epoch <= epochs; ++epoch) {
        const std::vector<int32_t> order =
            epoch_order(split.train, seed_for_shuffle(cfg.seed), static_cast<int64_t>(epoch));
        for (size_t off = 0; off < order.size(); off += cfg.batch_size) {
            const size_t count = std::min(cfg.batch_size, order.size() - off);
            const Batch b = gather_batch(ds, order.data() + off, count);
            std::vector<S> y(b.label.begin(), b.label.end());
            Graph<S> g;
            const auto loss = g.bce_with_logits(model.logits(g, b), y);
            g.backward(loss);
            g.flush_param_grads();
            opt.step(model.params());
            model.params().zero_grads();
            model.after_step();
        }
    }
    rep.train_seconds_per_epoch =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() /
        static_cast<double>(epochs);

    model.set_training(false);
    const std::vector<int32_t>& idx = split.test.empty() ? split.train : split.test;
    const size_t n_batches = (idx.size() + cfg.batch_size - 1) / cfg.batch_size;
    {
        const size_t count = std::min(cfg.batch_size, idx.size());
        (void)model.predict(gather_batch(ds, idx.data(), count));  // warm-up
    }
    const size_t first_timed = n_batches > 1 ? 1 : 0;
    const auto t1 = std::chrono::steady_clock::now();
    for (size_t bi = first_timed; bi < n_batches; ++bi) {
        const size_t off = bi * cfg.batch_size;
        const size_t count = std::min(cfg.batch_size, idx.size() - off);
        (void)model.predict(gather_batch(ds, idx.data() + off, count));
    }
    rep.batches_timed = n_batches - first_timed;
    rep.inference_seconds_per_batch =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count() /
        static_cast<double>(rep.batches_timed);
    return rep;
}

}  // namespace swr
