#include "swr/training.hpp"

#include <algorithm>
#include <set>

namespace swr {

namespace {

const char* scheduler_name(Scheduler s) {
    return s == Scheduler::plateau ? "plateau" : "none";
}

Scheduler scheduler_from_name(const std::string& name) {
    if (name == "none") return Scheduler::none;
    if (name == "plateau") return Scheduler::plateau;
    fail("unknown scheduler '", name, "', expected 'none' or 'plateau'");
}

}  // namespace

void validate_train_config(const TrainConfig& cfg) {
    require(cfg.lr > 0.0, "train config: lr must be positive");
    require(cfg.batch_size >= 1, "train config: batch_size must be at least 1");
    require(cfg.max_epochs >= 1, "train config: max_epochs must be at least 1");
    require(cfg.early_stop_patience >= 1, "train config: early_stop_patience must be at least 1");
    require(cfg.plateau_factor > 0.0 && cfg.plateau_factor < 1.0,
            "train config: plateau_factor must lie in (0, 1)");
    require(cfg.plateau_patience >= 1, "train config: plateau_patience must be at least 1");
    require(cfg.lr_floor > 0.0, "train config: lr_floor must be positive");
    require(cfg.precision == "f32" || cfg.precision == "f64",
            "train config: precision must be 'f32' or 'f64'");
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
    nlohmann::json j;
    j["lr"] = cfg.lr;
    j["batch_size"] = cfg.batch_size;
    j["max_epochs"] = cfg.max_epochs;
    j["early_stop_patience"] = cfg.early_stop_patience;
    j["scheduler"] = scheduler_name(cfg.scheduler);
    j["plateau_factor"] = cfg.plateau_factor;
    j["plateau_patience"] = cfg.plateau_patience;
    j["lr_floor"] = cfg.lr_floor;
    j["seed"] = cfg.seed;
    j["precision"] = cfg.precision;
    return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "lr", "batch_size", "max_epochs", "early_stop_patience", "scheduler",
        "plateau_factor", "plateau_patience", "lr_floor", "seed", "precision"};
    for (const auto& [key, _] : j.items())
        require(known.count(key) > 0, "unknown train config field '", key, "'");
    TrainConfig cfg;
    if (j.contains("lr")) cfg.lr = j.at("lr").get<double>();
    if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<size_t>();
    if (j.contains("max_epochs")) cfg.max_epochs = j.at("max_epochs").get<size_t>();
    if (j.contains("early_stop_patience"))
        cfg.early_stop_patience = j.at("early_stop_patience").get<size_t>();
    if (j.contains("scheduler")) cfg.scheduler = scheduler_from_name(j.at("scheduler").get<std::string>());
    if (j.contains("plateau_factor")) cfg.plateau_factor = j.at("plateau_factor").get<double>();
    if (j.contains("plateau_patience")) cfg.plateau_patience = j.at("plateau_patience").get<size_t>();
    if (j.contains("lr_floor")) cfg.lr_floor = j.at("lr_floor").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
    if (j.contains("precision")) cfg.precision = j.at("precision").get<std::string>();
    validate_train_config(cfg);
    return cfg;
}

bool early_stop_check(const std::vector<double>& val_metric, size_t patience) {
    require(patience >= 1, "early_stop_check: patience must be at least 1");
    if (val_metric.empty()) return false;
    size_t best = 0;
    for (size_t i = 1; i < val_metric.size(); ++i)
        if (val_metric[i] > val_metric[best]) best = i;
    return val_metric.size() - 1 - best >= patience;
}

const char* run_status_name(RunStatus s) {
    switch (s) {
        case RunStatus::completed: return "completed";
        case RunStatus::early_stopped: return "early_stopped";
        case RunStatus::failed: return "failed";
    }
    fail("unreachable run status");
}

nlohmann::json epoch_log_to_json(const EpochLog& e) {
    nlohmann::json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["val_auc"] = e.val_auc;
    j["val_logloss"] = e.val_logloss;
    j["lr"] = e.lr;
    j["seconds"] = e.seconds;
    return j;
}

nlohmann::json run_status_to_json(const RunRecord& rec) {
    nlohmann::json j;
    j["status"] = run_status_name(rec.status);
    j["epochs_run"] = rec.epochs.size();
    j["best_epoch"] = rec.best_epoch;
    if (rec.best_epoch > 0 && std::isfinite(rec.best_val_auc))
        j["best_val_auc"] = rec.best_val_auc;
    else
        j["best_val_auc"] = nullptr;
    if (rec.status == RunStatus::failed) {
        j["failed_epoch"] = rec.failed_epoch;
        j["failed_batch"] = rec.failed_batch;
    }
    return j;
}

void write_run_dir(const RunRecord& rec) {
    require(!rec.run_dir.empty(), "write_run_dir: empty run dir");
    const std::filesystem::path dir(rec.run_dir);
    std::filesystem::create_directories(dir);

    auto write_text = [&](const char* name, const std::string& text) {
        std::ofstream out(dir / name, std::ios::trunc);
        require(out.good(), "cannot write run artifact: ", (dir / name).string());
        out << text;
        out.flush();
        require(out.good(), "write failure on run artifact: ", (dir / name).string());
    };

    write_text("config.resolved.json", rec.resolved_config.dump(2) + "\n");

    std::string log;
    for (const EpochLog& e : rec.epochs) log += epoch_log_to_json(e).dump() + "\n";
    write_text("log.jsonl", log);

    write_text("status.json", run_status_to_json(rec).dump(2) + "\n");

    if (!rec.test_metrics.is_null()) {
        nlohmann::json m;
        m["version"] = kArtifactVersion;
        m["split"] = "test";
        m["best_epoch"] = rec.best_epoch;
        m["best_val_auc"] = rec.best_val_auc;
        m["report"] = rec.test_metrics;
        write_text("metrics.json", m.dump(2) + "\n");
    }
}

}  // namespace swr
