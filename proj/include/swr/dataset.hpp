#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "swr/features.hpp"
#include "swr/manifest.hpp"

namespace swr {

struct SplitSpec {
    SplitMode mode = SplitMode::ratio_811;
    uint64_t seed = 42;                  // ratio_811: the stratified-shuffle seed
    std::vector<size_t> fold_sizes;      // predefined_folds: rows stored fold-major
};

/// Fully encoded dataset: sparse indices, normalized dense values, scenario
/// ids and binary labels, plus the statistics needed to re-encode and split.
struct ProcessedDataset {
    std::string name;
    FeatureSpace space;
    size_t n = 0;
    std::vector<int32_t> sparse;     // n * n_sparse
    std::vector<float> dense;        // n * n_dense
    std::vector<int32_t> scenario;   // n
    std::vector<int8_t> label;       // n
    std::vector<double> dense_min, dense_max;  // train-split statistics
    SplitSpec split;
    ScenarioStats stats;
    std::vector<std::string> warnings;

    int32_t sparse_at(size_t row, size_t j) const { return sparse[row * space.n_sparse() + j]; }
    float dense_at(size_t row, size_t j) const { return dense[row * space.n_dense() + j]; }
};

struct SplitIndices {
    std::vector<int32_t> train, val, test;
};

/// Per-scenario (train, val, test) sizes: global totals are exactly
/// floor(0.8n) / floor(0.1n) / rest, and every scenario stays within one
/// example of its exact 8:1:1 shares. Pure integer arithmetic.
std::vector<std::array<size_t, 3>> stratified_counts(const std::vector<size_t>& per_scenario,
                                                     std::vector<std::string>* warnings = nullptr);

/// Stratified 8:1:1 split; shuffling is a pure function of (seed, scenario).
/// Returned index lists are ascending.
SplitIndices split_811(const ProcessedDataset& ds, uint64_t seed);

/// Split honoring the dataset's stored spec (stored ratio seed, or the
/// fold-major row ranges for predefined folds).
SplitIndices dataset_split(const ProcessedDataset& ds);

/// Deterministic per-epoch shuffle of an index list.
std::vector<int32_t> epoch_order(const std::vector<int32_t>& indices, uint64_t shuffle_seed, int64_t epoch);

Batch gather_batch(const ProcessedDataset& ds, const int32_t* idx, size_t count);

/// Recomputes per-scenario interaction counts and COV from the scenario
/// column (identity-column stats are fixed at ingest time).
void recount_scenarios(ProcessedDataset& ds);

double positive_rate(const ProcessedDataset& ds);

/// Keeps only rows whose scenario id is among the `keep` ids, renumbering
/// scenarios to 0..k-1 in the order given.
ProcessedDataset filter_scenarios(const ProcessedDataset& ds, const std::vector<int32_t>& keep);

/// data.csv + stats.json under `dir`.
void save_processed(const ProcessedDataset& ds, const std::string& dir);
ProcessedDataset load_processed(const std::string& dir);

}  // namespace swr
