#pragma once

#include <string>
#include <vector>

#include "swr/dataset.hpp"
#include "swr/manifest.hpp"

namespace swr {

/// Raw records restricted to the columns the manifest needs, row-major.
struct RawTable {
    std::vector<std::string> columns;
    std::vector<std::string> cells;  // n_rows * columns.size()
    size_t n_rows = 0;
    int64_t skipped_rows = 0;        // malformed lines dropped at load time

    size_t col(const std::string& name) const {
        for (size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        fail("raw data has no column '", name, "'");
    }
    const std::string& cell(size_t row, size_t c) const { return cells[row * columns.size() + c]; }
};

RawTable load_raw(const DatasetManifest& m, const std::string& raw_root);

/// Full preprocessing: load, drop malformed/unmapped rows, build train-split
/// vocabularies and dense statistics, encode. `split_seed` fixes the
/// stratified split used for those statistics and is stored in the result.
ProcessedDataset ingest(const DatasetManifest& m, const std::string& raw_root, uint64_t split_seed);

/// Encoding core, exposed for in-memory tests.
ProcessedDataset encode_table(const DatasetManifest& m, const RawTable& raw, uint64_t split_seed);

}  // namespace swr
