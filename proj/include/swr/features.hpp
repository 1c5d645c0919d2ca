#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "swr/common.hpp"

namespace swr {

enum class FeatureKind { sparse, dense, scenario };

struct FeatureSpec {
    std::string name;
    FeatureKind kind = FeatureKind::sparse;
    size_t vocab_size = 0;             // sparse: filled after encoding; index 0 = OOV
    std::vector<double> buckets;       // optional: dense values bucketized to sparse
};

/// Encoded feature layout shared by datasets and models.
struct FeatureSpace {
    std::vector<std::string> sparse_names;
    std::vector<size_t> vocab_sizes;   // aligned with sparse_names
    std::vector<std::string> dense_names;
    size_t n_scenarios = 0;

    size_t n_sparse() const { return sparse_names.size(); }
    size_t n_dense() const { return dense_names.size(); }
};

/// One training batch; sparse/dense are row-major n x k.
struct Batch {
    size_t rows = 0;
    size_t n_sparse = 0;
    size_t n_dense = 0;
    std::vector<int32_t> sparse;
    std::vector<float> dense;
    std::vector<int32_t> scenario;
    std::vector<int8_t> label;
};

/// Coefficient of variation with the sample (n-1) standard deviation.
inline double cov_of(const std::vector<int64_t>& counts) {
    require(!counts.empty(), "cov_of: empty count vector");
    if (counts.size() == 1) return 0.0;
    double mean = 0.0;
    for (int64_t c : counts) mean += static_cast<double>(c);
    mean /= static_cast<double>(counts.size());
    require(mean > 0.0, "cov_of: non-positive mean");
    double ss = 0.0;
    for (int64_t c : counts) {
        const double d = static_cast<double>(c) - mean;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(counts.size() - 1)) / mean;
}

struct ScenarioStats {
    std::vector<int64_t> interactions;
    std::vector<int64_t> users, items;                           // empty when id columns undeclared
    std::vector<std::vector<int64_t>> user_intersections;        // S x S, symmetric
    std::vector<std::vector<int64_t>> item_intersections;
    double cov = 0.0;
    int64_t dropped_unmapped_scenario = 0;
    int64_t dropped_unparseable = 0;
};

}  // namespace swr
