#pragma once

#include "swr/dataset.hpp"

namespace swr {

/// Synthetic multi-scenario CTR task. Each user/item carries a shared latent
/// pair and a scenario-flipped pair; the flipped term's sign alternates with
/// the scenario id, so models that condition on the scenario can explain it
/// while scenario-blind models see it average out.
struct SyntheticSpec {
    size_t n_scenarios = 3;
    size_t n_rows = 100000;
    std::vector<double> base_ctr;  // per scenario; empty = 0.5 everywhere
    uint64_t seed = 42;
    size_t n_users = 300;
    size_t n_items = 300;
    double shared_coef = 1.2;
    double flip_coef = 1.8;
    double dense_coef = 0.8;
};

ProcessedDataset gen_synthetic(const SyntheticSpec& spec);

}  // namespace swr
