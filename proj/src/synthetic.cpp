#include "swr/synthetic.hpp"

#include <cmath>
#include <unordered_set>

#include "swr/rng.hpp"

namespace swr {

namespace {

double mean_sigmoid(const std::vector<double>& base, double mu) {
    double acc = 0.0;
    for (double b : base) acc += 1.0 / (1.0 + std::exp(-(b + mu)));
    return acc / static_cast<double>(base.size());
}

/// Offset making the empirical mean click probability hit `target`.
double calibrate_mu(const std::vector<double>& base, double target) {
    double lo = -30.0, hi = 30.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mean_sigmoid(base, mid) < target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

ProcessedDataset gen_synthetic(const SyntheticSpec& spec) {
    require(spec.n_scenarios >= 2, "synthetic data needs at least 2 scenarios, got ", spec.n_scenarios);
    require(spec.n_rows > 0, "synthetic data needs at least one row");
    std::vector<double> ctr = spec.base_ctr;
    if (ctr.empty()) ctr.assign(spec.n_scenarios, 0.5);
    require(ctr.size() == spec.n_scenarios, "base_ctr has ", ctr.size(), " entries for ", spec.n_scenarios,
            " scenarios");
    for (double c : ctr) require(c > 0.0 && c < 1.0, "base CTR must lie in (0,1), got ", c);

    const size_t S = spec.n_scenarios, U = spec.n_users, I = spec.n_items, n = spec.n_rows;
    Rng lat(mix_seed(spec.seed, 1));
    std::vector<double> ua(U + 1), ub(U + 1), ic(I + 1), id(I + 1);
    for (size_t u = 1; u <= U; ++u) {
        ua[u] = lat.normal();
        ub[u] = lat.normal();
    }
    for (size_t i = 1; i <= I; ++i) {
        ic[i] = lat.normal();
        id[i] = lat.normal();
    }

    ProcessedDataset ds;
    ds.name = "synthetic";
    ds.space.sparse_names = {"user", "item", "junk"};
    ds.space.vocab_sizes = {U + 1, I + 1, 50};
    ds.space.dense_names = {"ctx_value"};
    ds.space.n_scenarios = S;
    ds.dense_min = {0.0};
    ds.dense_max = {1.0};
    ds.split.mode = SplitMode::ratio_811;
    ds.split.seed = spec.seed;
    ds.n = n;
    ds.sparse.resize(n * 3);
    ds.dense.resize(n);
    ds.scenario.resize(n);
    ds.label.resize(n);

    Rng rows(mix_seed(spec.seed, 2));
    std::vector<double> base(n), coin(n);
    for (size_t k = 0; k < n; ++k) {
        const int32_t s = static_cast<int32_t>(rows.uniform_index(S));
        const size_t u = 1 + rows.uniform_index(U);
        const size_t i = 1 + rows.uniform_index(I);
        const int32_t junk = 1 + static_cast<int32_t>(rows.uniform_index(49));
        const float x = static_cast<float>(rows.uniform01());
        coin[k] = rows.uniform01();
        ds.scenario[k] = s;
        ds.sparse[k * 3 + 0] = static_cast<int32_t>(u);
        ds.sparse[k * 3 + 1] = static_cast<int32_t>(i);
        ds.sparse[k * 3 + 2] = junk;
        ds.dense[k] = x;
        const double sign = (s % 2 == 0) ? 1.0 : -1.0;
        base[k] = spec.shared_coef * ua[u] * ic[i] + spec.flip_coef * sign * ub[u] * id[i] +
                  spec.dense_coef * (static_cast<double>(x) - 0.5);
    }

    for (size_t s = 0; s < S; ++s) {
        std::vector<double> sb;
        for (size_t k = 0; k < n; ++k)
            if (ds.scenario[k] == static_cast<int32_t>(s)) sb.push_back(base[k]);
        if (sb.empty()) continue;
        const double mu = calibrate_mu(sb, ctr[s]);
        for (size_t k = 0; k < n; ++k) {
            if (ds.scenario[k] != static_cast<int32_t>(s)) continue;
            const double p = 1.0 / (1.0 + std::exp(-(base[k] + mu)));
            ds.label[k] = coin[k] < p ? 1 : 0;
        }
    }

    recount_scenarios(ds);
    std::vector<std::unordered_set<int32_t>> us(S), is(S);
    for (size_t k = 0; k < n; ++k) {
        us[static_cast<size_t>(ds.scenario[k])].insert(ds.sparse[k * 3 + 0]);
        is[static_cast<size_t>(ds.scenario[k])].insert(ds.sparse[k * 3 + 1]);
    }
    auto fill = [S](const std::vector<std::unordered_set<int32_t>>& sets, std::vector<int64_t>& out,
                    std::vector<std::vector<int64_t>>& inter) {
        out.resize(S);
        inter.assign(S, std::vector<int64_t>(S, 0));
        for (size_t a = 0; a < S; ++a) {
            out[a] = static_cast<int64_t>(sets[a].size());
            inter[a][a] = out[a];
            for (size_t b = a + 1; b < S; ++b) {
                int64_t shared = 0;
                for (int32_t v : sets[a]) shared += sets[b].count(v);
                inter[a][b] = inter[b][a] = shared;
            }
        }
    };
    fill(us, ds.stats.users, ds.stats.user_intersections);
    fill(is, ds.stats.items, ds.stats.item_intersections);
    return ds;
}

}  // namespace swr
