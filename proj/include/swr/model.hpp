#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "swr/features.hpp"
#include "swr/graph.hpp"
#include "swr/model_config.hpp"
#include "swr/nn.hpp"

namespace swr {

/// One embedding table per sparse feature plus the raw dense columns.
/// Concatenated layout: [emb(f0) | emb(f1) | ... | dense block].
template <class S>
struct EmbeddingBank {
    std::vector<std::string> paths;
    size_t dim = 0;
    size_t n_dense = 0;

    EmbeddingBank(ParameterStore<S>& store, const FeatureSpace& space, size_t d)
        : dim(d), n_dense(space.n_dense()) {
        for (size_t i = 0; i < space.n_sparse(); ++i) {
            require(space.vocab_sizes[i] > 0, "feature '", space.sparse_names[i], "' has an empty vocabulary");
            paths.push_back("emb." + space.sparse_names[i]);
            store.add(paths.back(), {space.vocab_sizes[i], d}, Init::embedding_normal);
        }
        require(!paths.empty() || n_dense > 0, "feature space has no features");
    }

    size_t out_dim() const { return paths.size() * dim + n_dense; }

    typename Graph<S>::Id field(Graph<S>& g, ParameterStore<S>& store, const Batch& b, size_t f) const {
        std::vector<int32_t> idx(b.rows);
        for (size_t r = 0; r < b.rows; ++r) idx[r] = b.sparse[r * b.n_sparse + f];
        return g.embedding_rows(g.param(store, paths[f]), idx, paths[f]);
    }

    typename Graph<S>::Id dense_block(Graph<S>& g, const Batch& b) const {
        Tensor<S> d({b.rows, n_dense});
        for (size_t i = 0; i < d.values.size(); ++i) d.values[i] = static_cast<S>(b.dense[i]);
        return g.input(std::move(d), false, "dense");
    }

    typename Graph<S>::Id apply(Graph<S>& g, ParameterStore<S>& store, const Batch& b) const {
        std::vector<typename Graph<S>::Id> parts;
        for (size_t f = 0; f < paths.size(); ++f) parts.push_back(field(g, store, b, f));
        if (n_dense > 0) parts.push_back(dense_block(g, b));
        return parts.size() == 1 ? parts[0] : g.concat_cols(parts);
    }
};

/// Shared shell of every architecture: feature space, parameter store,
/// embedding bank, and per-example scenario routing. Subclasses build the
/// forward graph in logits().
template <class S>
class Model {
public:
    using Id = typename Graph<S>::Id;

    Model(ModelConfig cfg, FeatureSpace space, uint64_t seed)
        : config_(std::move(cfg)),
          space_(std::move(space)),
          params_(seed),
          bank_(params_, space_, config_.embed_dim) {
        validate_model_config(config_);
        require(config_.kind == "single_tower" || space_.n_scenarios >= 2, "model kind '", config_.kind,
                "' needs at least 2 scenarios, got ", space_.n_scenarios);
    }
    virtual ~Model() = default;

    const ModelConfig& config() const { return config_; }
    const FeatureSpace& space() const { return space_; }
    ParameterStore<S>& params() { return params_; }
    const ParameterStore<S>& params() const { return params_; }
    size_t param_count() const { return params_.total_params(); }
    size_t scenario_count() const { return space_.n_scenarios; }

    /// Pre-sigmoid scores, shape [rows, 1].
    virtual Id logits(Graph<S>& g, const Batch& b) = 0;

    /// Non-gradient state maintenance (cluster centroids). The training loop
    /// flips training mode on and calls after_step() once per optimizer step;
    /// frozen models never mutate and are shareable across reader threads.
    virtual void after_step() {}
    void set_training(bool on) { training_ = on; }
    bool training() const { return training_; }

    std::vector<S> predict(const Batch& b) {
        Graph<S> g;
        const auto& out = g.value(g.sigmoid(logits(g, b)));
        return {out.values.begin(), out.values.end()};
    }

protected:
    void check_batch(const Batch& b) const {
        require(b.n_sparse == space_.n_sparse() && b.n_dense == space_.n_dense(),
                "batch feature layout does not match the model's feature space");
        require(b.scenario.size() == b.rows, "batch scenario column has ", b.scenario.size(), " entries for ",
                b.rows, " rows");
        for (int32_t s : b.scenario)
            require(s >= 0 && static_cast<size_t>(s) < space_.n_scenarios, "scenario id ", s,
                    " out of range [0, ", space_.n_scenarios, ")");
    }

    Id embed(Graph<S>& g, const Batch& b) { return bank_.apply(g, params_, b); }

    /// Tower layer widths: input -> tower_dims -> scalar logit.
    std::vector<size_t> stack_dims(size_t in) const {
        std::vector<size_t> v{in};
        v.insert(v.end(), config_.tower_dims.begin(), config_.tower_dims.end());
        v.push_back(1);
        return v;
    }

    void add_scenario_table(const std::string& path, size_t dim) {
        params_.add(path, {space_.n_scenarios, dim}, Init::embedding_normal);
    }

    Id scenario_emb(Graph<S>& g, const Batch& b, const std::string& path) {
        return g.embedding_rows(g.param(params_, path), b.scenario, path);
    }

    std::vector<std::vector<int32_t>> scenario_rows(const Batch& b) const {
        std::vector<std::vector<int32_t>> lists(space_.n_scenarios);
        for (size_t r = 0; r < b.rows; ++r) lists[b.scenario[r]].push_back(static_cast<int32_t>(r));
        return lists;
    }

    /// Applies fn(g, s, rows, gathered x rows) per scenario present in the
    /// batch, then reassembles full batch order.
    template <class F>
    Id route_by_scenario(Graph<S>& g, Id x, const Batch& b, F&& fn) {
        auto lists = scenario_rows(b);
        std::vector<Id> parts;
        std::vector<std::vector<int32_t>> used;
        for (size_t s = 0; s < lists.size(); ++s) {
            if (lists[s].empty()) continue;
            parts.push_back(fn(g, s, lists[s], g.gather_rows(x, lists[s])));
            used.push_back(std::move(lists[s]));
        }
        return g.scatter_rows(parts, used, b.rows);
    }

    ModelConfig config_;
    FeatureSpace space_;
    ParameterStore<S> params_;
    EmbeddingBank<S> bank_;
    bool training_ = false;
};

}  // namespace swr
