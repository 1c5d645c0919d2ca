#pragma once

#include <cmath>

#include "swr/model.hpp"

namespace swr {

/// Cosine argmax over centroid rows; ties go to the lowest index, zero-norm
/// representations to cluster 0 (counted via zero_norm).
template <class S>
std::vector<int32_t> adl_route(const Tensor<S>& repr, const Tensor<S>& centroids, size_t* zero_norm = nullptr) {
    require(repr.rank() == 2 && centroids.rank() == 2 && repr.shape[1] == centroids.shape[1],
            "adl_route: representation and centroid widths differ");
    const size_t n = repr.shape[0], h = repr.shape[1], k = centroids.shape[0];
    std::vector<int32_t> out(n, 0);
    for (size_t r = 0; r < n; ++r) {
        const S* e = repr.values.data() + r * h;
        double en = 0.0;
        for (size_t j = 0; j < h; ++j) en += double(e[j]) * double(e[j]);
        if (en == 0.0) {
            if (zero_norm) ++*zero_norm;
            continue;
        }
        double best = 0.0;
        int32_t arg = 0;
        for (size_t c = 0; c < k; ++c) {
            const S* cv = centroids.values.data() + c * h;
            double dot = 0.0, cn = 0.0;
            for (size_t j = 0; j < h; ++j) {
                dot += double(e[j]) * double(cv[j]);
                cn += double(cv[j]) * double(cv[j]);
            }
            const double cos = cn == 0.0 ? 0.0 : dot / std::sqrt(en * cn);
            if (c == 0 || cos > best) {
                best = cos;
                arg = static_cast<int32_t>(c);
            }
        }
        out[r] = arg;
    }
    return out;
}

/// EMA toward the mean of each cluster's assigned representations, then
/// renormalize every centroid to unit norm.
template <class S>
void adl_update(Tensor<S>& centroids, const Tensor<S>& repr, const std::vector<int32_t>& assign,
                double momentum) {
    const size_t k = centroids.shape[0], h = centroids.shape[1];
    std::vector<double> mean(k * h, 0.0);
    std::vector<size_t> count(k, 0);
    for (size_t r = 0; r < assign.size(); ++r) {
        const size_t c = static_cast<size_t>(assign[r]);
        ++count[c];
        for (size_t j = 0; j < h; ++j) mean[c * h + j] += double(repr.values[r * h + j]);
    }
    for (size_t c = 0; c < k; ++c) {
        S* cv = centroids.values.data() + c * h;
        if (count[c] > 0)
            for (size_t j = 0; j < h; ++j)
                cv[j] = static_cast<S>((1.0 - momentum) * double(cv[j]) +
                                       momentum * mean[c * h + j] / double(count[c]));
        double nrm = 0.0;
        for (size_t j = 0; j < h; ++j) nrm += double(cv[j]) * double(cv[j]);
        nrm = std::sqrt(nrm);
        if (nrm > 0.0)
            for (size_t j = 0; j < h; ++j) cv[j] = static_cast<S>(double(cv[j]) / nrm);
    }
}

/// Distribution clusters instead of raw scenario routing: examples go to the
/// nearest centroid's tower (plus a shared tower). Centroids are non-trainable
/// running state, EMA-updated after each optimizer step and frozen at
/// inference.
template <class S>
class AdlModel final : public Model<S> {
public:
    using Id = typename Model<S>::Id;

    AdlModel(ModelConfig cfg, FeatureSpace space, uint64_t seed)
        : Model<S>(std::move(cfg), std::move(space), seed) {
        const size_t in = this->bank_.out_dim();
        this->params_.add("adl.centroids", {this->config_.clusters, in}, Init::embedding_normal, false);
        auto& c = this->params_.value("adl.centroids");
        std::vector<int32_t> iota;
        for (size_t j = 0; j < this->config_.clusters; ++j) iota.push_back(static_cast<int32_t>(j));
        adl_update(c, c, iota, 0.0);  // pure renormalization pass
        shared_ = Mlp<S>(this->params_, "tower", this->stack_dims(in), Act::relu, Act::none);
        for (size_t k = 0; k < this->config_.clusters; ++k)
            cluster_towers_.emplace_back(this->params_, "cluster.c" + std::to_string(k),
                                         this->stack_dims(in), Act::relu, Act::none);
    }

    Id logits(Graph<S>& g, const Batch& b) override {
        this->check_batch(b);
        Id x = this->embed(g, b);
        const auto& repr = g.value(x);
        auto assign = adl_route(repr, this->params_.value("adl.centroids"), &zero_norm_);
        if (this->training_) {
            last_repr_ = repr;
            last_assign_ = assign;
        }
        std::vector<std::vector<int32_t>> lists(this->config_.clusters);
        for (size_t r = 0; r < b.rows; ++r) lists[assign[r]].push_back(static_cast<int32_t>(r));
        std::vector<Id> parts;
        std::vector<std::vector<int32_t>> used;
        for (size_t k = 0; k < lists.size(); ++k) {
            if (lists[k].empty()) continue;
            parts.push_back(cluster_towers_[k].apply(g, this->params_, g.gather_rows(x, lists[k])));
            used.push_back(std::move(lists[k]));
        }
        return g.add(shared_.apply(g, this->params_, x), g.scatter_rows(parts, used, b.rows));
    }

    void after_step() override {
        if (last_assign_.empty()) return;
        adl_update(this->params_.value("adl.centroids"), last_repr_, last_assign_,
                   this->config_.adl_momentum);
    }

    size_t zero_norm_count() const { return zero_norm_; }

private:
    Mlp<S> shared_;
    std::vector<Mlp<S>> cluster_towers_;
    Tensor<S> last_repr_;
    std::vector<int32_t> last_assign_;
    size_t zero_norm_ = 0;
};

}  // namespace swr
