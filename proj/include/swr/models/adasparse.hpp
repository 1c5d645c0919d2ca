#pragma once

#include "swr/model.hpp"

namespace swr {

/// Per-dimension factors computed once; shared by the model and its tests.
/// pi = 2*alpha*sigmoid(u) * clamp(beta*(sigmoid(v) - 0.5) + 0.5, 0, 1).
template <class S>
typename Graph<S>::Id adasparse_factors(Graph<S>& g, typename Graph<S>::Id u, typename Graph<S>::Id v,
                                        double alpha, double beta) {
    auto scale_part = g.scale(g.sigmoid(u), 2.0 * alpha);
    auto bin_part = g.clamp01(g.add_const(g.scale(g.add_const(g.sigmoid(v), -0.5), beta), 0.5));
    return g.mul(scale_part, bin_part);
}

/// One backbone tower whose hidden-layer outputs are scaled by pruning
/// factors from lightweight nets over concat(scenario embedding, layer
/// input). The binarization half can hit exactly 0, sparsifying units.
template <class S>
class AdaSparseModel final : public Model<S> {
public:
    using Id = typename Model<S>::Id;

    AdaSparseModel(ModelConfig cfg, FeatureSpace space, uint64_t seed)
        : Model<S>(std::move(cfg), std::move(space), seed) {
        const size_t d = this->config_.embed_dim;
        this->add_scenario_table("emb.scenario", d);
        dims_ = this->stack_dims(this->bank_.out_dim());
        for (size_t i = 0; i + 1 < dims_.size(); ++i) {
            const bool last = i + 2 == dims_.size();
            layers_.emplace_back(this->params_, "net.l" + std::to_string(i), dims_[i], dims_[i + 1],
                                 last ? Act::none : Act::relu);
            if (!last) {
                const std::string pp = "prune" + std::to_string(i);
                prune_u_.emplace_back(this->params_, pp + ".u", d + dims_[i], dims_[i + 1], Act::none);
                prune_v_.emplace_back(this->params_, pp + ".v", d + dims_[i], dims_[i + 1], Act::none);
            }
        }
    }

    Id logits(Graph<S>& g, const Batch& b) override {
        this->check_batch(b);
        Id scen = this->scenario_emb(g, b, "emb.scenario");
        Id h = this->embed(g, b);
        for (size_t i = 0; i < layers_.size(); ++i) {
            Id out = layers_[i].apply(g, this->params_, h);
            if (i + 1 < layers_.size()) {
                Id pin = g.concat_cols({scen, h});
                Id pi = adasparse_factors(g, prune_u_[i].apply(g, this->params_, pin),
                                          prune_v_[i].apply(g, this->params_, pin), this->config_.alpha,
                                          this->config_.beta);
                out = g.mul(out, pi);
            }
            h = out;
        }
        return h;
    }

private:
    std::vector<size_t> dims_;
    std::vector<DenseLayer<S>> layers_;
    std::vector<DenseLayer<S>> prune_u_, prune_v_;
};

}  // namespace swr
