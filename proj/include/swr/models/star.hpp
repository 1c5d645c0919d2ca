#pragma once

#include "swr/model.hpp"

namespace swr {

/// Per layer, effective weights are shared ⊙ scenario and biases shared +
/// scenario. Scenario weights start at ones and biases at zeros, so every
/// tower initially equals the shared network. A single-layer auxiliary net on
/// a scenario embedding adds its scalar output to the main logit.
template <class S>
class StarModel final : public Model<S> {
public:
    using Id = typename Model<S>::Id;

    StarModel(ModelConfig cfg, FeatureSpace space, uint64_t seed)
        : Model<S>(std::move(cfg), std::move(space), seed) {
        dims_ = this->stack_dims(this->bank_.out_dim());
        for (size_t i = 0; i + 1 < dims_.size(); ++i) {
            const std::string lp = "star.l" + std::to_string(i);
            this->params_.add(lp + ".shared.w", {dims_[i], dims_[i + 1]}, Init::dense_uniform);
            this->params_.add(lp + ".shared.b", {dims_[i + 1]}, Init::zeros);
            for (size_t s = 0; s < this->space_.n_scenarios; ++s) {
                const std::string sp = lp + ".s" + std::to_string(s);
                this->params_.add(sp + ".w", {dims_[i], dims_[i + 1]}, Init::ones);
                this->params_.add(sp + ".b", {dims_[i + 1]}, Init::zeros);
            }
        }
        this->add_scenario_table("emb.scenario_aux", this->config_.aux_dim);
        aux_ = DenseLayer<S>(this->params_, "aux", this->config_.aux_dim, 1, Act::none);
    }

    Id logits(Graph<S>& g, const Batch& b) override {
        this->check_batch(b);
        Id x = this->embed(g, b);
        Id main = this->route_by_scenario(
            g, x, b, [&](Graph<S>& gg, size_t s, const std::vector<int32_t>&, Id xs) {
                Id h = xs;
                for (size_t i = 0; i + 1 < dims_.size(); ++i) {
                    const std::string lp = "star.l" + std::to_string(i);
                    const std::string sp = lp + ".s" + std::to_string(s);
                    Id w = gg.mul(gg.param(this->params_, lp + ".shared.w"), gg.param(this->params_, sp + ".w"));
                    Id bias = gg.add(gg.param(this->params_, lp + ".shared.b"),
                                     gg.param(this->params_, sp + ".b"));
                    const bool last = i + 2 == dims_.size();
                    h = dense_from(gg, h, w, bias, last ? Act::none : Act::relu);
                }
                return h;
            });
        Id aux = aux_.apply(g, this->params_, this->scenario_emb(g, b, "emb.scenario_aux"));
        return g.add(main, aux);
    }

private:
    std::vector<size_t> dims_;
    DenseLayer<S> aux_;
};

}  // namespace swr
