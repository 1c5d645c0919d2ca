#pragma once

#include "swr/model.hpp"

namespace swr {

/// Per-scenario towers whose hidden activations are rescaled by one shared
/// gate per hidden layer. Gates read concat(scenario embedding, detached
/// feature embedding), so personalization signals cannot reshape the
/// embedding tables through the gate input.
template <class S>
class PpNetModel final : public Model<S> {
public:
    using Id = typename Model<S>::Id;

    PpNetModel(ModelConfig cfg, FeatureSpace space, uint64_t seed)
        : Model<S>(std::move(cfg), std::move(space), seed) {
        const size_t d = this->config_.embed_dim;
        const size_t in = this->bank_.out_dim();
        this->add_scenario_table("emb.scenario", d);
        dims_ = this->stack_dims(in);
        for (size_t i = 0; i + 2 < dims_.size(); ++i)
            gates_.emplace_back(this->params_, "gate.l" + std::to_string(i), d + in,
                                this->config_.gate_hidden, dims_[i + 1]);
        for (size_t s = 0; s < this->space_.n_scenarios; ++s) {
            auto& tower = towers_.emplace_back();
            const std::string tp = "tower.s" + std::to_string(s);
            for (size_t i = 0; i + 1 < dims_.size(); ++i) {
                const bool last = i + 2 == dims_.size();
                tower.emplace_back(this->params_, tp + ".l" + std::to_string(i), dims_[i], dims_[i + 1],
                                   last ? Act::none : Act::relu);
            }
        }
    }

    Id logits(Graph<S>& g, const Batch& b) override {
        this->check_batch(b);
        Id x = this->embed(g, b);
        Id gate_in = g.concat_cols({this->scenario_emb(g, b, "emb.scenario"), g.stop_grad(x)});
        std::vector<Id> factors;
        for (const auto& gate : gates_) factors.push_back(gate.apply(g, this->params_, gate_in));
        return this->route_by_scenario(
            g, x, b, [&](Graph<S>& gg, size_t s, const std::vector<int32_t>& rows, Id xs) {
                Id h = xs;
                for (size_t i = 0; i < towers_[s].size(); ++i) {
                    h = towers_[s][i].apply(gg, this->params_, h);
                    if (i < factors.size()) h = gg.mul(h, gg.gather_rows(factors[i], rows));
                }
                return h;
            });
    }

private:
    std::vector<size_t> dims_;
    std::vector<GateNU<S>> gates_;
    std::vector<std::vector<DenseLayer<S>>> towers_;
};

}  // namespace swr
