#pragma once

#include "swr/model.hpp"

namespace swr {

/// Shared experts mixed by per-scenario gates, one tower per scenario.
template <class S>
class MmoeModel final : public Model<S> {
public:
    using Id = typename Model<S>::Id;

    MmoeModel(ModelConfig cfg, FeatureSpace space, uint64_t seed)
        : Model<S>(std::move(cfg), std::move(space), seed) {
        const size_t in = this->bank_.out_dim();
        for (size_t k = 0; k < this->config_.experts; ++k)
            experts_.emplace_back(this->params_, "expert.e" + std::to_string(k), in,
                                  this->config_.expert_dim, Act::relu);
        for (size_t s = 0; s < this->space_.n_scenarios; ++s) {
            gates_.emplace_back(this->params_, "gate.s" + std::to_string(s), in, this->config_.experts,
                                Act::none);
            towers_.emplace_back(this->params_, "tower.s" + std::to_string(s),
                                 this->stack_dims(this->config_.expert_dim), Act::relu, Act::none);
        }
    }

    Id logits(Graph<S>& g, const Batch& b) override {
        this->check_batch(b);
        Id x = this->embed(g, b);
        std::vector<Id> expert_out;
        for (const auto& e : experts_) expert_out.push_back(e.apply(g, this->params_, x));
        return this->route_by_scenario(
            g, x, b, [&](Graph<S>& gg, size_t s, const std::vector<int32_t>& rows, Id xs) {
                std::vector<Id> parts;
                for (Id eo : expert_out) parts.push_back(gg.gather_rows(eo, rows));
                Id mixed = moe_mix(gg, parts, gates_[s].apply(gg, this->params_, xs));
                return towers_[s].apply(gg, this->params_, mixed);
            });
    }

private:
    std::vector<DenseLayer<S>> experts_;
    std::vector<DenseLayer<S>> gates_;
    std::vector<Mlp<S>> towers_;
};

}  // namespace swr
