#pragma once

#include "swr/model.hpp"

namespace swr {

/// Shared hidden layer feeding one output tower per scenario.
template <class S>
class SharedBottomModel final : public Model<S> {
public:
    using Id = typename Model<S>::Id;

    SharedBottomModel(ModelConfig cfg, FeatureSpace space, uint64_t seed)
        : Model<S>(std::move(cfg), std::move(space), seed),
          bottom_(this->params_, "bottom", this->bank_.out_dim(), this->config_.bottom_dim, Act::relu) {
        for (size_t s = 0; s < this->space_.n_scenarios; ++s)
            towers_.emplace_back(this->params_, "tower.s" + std::to_string(s),
                                 this->stack_dims(this->config_.bottom_dim), Act::relu, Act::none);
    }

    Id logits(Graph<S>& g, const Batch& b) override {
        this->check_batch(b);
        Id h = bottom_.apply(g, this->params_, this->embed(g, b));
        return this->route_by_scenario(g, h, b, [&](Graph<S>& gg, size_t s, const std::vector<int32_t>&, Id xs) {
            return towers_[s].apply(gg, this->params_, xs);
        });
    }

private:
    DenseLayer<S> bottom_;
    std::vector<Mlp<S>> towers_;
};

}  // namespace swr
