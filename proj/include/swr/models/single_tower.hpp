#pragma once

#include "swr/model.hpp"

namespace swr {

/// Scenario-blind control: one MLP over all features, scenario id unused.
template <class S>
class SingleTowerModel final : public Model<S> {
public:
    using Id = typename Model<S>::Id;

    SingleTowerModel(ModelConfig cfg, FeatureSpace space, uint64_t seed)
        : Model<S>(std::move(cfg), std::move(space), seed),
          tower_(this->params_, "tower", this->stack_dims(this->bank_.out_dim()), Act::relu, Act::none) {}

    Id logits(Graph<S>& g, const Batch& b) override {
        this->check_batch(b);
        return tower_.apply(g, this->params_, this->embed(g, b));
    }

private:
    Mlp<S> tower_;
};

}  // namespace swr
