#pragma once

#include "swr/model.hpp"

namespace swr {

/// A gate over concat(scenario embedding, detached feature embedding) emits
/// factors in (0,2) that rescale the live embedding before one shared tower.
/// The detached copy keeps the gate from backpropagating into the embedding
/// tables through its input.
template <class S>
class EpNetModel final : public Model<S> {
public:
    using Id = typename Model<S>::Id;

    EpNetModel(ModelConfig cfg, FeatureSpace space, uint64_t seed)
        : Model<S>(std::move(cfg), std::move(space), seed) {
        const size_t d = this->config_.embed_dim;
        const size_t in = this->bank_.out_dim();
        this->add_scenario_table("emb.scenario", d);
        gate_ = GateNU<S>(this->params_, "gate", d + in, this->config_.gate_hidden, in);
        tower_ = Mlp<S>(this->params_, "tower", this->stack_dims(in), Act::relu, Act::none);
    }

    Id logits(Graph<S>& g, const Batch& b) override {
        this->check_batch(b);
        Id x = this->embed(g, b);
        Id gate_in = g.concat_cols({this->scenario_emb(g, b, "emb.scenario"), g.stop_grad(x)});
        Id scaled = g.mul(x, gate_.apply(g, this->params_, gate_in));
        return tower_.apply(g, this->params_, scaled);
    }

private:
    GateNU<S> gate_;
    Mlp<S> tower_;
};

}  // namespace swr
