#pragma once

#include "swr/model.hpp"

namespace swr {

/// Scenario-conditioned sigmoid attention reweights each sparse field
/// embedding; scenario-shared plus one scenario-specific expert are mixed by
/// a gate driven by the scenario embedding, then fed to one shared tower.
template <class S>
class SarNetModel final : public Model<S> {
public:
    using Id = typename Model<S>::Id;

    SarNetModel(ModelConfig cfg, FeatureSpace space, uint64_t seed)
        : Model<S>(std::move(cfg), std::move(space), seed) {
        const size_t d = this->config_.embed_dim;
        const size_t in = this->bank_.out_dim();
        const size_t e = this->config_.expert_dim;
        this->add_scenario_table("emb.scenario", d);
        if (this->bank_.paths.size() > 0)
            att_ = DenseLayer<S>(this->params_, "field_att", d, this->bank_.paths.size(), Act::sigmoid);
        for (size_t k = 0; k < this->config_.shared_experts; ++k)
            shared_experts_.emplace_back(this->params_, "expert.sh" + std::to_string(k), in, e, Act::relu);
        for (size_t s = 0; s < this->space_.n_scenarios; ++s)
            specific_experts_.emplace_back(this->params_, "expert.s" + std::to_string(s), in, e, Act::relu);
        gate_ = DenseLayer<S>(this->params_, "gate", d, this->config_.shared_experts + 1, Act::none);
        tower_ = Mlp<S>(this->params_, "tower", this->stack_dims(e), Act::relu, Act::none);
    }

    Id logits(Graph<S>& g, const Batch& b) override {
        this->check_batch(b);
        Id scen = this->scenario_emb(g, b, "emb.scenario");
        std::vector<Id> parts;
        if (this->bank_.paths.size() > 0) {
            Id att = att_.apply(g, this->params_, scen);
            for (size_t f = 0; f < this->bank_.paths.size(); ++f)
                parts.push_back(g.rowwise_scale(this->bank_.field(g, this->params_, b, f),
                                                g.slice_cols(att, f, 1)));
        }
        if (this->bank_.n_dense > 0) parts.push_back(this->bank_.dense_block(g, b));
        Id x = parts.size() == 1 ? parts[0] : g.concat_cols(parts);

        Id mixed = this->route_by_scenario(
            g, x, b, [&](Graph<S>& gg, size_t s, const std::vector<int32_t>& rows, Id xs) {
                std::vector<Id> experts;
                for (const auto& ex : shared_experts_) experts.push_back(ex.apply(gg, this->params_, xs));
                experts.push_back(specific_experts_[s].apply(gg, this->params_, xs));
                Id gate_in = gg.gather_rows(scen, rows);
                return moe_mix(gg, experts, gate_.apply(gg, this->params_, gate_in));
            });
        return tower_.apply(g, this->params_, mixed);
    }

private:
    DenseLayer<S> att_;
    std::vector<DenseLayer<S>> shared_experts_;
    std::vector<DenseLayer<S>> specific_experts_;
    DenseLayer<S> gate_;
    Mlp<S> tower_;
};

}  // namespace swr
