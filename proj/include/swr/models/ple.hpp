#pragma once

#include "swr/model.hpp"

namespace swr {

/// Layered extraction: per layer, shared experts plus per-scenario specific
/// experts. A scenario gate mixes shared + own experts from the scenario
/// stream; the shared gate (only feeding a next layer) mixes all experts from
/// the shared stream. Every example flows through every stream; its own
/// scenario's final state is selected by routing into that scenario's tower.
template <class S>
class PleModel final : public Model<S> {
public:
    using Id = typename Model<S>::Id;

    PleModel(ModelConfig cfg, FeatureSpace space, uint64_t seed)
        : Model<S>(std::move(cfg), std::move(space), seed) {
        const size_t L = this->config_.cgc_layers;
        const size_t ns = this->space_.n_scenarios;
        const size_t e = this->config_.expert_dim;
        for (size_t l = 0; l < L; ++l) {
            const size_t in = l == 0 ? this->bank_.out_dim() : e;
            const std::string lp = "cgc" + std::to_string(l);
            auto& sh = sh_experts_.emplace_back();
            for (size_t k = 0; k < this->config_.shared_experts; ++k)
                sh.emplace_back(this->params_, lp + ".shared.e" + std::to_string(k), in, e, Act::relu);
            auto& sp = sp_experts_.emplace_back();
            auto& gates = spec_gates_.emplace_back();
            for (size_t s = 0; s < ns; ++s) {
                auto& es = sp.emplace_back();
                const std::string sp_prefix = lp + ".s" + std::to_string(s);
                for (size_t j = 0; j < this->config_.specific_experts; ++j)
                    es.emplace_back(this->params_, sp_prefix + ".e" + std::to_string(j), in, e, Act::relu);
                gates.emplace_back(this->params_, lp + ".gate.s" + std::to_string(s), in,
                                   this->config_.shared_experts + this->config_.specific_experts, Act::none);
            }
            if (l + 1 < L)
                shared_gates_.emplace_back(this->params_, lp + ".gate.shared", in,
                                           this->config_.shared_experts + ns * this->config_.specific_experts,
                                           Act::none);
        }
        for (size_t s = 0; s < ns; ++s)
            towers_.emplace_back(this->params_, "tower.s" + std::to_string(s), this->stack_dims(e), Act::relu,
                                 Act::none);
    }

    Id logits(Graph<S>& g, const Batch& b) override {
        this->check_batch(b);
        const size_t L = this->config_.cgc_layers;
        const size_t ns = this->space_.n_scenarios;
        Id x = this->embed(g, b);
        Id shared_state = x;
        std::vector<Id> state(ns, x);
        for (size_t l = 0; l < L; ++l) {
            std::vector<Id> sh_out;
            for (const auto& ex : sh_experts_[l]) sh_out.push_back(ex.apply(g, this->params_, shared_state));
            std::vector<std::vector<Id>> sp_out(ns);
            for (size_t s = 0; s < ns; ++s)
                for (const auto& ex : sp_experts_[l][s]) sp_out[s].push_back(ex.apply(g, this->params_, state[s]));

            std::vector<Id> next(ns);
            for (size_t s = 0; s < ns; ++s) {
                std::vector<Id> mix = sh_out;
                mix.insert(mix.end(), sp_out[s].begin(), sp_out[s].end());
                next[s] = moe_mix(g, mix, spec_gates_[l][s].apply(g, this->params_, state[s]));
            }
            if (l + 1 < L) {
                std::vector<Id> all = sh_out;
                for (size_t s = 0; s < ns; ++s) all.insert(all.end(), sp_out[s].begin(), sp_out[s].end());
                shared_state = moe_mix(g, all, shared_gates_[l].apply(g, this->params_, shared_state));
            }
            state = std::move(next);
        }
        auto lists = this->scenario_rows(b);
        std::vector<Id> parts;
        std::vector<std::vector<int32_t>> used;
        for (size_t s = 0; s < ns; ++s) {
            if (lists[s].empty()) continue;
            parts.push_back(towers_[s].apply(g, this->params_, g.gather_rows(state[s], lists[s])));
            used.push_back(std::move(lists[s]));
        }
        return g.scatter_rows(parts, used, b.rows);
    }

private:
    std::vector<std::vector<DenseLayer<S>>> sh_experts_;               // [layer][k]
    std::vector<std::vector<std::vector<DenseLayer<S>>>> sp_experts_;  // [layer][scenario][j]
    std::vector<std::vector<DenseLayer<S>>> spec_gates_;               // [layer][scenario]
    std::vector<DenseLayer<S>> shared_gates_;                          // [layer], absent for the last layer
    std::vector<Mlp<S>> towers_;
};

}  // namespace swr
