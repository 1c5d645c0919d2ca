#pragma once

#include "swr/model.hpp"

namespace swr {

/// Three expert groups (shared, domain, task). The domain group is mixed by
/// per-scenario gates, the other two by shared gates. Learned softmax scalars
/// fuse shared with domain per scenario, then that blend with the task mix,
/// before a single task tower.
template <class S>
class M3oeModel final : public Model<S> {
public:
    using Id = typename Model<S>::Id;

    M3oeModel(ModelConfig cfg, FeatureSpace space, uint64_t seed)
        : Model<S>(std::move(cfg), std::move(space), seed) {
        const size_t in = this->bank_.out_dim();
        const size_t e = this->config_.expert_dim;
        const size_t k = this->config_.n_experts_m3oe;
        auto group = [&](std::vector<DenseLayer<S>>& dst, const char* name) {
            for (size_t i = 0; i < k; ++i)
                dst.emplace_back(this->params_, std::string("expert.") + name + std::to_string(i), in, e,
                                 Act::relu);
        };
        group(shared_experts_, "sh");
        group(domain_experts_, "dom");
        group(task_experts_, "task");
        shared_gate_ = DenseLayer<S>(this->params_, "gate.shared", in, k, Act::none);
        for (size_t s = 0; s < this->space_.n_scenarios; ++s)
            domain_gates_.emplace_back(this->params_, "gate.s" + std::to_string(s), in, k, Act::none);
        task_gate_ = DenseLayer<S>(this->params_, "gate.task", in, k, Act::none);
        this->params_.add("fuse.domain", {this->space_.n_scenarios, 2}, Init::zeros);
        this->params_.add("fuse.task", {1, 2}, Init::zeros);
        tower_ = Mlp<S>(this->params_, "tower", this->stack_dims(e), Act::relu, Act::none);
    }

    Id logits(Graph<S>& g, const Batch& b) override {
        this->check_batch(b);
        Id x = this->embed(g, b);
        auto outputs = [&](const std::vector<DenseLayer<S>>& group) {
            std::vector<Id> out;
            for (const auto& ex : group) out.push_back(ex.apply(g, this->params_, x));
            return out;
        };
        Id shared_mix = moe_mix(g, outputs(shared_experts_), shared_gate_.apply(g, this->params_, x));
        Id task_mix = moe_mix(g, outputs(task_experts_), task_gate_.apply(g, this->params_, x));
        auto domain_out = outputs(domain_experts_);
        Id domain_mix = this->route_by_scenario(
            g, x, b, [&](Graph<S>& gg, size_t s, const std::vector<int32_t>& rows, Id xs) {
                std::vector<Id> parts;
                for (Id d : domain_out) parts.push_back(gg.gather_rows(d, rows));
                return moe_mix(gg, parts, domain_gates_[s].apply(gg, this->params_, xs));
            });

        Id wd = g.softmax_rows(g.gather_rows(g.param(this->params_, "fuse.domain"), b.scenario));
        Id level1 = g.add(g.rowwise_scale(shared_mix, g.slice_cols(wd, 0, 1)),
                          g.rowwise_scale(domain_mix, g.slice_cols(wd, 1, 1)));
        Id wt = g.softmax_rows(
            g.gather_rows(g.param(this->params_, "fuse.task"), std::vector<int32_t>(b.rows, 0)));
        Id level2 = g.add(g.rowwise_scale(level1, g.slice_cols(wt, 0, 1)),
                          g.rowwise_scale(task_mix, g.slice_cols(wt, 1, 1)));
        return tower_.apply(g, this->params_, level2);
    }

private:
    std::vector<DenseLayer<S>> shared_experts_, domain_experts_, task_experts_;
    DenseLayer<S> shared_gate_, task_gate_;
    std::vector<DenseLayer<S>> domain_gates_;
    Mlp<S> tower_;
};

}  // namespace swr
