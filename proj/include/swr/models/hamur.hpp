#pragma once

#include "swr/model.hpp"

namespace swr {

/// Shared backbone with one adapter per layer whose down/up projection
/// matrices come from a hyper-network over the scenario embedding:
/// h + LN(Up(relu(Down(h)))). Up weights start at zero so every adapter is
/// the exact identity at init while its gradients stay live through the
/// generated Up matrix.
template <class S>
class HamurModel final : public Model<S> {
public:
    using Id = typename Model<S>::Id;

    HamurModel(ModelConfig cfg, FeatureSpace space, uint64_t seed)
        : Model<S>(std::move(cfg), std::move(space), seed) {
        const size_t d = this->config_.embed_dim;
        const size_t k = this->config_.hyper_matrix;
        this->add_scenario_table("emb.scenario", d);
        trunk_ = DenseLayer<S>(this->params_, "hyper.trunk", d, this->config_.hyper_hidden, Act::relu);
        dims_ = {this->bank_.out_dim()};
        dims_.insert(dims_.end(), this->config_.tower_dims.begin(), this->config_.tower_dims.end());
        for (size_t i = 0; i + 1 < dims_.size(); ++i) {
            layers_.emplace_back(this->params_, "net.l" + std::to_string(i), dims_[i], dims_[i + 1],
                                 Act::relu);
            const size_t h = dims_[i + 1];
            const std::string hp = "hyper.head" + std::to_string(i);
            this->params_.add(hp + ".wd", {this->config_.hyper_hidden, h * k}, Init::dense_uniform);
            this->params_.add(hp + ".bd", {h * k}, Init::zeros);
            this->params_.add(hp + ".wu", {this->config_.hyper_hidden, h * k}, Init::zeros);
            this->params_.add(hp + ".bu", {h * k}, Init::zeros);
            const std::string ap = "adapter" + std::to_string(i);
            this->params_.add(ap + ".ln.g", {h}, Init::ones);
            this->params_.add(ap + ".ln.b", {h}, Init::zeros);
        }
        head_ = DenseLayer<S>(this->params_, "head", dims_.back(), 1, Act::none);
    }

    Id logits(Graph<S>& g, const Batch& b) override {
        this->check_batch(b);
        const size_t k = this->config_.hyper_matrix;
        Id trunk = trunk_.apply(g, this->params_, this->scenario_emb(g, b, "emb.scenario"));
        Id h = this->embed(g, b);
        for (size_t i = 0; i < layers_.size(); ++i) {
            h = layers_[i].apply(g, this->params_, h);
            const size_t width = dims_[i + 1];
            const std::string hp = "hyper.head" + std::to_string(i);
            Id wd = dense_from(g, trunk, g.param(this->params_, hp + ".wd"),
                               g.param(this->params_, hp + ".bd"), Act::none);
            Id wu = dense_from(g, trunk, g.param(this->params_, hp + ".wu"),
                               g.param(this->params_, hp + ".bu"), Act::none);
            Id up = g.rowwise_matvec(wu, g.relu(g.rowwise_matvec(wd, h, width, k)), k, width);
            const std::string ap = "adapter" + std::to_string(i);
            Id branch = g.layer_norm_rows(up, g.param(this->params_, ap + ".ln.g"),
                                          g.param(this->params_, ap + ".ln.b"));
            h = g.add(h, branch);
        }
        return head_.apply(g, this->params_, h);
    }

private:
    std::vector<size_t> dims_;
    DenseLayer<S> trunk_;
    std::vector<DenseLayer<S>> layers_;
    DenseLayer<S> head_;
};

}  // namespace swr
