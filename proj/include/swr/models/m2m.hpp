#pragma once

#include "swr/model.hpp"

namespace swr {

/// Field embeddings become tokens (dense features projected to one extra
/// token). Token-wise residual feed-forward encoder layers, then a meta
/// attention whose per-example transform is generated from the scenario
/// representation z, then a meta tower of residual blocks whose weights and
/// biases are likewise generated from z. One task head.
template <class S>
class M2mModel final : public Model<S> {
public:
    using Id = typename Model<S>::Id;

    M2mModel(ModelConfig cfg, FeatureSpace space, uint64_t seed)
        : Model<S>(std::move(cfg), std::move(space), seed) {
        const size_t d = this->config_.embed_dim;
        this->add_scenario_table("emb.scenario", d);
        if (this->bank_.n_dense > 0)
            dense_proj_ = DenseLayer<S>(this->params_, "dense_proj", this->bank_.n_dense, d, Act::none);
        for (size_t l = 0; l < this->config_.enc_layers; ++l) {
            const std::string lp = "enc" + std::to_string(l);
            enc_.emplace_back(DenseLayer<S>(this->params_, lp + ".f0", d, this->config_.ff_dim, Act::relu),
                              DenseLayer<S>(this->params_, lp + ".f1", this->config_.ff_dim, d, Act::none));
        }
        std::vector<size_t> zdims{d};
        zdims.insert(zdims.end(), this->config_.meta_dims.begin(), this->config_.meta_dims.end());
        meta_z_ = Mlp<S>(this->params_, "meta_z", zdims, Act::relu, Act::none);
        const size_t mz = this->config_.meta_dims.back();
        att_gen_ = DenseLayer<S>(this->params_, "att.gen_w", mz, d * d, Act::none);
        this->params_.add("att.v", {d, 1}, Init::dense_uniform);
        for (size_t l = 0; l < this->config_.dec_layers; ++l) {
            const std::string lp = "mt" + std::to_string(l);
            dec_.emplace_back(DenseLayer<S>(this->params_, lp + ".gen_w", mz, d * d, Act::none),
                              DenseLayer<S>(this->params_, lp + ".gen_b", mz, d, Act::none));
        }
        head_ = DenseLayer<S>(this->params_, "head", d, 1, Act::none);
    }

    Id logits(Graph<S>& g, const Batch& b) override {
        this->check_batch(b);
        const size_t d = this->config_.embed_dim;
        std::vector<Id> tokens;
        for (size_t f = 0; f < this->bank_.paths.size(); ++f)
            tokens.push_back(this->bank_.field(g, this->params_, b, f));
        if (this->bank_.n_dense > 0)
            tokens.push_back(dense_proj_.apply(g, this->params_, this->bank_.dense_block(g, b)));

        for (const auto& [f0, f1] : enc_)
            for (auto& t : tokens)
                t = g.add(t, f1.apply(g, this->params_, f0.apply(g, this->params_, t)));

        Id z = meta_z_.apply(g, this->params_, this->scenario_emb(g, b, "emb.scenario"));

        Id att_w = att_gen_.apply(g, this->params_, z);
        std::vector<Id> scores;
        for (Id t : tokens)
            scores.push_back(g.matmul(g.tanh_(g.rowwise_matvec(att_w, t, d, d)), g.param(this->params_, "att.v")));
        Id att = g.softmax_rows(scores.size() == 1 ? scores[0] : g.concat_cols(scores));
        Id h = -1;
        for (size_t t = 0; t < tokens.size(); ++t) {
            Id term = g.rowwise_scale(tokens[t], g.slice_cols(att, t, 1));
            h = t == 0 ? term : g.add(h, term);
        }

        for (const auto& [gen_w, gen_b] : dec_) {
            Id w = gen_w.apply(g, this->params_, z);
            Id bias = gen_b.apply(g, this->params_, z);
            h = g.add(h, g.relu(g.add(g.rowwise_matvec(w, h, d, d), bias)));
        }
        return head_.apply(g, this->params_, h);
    }

private:
    DenseLayer<S> dense_proj_;
    std::vector<std::pair<DenseLayer<S>, DenseLayer<S>>> enc_;
    Mlp<S> meta_z_;
    DenseLayer<S> att_gen_;
    std::vector<std::pair<DenseLayer<S>, DenseLayer<S>>> dec_;
    DenseLayer<S> head_;
};

}  // namespace swr
