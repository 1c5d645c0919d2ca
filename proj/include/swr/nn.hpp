#pragma once

#include <string>
#include <vector>

#include "swr/graph.hpp"
#include "swr/param_store.hpp"

namespace swr {

enum class Act { none, relu, sigmoid, tanh };

template <class S>
typename Graph<S>::Id apply_act(Graph<S>& g, typename Graph<S>::Id x, Act act) {
    switch (act) {
        case Act::none: return x;
        case Act::relu: return g.relu(x);
        case Act::sigmoid: return g.sigmoid(x);
        case Act::tanh: return g.tanh_(x);
    }
    fail("unknown activation");
}

/// Affine layer computed from explicit weight/bias nodes (used when weights
/// come from a hyper-network rather than the store).
template <class S>
typename Graph<S>::Id dense_from(Graph<S>& g, typename Graph<S>::Id x, typename Graph<S>::Id w,
                                 typename Graph<S>::Id b, Act act) {
    return apply_act(g, g.add_bias(g.matmul(x, w), b), act);
}

/// Affine layer with parameters registered in a store under
/// `<prefix>.w` / `<prefix>.b`.
template <class S>
struct DenseLayer {
    std::string w_path, b_path;
    size_t in = 0, out = 0;
    Act act = Act::none;

    DenseLayer() = default;
    DenseLayer(ParameterStore<S>& store, const std::string& prefix, size_t in_dim, size_t out_dim, Act a)
        : w_path(prefix + ".w"), b_path(prefix + ".b"), in(in_dim), out(out_dim), act(a) {
        store.add(w_path, {in_dim, out_dim}, Init::dense_uniform);
        store.add(b_path, {out_dim}, Init::zeros);
    }

    size_t param_count() const { return in * out + out; }

    typename Graph<S>::Id apply(Graph<S>& g, ParameterStore<S>& store, typename Graph<S>::Id x) const {
        return dense_from(g, x, g.param(store, w_path), g.param(store, b_path), act);
    }
};

/// Stack of affine layers; `dims` runs input -> ... -> output. Hidden layers
/// use `hidden_act`, the last layer `final_act`.
template <class S>
struct Mlp {
    std::vector<DenseLayer<S>> layers;

    Mlp() = default;
    Mlp(ParameterStore<S>& store, const std::string& prefix, const std::vector<size_t>& dims, Act hidden_act,
        Act final_act) {
        require(dims.size() >= 2, "mlp '", prefix, "' needs at least input and output dims");
        for (size_t i = 0; i + 1 < dims.size(); ++i) {
            const bool last = i + 2 == dims.size();
            layers.emplace_back(store, prefix + ".l" + std::to_string(i), dims[i], dims[i + 1],
                                last ? final_act : hidden_act);
        }
    }

    size_t param_count() const {
        size_t n = 0;
        for (const auto& l : layers) n += l.param_count();
        return n;
    }

    typename Graph<S>::Id apply(Graph<S>& g, ParameterStore<S>& store, typename Graph<S>::Id x) const {
        typename Graph<S>::Id h = x;
        for (const auto& l : layers) h = l.apply(g, store, h);
        return h;
    }
};

/// Two-layer gate producing per-unit factors in (0, 2):
/// 2 * sigmoid(dense(relu(dense(x)))).
template <class S>
struct GateNU {
    DenseLayer<S> l1, l2;

    GateNU() = default;
    GateNU(ParameterStore<S>& store, const std::string& prefix, size_t in_dim, size_t hidden, size_t out_dim)
        : l1(store, prefix + ".l0", in_dim, hidden, Act::relu),
          l2(store, prefix + ".l1", hidden, out_dim, Act::sigmoid) {}

    size_t param_count() const { return l1.param_count() + l2.param_count(); }

    typename Graph<S>::Id apply(Graph<S>& g, ParameterStore<S>& store, typename Graph<S>::Id x) const {
        return g.scale(l2.apply(g, store, l1.apply(g, store, x)), 2.0);
    }
};

/// Mixture combine: sum_k softmax(gate_logits)[:, k] * expert_k.
template <class S>
typename Graph<S>::Id moe_mix(Graph<S>& g, const std::vector<typename Graph<S>::Id>& experts,
                              typename Graph<S>::Id gate_logits) {
    require(!experts.empty(), "moe_mix: no experts");
    require(g.value(gate_logits).shape[1] == experts.size(), "moe_mix: gate has ",
            g.value(gate_logits).shape[1], " columns for ", experts.size(), " experts");
    auto gate = g.softmax_rows(gate_logits);
    typename Graph<S>::Id acc = -1;
    for (size_t k = 0; k < experts.size(); ++k) {
        auto term = g.rowwise_scale(experts[k], g.slice_cols(gate, k, 1));
        acc = (k == 0) ? term : g.add(acc, term);
    }
    return acc;
}

}  // namespace swr
