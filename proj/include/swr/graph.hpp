#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "swr/param_store.hpp"
#include "swr/tensor.hpp"

namespace swr {

template <class S>
S stable_sigmoid(S z) {
    if (z >= S(0)) {
        const S e = std::exp(-z);
        return S(1) / (S(1) + e);
    }
    const S e = std::exp(z);
    return e / (S(1) + e);
}

template <class S>
S softplus(S z) {
    // max(z,0) + log1p(exp(-|z|))
    const S a = z > S(0) ? z : S(0);
    return a + std::log1p(std::exp(-(z < S(0) ? -z : z)));
}

/// Reverse-mode tape over dense tensors. Nodes are created eagerly (forward
/// value computed at construction); backward() walks the tape in reverse
/// creation order, which is a valid topological order by construction.
///
/// One Graph instance per forward/backward pass. Parameters are leaves bound
/// to a ParameterStore; after backward(), flush_param_grads() accumulates
/// their node gradients into the store's gradient buffers.
template <class S>
class Graph {
public:
    using Id = int;

    explicit Graph(bool validate_finite = false) : validate_finite_(validate_finite) {}

    // ---- leaves ----

    Id input(Tensor<S> value, bool requires_grad = false, const char* label = "input") {
        return add_node(std::move(value), {}, requires_grad, label, nullptr);
    }

    Id param(ParameterStore<S>& store, const std::string& path) {
        const size_t entry = store.index_of(path);
        auto key = std::make_pair(&store, entry);
        auto it = param_nodes_.find(key);
        if (it != param_nodes_.end()) return it->second;
        Id id = add_node(store.entry(entry).value, {}, true, "param", nullptr);
        param_nodes_[key] = id;
        param_bindings_.push_back({&store, entry, id});
        return id;
    }

    // ---- elementwise / broadcast ----

    Id add(Id a, Id b) {
        check_same_shape(a, b, "add");
        Tensor<S> out = node(a).value;
        const auto& bv = node(b).value.values;
        for (size_t i = 0; i < out.values.size(); ++i) out.values[i] += bv[i];
        return add_node(std::move(out), {a, b}, false, "add", [](Graph& g, Node& n) {
            g.accumulate(n.parents[0], n.grad.values.data(), n.grad.numel());
            g.accumulate(n.parents[1], n.grad.values.data(), n.grad.numel());
        });
    }

    Id sub(Id a, Id b) {
        check_same_shape(a, b, "sub");
        Tensor<S> out = node(a).value;
        const auto& bv = node(b).value.values;
        for (size_t i = 0; i < out.values.size(); ++i) out.values[i] -= bv[i];
        return add_node(std::move(out), {a, b}, false, "sub", [](Graph& g, Node& n) {
            g.accumulate(n.parents[0], n.grad.values.data(), n.grad.numel());
            if (g.node(n.parents[1]).needs_grad) {
                auto& pg = g.ensure_grad(n.parents[1]);
                for (size_t i = 0; i < n.grad.values.size(); ++i) pg.values[i] -= n.grad.values[i];
            }
        });
    }

    Id mul(Id a, Id b) {
        check_same_shape(a, b, "mul");
        Tensor<S> out = node(a).value;
        const auto& bv = node(b).value.values;
        for (size_t i = 0; i < out.values.size(); ++i) out.values[i] *= bv[i];
        return add_node(std::move(out), {a, b}, false, "mul", [](Graph& g, Node& n) {
            const auto& av = g.node(n.parents[0]).value.values;
            const auto& bv2 = g.node(n.parents[1]).value.values;
            if (g.node(n.parents[0]).needs_grad) {
                auto& pg = g.ensure_grad(n.parents[0]);
                for (size_t i = 0; i < n.grad.values.size(); ++i) pg.values[i] += n.grad.values[i] * bv2[i];
            }
            if (g.node(n.parents[1]).needs_grad) {
                auto& pg = g.ensure_grad(n.parents[1]);
                for (size_t i = 0; i < n.grad.values.size(); ++i) pg.values[i] += n.grad.values[i] * av[i];
            }
        });
    }

    Id scale(Id x, double k) {
        Tensor<S> out = node(x).value;
        for (auto& v : out.values) v = static_cast<S>(v * k);
        return add_node(std::move(out), {x}, false, "scale", [k](Graph& g, Node& n) {
            if (!g.node(n.parents[0]).needs_grad) return;
            auto& pg = g.ensure_grad(n.parents[0]);
            for (size_t i = 0; i < n.grad.values.size(); ++i)
                pg.values[i] += static_cast<S>(n.grad.values[i] * k);
        });
    }

    Id add_const(Id x, double c) {
        Tensor<S> out = node(x).value;
        for (auto& v : out.values) v = static_cast<S>(v + c);
        return add_node(std::move(out), {x}, false, "add_const", [](Graph& g, Node& n) {
            g.accumulate(n.parents[0], n.grad.values.data(), n.grad.numel());
        });
    }

    // ---- activations ----

    Id relu(Id x) {
        Tensor<S> out = node(x).value;
        for (auto& v : out.values)
            if (v < S(0)) v = S(0);
        return add_node(std::move(out), {x}, false, "relu", [](Graph& g, Node& n) {
            if (!g.node(n.parents[0]).needs_grad) return;
            const auto& xv = g.node(n.parents[0]).value.values;
            auto& pg = g.ensure_grad(n.parents[0]);
            for (size_t i = 0; i < n.grad.values.size(); ++i)
                if (xv[i] > S(0)) pg.values[i] += n.grad.values[i];
        });
    }

    Id sigmoid(Id x) {
        Tensor<S> out = node(x).value;
        for (auto& v : out.values) v = stable_sigmoid(v);
        return add_node(std::move(out), {x}, false, "sigmoid", [](Graph& g, Node& n) {
            if (!g.node(n.parents[0]).needs_grad) return;
            auto& pg = g.ensure_grad(n.parents[0]);
            for (size_t i = 0; i < n.grad.values.size(); ++i) {
                const S y = n.value.values[i];
                pg.values[i] += n.grad.values[i] * y * (S(1) - y);
            }
        });
    }

    Id tanh_(Id x) {
        Tensor<S> out = node(x).value;
        for (auto& v : out.values) v = std::tanh(v);
        return add_node(std::move(out), {x}, false, "tanh", [](Graph& g, Node& n) {
            if (!g.node(n.parents[0]).needs_grad) return;
            auto& pg = g.ensure_grad(n.parents[0]);
            for (size_t i = 0; i < n.grad.values.size(); ++i) {
                const S y = n.value.values[i];
                pg.values[i] += n.grad.values[i] * (S(1) - y * y);
            }
        });
    }

    /// clamp(x, 0, 1); subgradient 1 strictly inside, 0 outside.
    Id clamp01(Id x) {
        Tensor<S> out = node(x).value;
        for (auto& v : out.values) v = v < S(0) ? S(0) : (v > S(1) ? S(1) : v);
        return add_node(std::move(out), {x}, false, "clamp01", [](Graph& g, Node& n) {
            if (!g.node(n.parents[0]).needs_grad) return;
            const auto& xv = g.node(n.parents[0]).value.values;
            auto& pg = g.ensure_grad(n.parents[0]);
            for (size_t i = 0; i < n.grad.values.size(); ++i)
                if (xv[i] > S(0) && xv[i] < S(1)) pg.values[i] += n.grad.values[i];
        });
    }

    // ---- linear algebra ----

    Id matmul(Id a, Id b) {
        const auto& av = node(a).value;
        const auto& bv = node(b).value;
        require(av.rank() == 2 && bv.rank() == 2 && av.shape[1] == bv.shape[0],
                "matmul shape mismatch: ", shape_str(av.shape), " vs ", shape_str(bv.shape));
        Tensor<S> out({av.shape[0], bv.shape[1]});
        cmap(out).noalias() = cmap(av) * cmap(bv);
        return add_node(std::move(out), {a, b}, false, "matmul", [](Graph& g, Node& n) {
            const auto& A = g.node(n.parents[0]).value;
            const auto& B = g.node(n.parents[1]).value;
            if (g.node(n.parents[0]).needs_grad) {
                auto& ga = g.ensure_grad(n.parents[0]);
                cmap(ga).noalias() += cmap(n.grad) * cmap(B).transpose();
            }
            if (g.node(n.parents[1]).needs_grad) {
                auto& gb = g.ensure_grad(n.parents[1]);
                cmap(gb).noalias() += cmap(A).transpose() * cmap(n.grad);
            }
        });
    }

    /// x: n x q, b: vector of length q, broadcast over rows.
    Id add_bias(Id x, Id b) {
        const auto& xv = node(x).value;
        const auto& bv = node(b).value;
        require(xv.rank() == 2 && bv.numel() == xv.shape[1], "add_bias mismatch: ", shape_str(xv.shape),
                " vs ", shape_str(bv.shape));
        Tensor<S> out = xv;
        const size_t n = xv.shape[0], q = xv.shape[1];
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < q; ++j) out.values[i * q + j] += bv.values[j];
        return add_node(std::move(out), {x, b}, false, "add_bias", [](Graph& g, Node& nd) {
            const size_t n = nd.value.shape[0], q = nd.value.shape[1];
            g.accumulate(nd.parents[0], nd.grad.values.data(), nd.grad.numel());
            if (g.node(nd.parents[1]).needs_grad) {
                auto& gb = g.ensure_grad(nd.parents[1]);
                for (size_t i = 0; i < n; ++i)
                    for (size_t j = 0; j < q; ++j) gb.values[j] += nd.grad.values[i * q + j];
            }
        });
    }

    /// Rows of `table` selected by index; duplicate indices accumulate on the
    /// backward pass. `label` names the feature in range errors.
    Id embedding_rows(Id table, const std::vector<int32_t>& indices, const std::string& label) {
        const auto& tv = node(table).value;
        require(tv.rank() == 2, "embedding table must be 2-D, got ", shape_str(tv.shape));
        const size_t v = tv.shape[0], d = tv.shape[1];
        for (size_t i = 0; i < indices.size(); ++i)
            require(indices[i] >= 0 && static_cast<size_t>(indices[i]) < v, "embedding index out of range for '",
                    label, "': index ", indices[i], " not in [0, ", v, ")");
        Tensor<S> out({indices.size(), d});
        for (size_t i = 0; i < indices.size(); ++i)
            std::copy_n(tv.values.data() + static_cast<size_t>(indices[i]) * d, d, out.values.data() + i * d);
        auto idx = indices;
        return add_node(std::move(out), {table}, false, "embedding",
                        [idx = std::move(idx), d](Graph& g, Node& n) {
                            if (!g.node(n.parents[0]).needs_grad) return;
                            auto& gt = g.ensure_grad(n.parents[0]);
                            for (size_t i = 0; i < idx.size(); ++i) {
                                S* dst = gt.values.data() + static_cast<size_t>(idx[i]) * d;
                                const S* src = n.grad.values.data() + i * d;
                                for (size_t j = 0; j < d; ++j) dst[j] += src[j];
                            }
                        });
    }

    // ---- shape ops ----

    Id reshape(Id x, std::vector<size_t> shape) {
        const auto& xv = node(x).value;
        require(shape_numel(shape) == xv.numel(), "reshape ", shape_str(xv.shape), " -> ", shape_str(shape),
                " changes element count");
        Tensor<S> out(std::move(shape), xv.values);
        return add_node(std::move(out), {x}, false, "reshape", [](Graph& g, Node& n) {
            g.accumulate(n.parents[0], n.grad.values.data(), n.grad.numel());
        });
    }

    Id concat_cols(const std::vector<Id>& parts) {
        require(!parts.empty(), "concat_cols: empty part list");
        const size_t n = node(parts[0]).value.shape[0];
        size_t total = 0;
        for (Id p : parts) {
            const auto& pv = node(p).value;
            require(pv.rank() == 2 && pv.shape[0] == n, "concat_cols: row mismatch ", shape_str(pv.shape));
            total += pv.shape[1];
        }
        Tensor<S> out({n, total});
        size_t off = 0;
        for (Id p : parts) {
            const auto& pv = node(p).value;
            const size_t c = pv.shape[1];
            for (size_t i = 0; i < n; ++i)
                std::copy_n(pv.values.data() + i * c, c, out.values.data() + i * total + off);
            off += c;
        }
        return add_node(std::move(out), parts, false, "concat_cols", [](Graph& g, Node& nd) {
            const size_t n = nd.value.shape[0], total = nd.value.shape[1];
            size_t off = 0;
            for (Id p : nd.parents) {
                const size_t c = g.node(p).value.shape[1];
                if (g.node(p).needs_grad) {
                    auto& pg = g.ensure_grad(p);
                    for (size_t i = 0; i < n; ++i) {
                        const S* src = nd.grad.values.data() + i * total + off;
                        S* dst = pg.values.data() + i * c;
                        for (size_t j = 0; j < c; ++j) dst[j] += src[j];
                    }
                }
                off += c;
            }
        });
    }

    Id slice_cols(Id x, size_t begin, size_t count) {
        const auto& xv = node(x).value;
        require(xv.rank() == 2 && begin + count <= xv.shape[1], "slice_cols [", begin, ", ", begin + count,
                ") out of range for ", shape_str(xv.shape));
        const size_t n = xv.shape[0], c = xv.shape[1];
        Tensor<S> out({n, count});
        for (size_t i = 0; i < n; ++i)
            std::copy_n(xv.values.data() + i * c + begin, count, out.values.data() + i * count);
        return add_node(std::move(out), {x}, false, "slice_cols", [begin](Graph& g, Node& nd) {
            if (!g.node(nd.parents[0]).needs_grad) return;
            auto& pg = g.ensure_grad(nd.parents[0]);
            const size_t n = nd.value.shape[0], count = nd.value.shape[1], c = pg.shape[1];
            for (size_t i = 0; i < n; ++i) {
                const S* src = nd.grad.values.data() + i * count;
                S* dst = pg.values.data() + i * c + begin;
                for (size_t j = 0; j < count; ++j) dst[j] += src[j];
            }
        });
    }

    Id gather_rows(Id x, const std::vector<int32_t>& rows) {
        const auto& xv = node(x).value;
        require(xv.rank() == 2, "gather_rows needs 2-D input");
        const size_t c = xv.shape[1];
        for (int32_t r : rows)
            require(r >= 0 && static_cast<size_t>(r) < xv.shape[0], "gather_rows: row ", r, " out of range");
        Tensor<S> out({rows.size(), c});
        for (size_t i = 0; i < rows.size(); ++i)
            std::copy_n(xv.values.data() + static_cast<size_t>(rows[i]) * c, c, out.values.data() + i * c);
        auto idx = rows;
        return add_node(std::move(out), {x}, false, "gather_rows", [idx = std::move(idx)](Graph& g, Node& nd) {
            if (!g.node(nd.parents[0]).needs_grad) return;
            auto& pg = g.ensure_grad(nd.parents[0]);
            const size_t c = nd.value.shape[1];
            for (size_t i = 0; i < idx.size(); ++i) {
                const S* src = nd.grad.values.data() + i * c;
                S* dst = pg.values.data() + static_cast<size_t>(idx[i]) * c;
                for (size_t j = 0; j < c; ++j) dst[j] += src[j];
            }
        });
    }

    /// Sum-scatter of per-group row blocks back into an n-row output.
    /// Inverse of gather_rows when the index lists partition [0, n).
    Id scatter_rows(const std::vector<Id>& parts, const std::vector<std::vector<int32_t>>& row_lists, size_t n) {
        require(parts.size() == row_lists.size(), "scatter_rows: part/index count mismatch");
        require(!parts.empty(), "scatter_rows: empty part list");
        const size_t c = node(parts[0]).value.shape[1];
        for (size_t k = 0; k < parts.size(); ++k) {
            const auto& pv = node(parts[k]).value;
            require(pv.rank() == 2 && pv.shape[1] == c && pv.shape[0] == row_lists[k].size(),
                    "scatter_rows: bad part shape ", shape_str(pv.shape));
        }
        Tensor<S> out({n, c});
        for (size_t k = 0; k < parts.size(); ++k) {
            const auto& pv = node(parts[k]).value;
            for (size_t i = 0; i < row_lists[k].size(); ++i) {
                const int32_t r = row_lists[k][i];
                require(r >= 0 && static_cast<size_t>(r) < n, "scatter_rows: row ", r, " out of range");
                S* dst = out.values.data() + static_cast<size_t>(r) * c;
                const S* src = pv.values.data() + i * c;
                for (size_t j = 0; j < c; ++j) dst[j] += src[j];
            }
        }
        auto lists = row_lists;
        return add_node(std::move(out), parts, false, "scatter_rows",
                        [lists = std::move(lists)](Graph& g, Node& nd) {
                            const size_t c = nd.value.shape[1];
                            for (size_t k = 0; k < nd.parents.size(); ++k) {
                                if (!g.node(nd.parents[k]).needs_grad) continue;
                                auto& pg = g.ensure_grad(nd.parents[k]);
                                for (size_t i = 0; i < lists[k].size(); ++i) {
                                    const S* src = nd.grad.values.data() + static_cast<size_t>(lists[k][i]) * c;
                                    S* dst = pg.values.data() + i * c;
                                    for (size_t j = 0; j < c; ++j) dst[j] += src[j];
                                }
                            }
                        });
    }

    /// y[i, :] = x[i, :] * col[i, 0]
    Id rowwise_scale(Id x, Id col) {
        const auto& xv = node(x).value;
        const auto& cv = node(col).value;
        require(xv.rank() == 2 && cv.rank() == 2 && cv.shape[1] == 1 && cv.shape[0] == xv.shape[0],
                "rowwise_scale: ", shape_str(xv.shape), " vs ", shape_str(cv.shape));
        const size_t n = xv.shape[0], c = xv.shape[1];
        Tensor<S> out({n, c});
        for (size_t i = 0; i < n; ++i) {
            const S s = cv.values[i];
            for (size_t j = 0; j < c; ++j) out.values[i * c + j] = xv.values[i * c + j] * s;
        }
        return add_node(std::move(out), {x, col}, false, "rowwise_scale", [](Graph& g, Node& nd) {
            const auto& xv = g.node(nd.parents[0]).value;
            const auto& cv = g.node(nd.parents[1]).value;
            const size_t n = xv.shape[0], c = xv.shape[1];
            if (g.node(nd.parents[0]).needs_grad) {
                auto& gx = g.ensure_grad(nd.parents[0]);
                for (size_t i = 0; i < n; ++i) {
                    const S s = cv.values[i];
                    for (size_t j = 0; j < c; ++j) gx.values[i * c + j] += nd.grad.values[i * c + j] * s;
                }
            }
            if (g.node(nd.parents[1]).needs_grad) {
                auto& gc = g.ensure_grad(nd.parents[1]);
                for (size_t i = 0; i < n; ++i) {
                    S acc = S(0);
                    for (size_t j = 0; j < c; ++j) acc += nd.grad.values[i * c + j] * xv.values[i * c + j];
                    gc.values[i] += acc;
                }
            }
        });
    }

    /// Per-example matrix-vector product: w_flat row i holds a p x q matrix
    /// (row-major); y[i, :] = x[i, :] * W_i.
    Id rowwise_matvec(Id w_flat, Id x, size_t p, size_t q) {
        const auto& wv = node(w_flat).value;
        const auto& xv = node(x).value;
        require(wv.rank() == 2 && wv.shape[1] == p * q, "rowwise_matvec: weight cols ", wv.shape[1],
                " != ", p, "*", q);
        require(xv.rank() == 2 && xv.shape[1] == p && xv.shape[0] == wv.shape[0],
                "rowwise_matvec: x ", shape_str(xv.shape), " incompatible with p=", p);
        const size_t n = xv.shape[0];
        Tensor<S> out({n, q});
        for (size_t i = 0; i < n; ++i) {
            const S* W = wv.values.data() + i * p * q;
            const S* xi = xv.values.data() + i * p;
            S* yi = out.values.data() + i * q;
            for (size_t k = 0; k < p; ++k) {
                const S xk = xi[k];
                const S* wrow = W + k * q;
                for (size_t j = 0; j < q; ++j) yi[j] += xk * wrow[j];
            }
        }
        return add_node(std::move(out), {w_flat, x}, false, "rowwise_matvec", [p, q](Graph& g, Node& nd) {
            const auto& wv = g.node(nd.parents[0]).value;
            const auto& xv = g.node(nd.parents[1]).value;
            const size_t n = xv.shape[0];
            const bool need_w = g.node(nd.parents[0]).needs_grad;
            const bool need_x = g.node(nd.parents[1]).needs_grad;
            if (!need_w && !need_x) return;
            Tensor<S>* gw = need_w ? &g.ensure_grad(nd.parents[0]) : nullptr;
            Tensor<S>* gx = need_x ? &g.ensure_grad(nd.parents[1]) : nullptr;
            for (size_t i = 0; i < n; ++i) {
                const S* dy = nd.grad.values.data() + i * q;
                const S* xi = xv.values.data() + i * p;
                const S* W = wv.values.data() + i * p * q;
                for (size_t k = 0; k < p; ++k) {
                    if (gw) {
                        S* gw_row = gw->values.data() + i * p * q + k * q;
                        const S xk = xi[k];
                        for (size_t j = 0; j < q; ++j) gw_row[j] += xk * dy[j];
                    }
                    if (gx) {
                        const S* wrow = W + k * q;
                        S acc = S(0);
                        for (size_t j = 0; j < q; ++j) acc += wrow[j] * dy[j];
                        gx->values[i * p + k] += acc;
                    }
                }
            }
        });
    }

    // ---- normalization & reductions ----

    /// Row-wise softmax with max-subtraction.
    Id softmax_rows(Id x) {
        const auto& xv = node(x).value;
        require(xv.rank() == 2 && xv.shape[1] >= 1, "softmax needs 2-D input with >=1 col");
        const size_t n = xv.shape[0], k = xv.shape[1];
        Tensor<S> out({n, k});
        for (size_t i = 0; i < n; ++i) {
            const S* row = xv.values.data() + i * k;
            S mx = row[0];
            for (size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
            S sum = S(0);
            S* orow = out.values.data() + i * k;
            for (size_t j = 0; j < k; ++j) {
                orow[j] = std::exp(row[j] - mx);
                sum += orow[j];
            }
            for (size_t j = 0; j < k; ++j) orow[j] /= sum;
        }
        return add_node(std::move(out), {x}, false, "softmax", [](Graph& g, Node& nd) {
            if (!g.node(nd.parents[0]).needs_grad) return;
            auto& pg = g.ensure_grad(nd.parents[0]);
            const size_t n = nd.value.shape[0], k = nd.value.shape[1];
            for (size_t i = 0; i < n; ++i) {
                const S* y = nd.value.values.data() + i * k;
                const S* dy = nd.grad.values.data() + i * k;
                S dot = S(0);
                for (size_t j = 0; j < k; ++j) dot += y[j] * dy[j];
                S* dst = pg.values.data() + i * k;
                for (size_t j = 0; j < k; ++j) dst[j] += y[j] * (dy[j] - dot);
            }
        });
    }

    /// Row-wise layer normalization with learned gain/bias (rank-1, length =
    /// cols). Uses the biased variance (1/H) like the usual formulation.
    Id layer_norm_rows(Id x, Id gain, Id bias, double eps = 1e-5) {
        const auto& xv = node(x).value;
        const auto& gv = node(gain).value;
        const auto& bv = node(bias).value;
        require(xv.rank() == 2, "layer_norm needs 2-D input");
        const size_t n = xv.shape[0], h = xv.shape[1];
        require(gv.numel() == h && bv.numel() == h, "layer_norm gain/bias length mismatch");
        Tensor<S> out({n, h});
        Tensor<S> xhat({n, h});
        Tensor<S> inv_std({n, 1});
        for (size_t i = 0; i < n; ++i) {
            const S* row = xv.values.data() + i * h;
            S mean = S(0);
            for (size_t j = 0; j < h; ++j) mean += row[j];
            mean /= static_cast<S>(h);
            S var = S(0);
            for (size_t j = 0; j < h; ++j) {
                const S d = row[j] - mean;
                var += d * d;
            }
            var /= static_cast<S>(h);
            const S is = S(1) / std::sqrt(var + static_cast<S>(eps));
            inv_std.values[i] = is;
            for (size_t j = 0; j < h; ++j) {
                const S xh = (row[j] - mean) * is;
                xhat.values[i * h + j] = xh;
                out.values[i * h + j] = gv.values[j] * xh + bv.values[j];
            }
        }
        return add_node(std::move(out), {x, gain, bias}, false, "layer_norm",
                        [xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g, Node& nd) {
                            const size_t n = nd.value.shape[0], h = nd.value.shape[1];
                            const auto& gv = g.node(nd.parents[1]).value;
                            if (g.node(nd.parents[2]).needs_grad) {
                                auto& gb = g.ensure_grad(nd.parents[2]);
                                for (size_t i = 0; i < n; ++i)
                                    for (size_t j = 0; j < h; ++j) gb.values[j] += nd.grad.values[i * h + j];
                            }
                            if (g.node(nd.parents[1]).needs_grad) {
                                auto& gg = g.ensure_grad(nd.parents[1]);
                                for (size_t i = 0; i < n; ++i)
                                    for (size_t j = 0; j < h; ++j)
                                        gg.values[j] += nd.grad.values[i * h + j] * xhat.values[i * h + j];
                            }
                            if (g.node(nd.parents[0]).needs_grad) {
                                auto& gx = g.ensure_grad(nd.parents[0]);
                                for (size_t i = 0; i < n; ++i) {
                                    // dxhat = dy * gain; dx via the standard layer-norm identity
                                    S sum_dxh = S(0), sum_dxh_xh = S(0);
                                    for (size_t j = 0; j < h; ++j) {
                                        const S dxh = nd.grad.values[i * h + j] * gv.values[j];
                                        sum_dxh += dxh;
                                        sum_dxh_xh += dxh * xhat.values[i * h + j];
                                    }
                                    const S is = inv_std.values[i];
                                    for (size_t j = 0; j < h; ++j) {
                                        const S dxh = nd.grad.values[i * h + j] * gv.values[j];
                                        gx.values[i * h + j] +=
                                            is * (dxh - (sum_dxh + xhat.values[i * h + j] * sum_dxh_xh) /
                                                            static_cast<S>(h));
                                    }
                                }
                            }
                        });
    }

    Id sum_all(Id x) {
        S acc = S(0);
        for (S v : node(x).value.values) acc += v;
        Tensor<S> out({1, 1});
        out.values[0] = acc;
        return add_node(std::move(out), {x}, false, "sum_all", [](Graph& g, Node& nd) {
            if (!g.node(nd.parents[0]).needs_grad) return;
            auto& pg = g.ensure_grad(nd.parents[0]);
            const S gval = nd.grad.values[0];
            for (auto& v : pg.values) v += gval;
        });
    }

    /// Mean binary cross-entropy against {0,1} labels, computed in the fused
    /// log-sigmoid form on raw logits (n x 1).
    Id bce_with_logits(Id logits, const std::vector<S>& labels) {
        const auto& zv = node(logits).value;
        require(zv.rank() == 2 && zv.shape[1] == 1, "bce_with_logits expects n x 1 logits, got ",
                shape_str(zv.shape));
        require(zv.shape[0] == labels.size(), "bce_with_logits: ", labels.size(), " labels for ",
                zv.shape[0], " logits");
        const size_t n = labels.size();
        S acc = S(0);
        for (size_t i = 0; i < n; ++i) {
            const S z = zv.values[i];
            // softplus(-z) + (1-y) z
            acc += softplus(-z) + (S(1) - labels[i]) * z;
        }
        Tensor<S> out({1, 1});
        out.values[0] = acc / static_cast<S>(n);
        auto y = labels;
        return add_node(std::move(out), {logits}, false, "bce_with_logits",
                        [y = std::move(y)](Graph& g, Node& nd) {
                            if (!g.node(nd.parents[0]).needs_grad) return;
                            auto& pg = g.ensure_grad(nd.parents[0]);
                            const auto& zv = g.node(nd.parents[0]).value;
                            const S gval = nd.grad.values[0];
                            const S inv_n = S(1) / static_cast<S>(y.size());
                            for (size_t i = 0; i < y.size(); ++i)
                                pg.values[i] += gval * inv_n * (stable_sigmoid(zv.values[i]) - y[i]);
                        });
    }

    /// Identity forward; blocks gradient flow.
    Id stop_grad(Id x) {
        Tensor<S> out = node(x).value;
        Id id = add_node(std::move(out), {}, false, "stop_grad", nullptr);
        return id;
    }

    // ---- access / backward ----

    const Tensor<S>& value(Id id) const { return nodes_[id].value; }
    const Tensor<S>& grad(Id id) const { return nodes_[id].grad; }
    bool needs_grad(Id id) const { return nodes_[id].needs_grad; }
    size_t node_count() const { return nodes_.size(); }

    /// Reverse pass from a scalar root. Gradients accumulate on every node
    /// with needs_grad; call flush_param_grads() to push them to the stores.
    void backward(Id root) {
        require(nodes_[root].value.numel() == 1, "backward root must be scalar, got ",
                shape_str(nodes_[root].value.shape));
        ensure_grad(root).values[0] = S(1);
        for (Id id = root; id >= 0; --id) {
            Node& n = nodes_[id];
            if (!n.needs_grad || n.grad.values.empty() || !n.back) continue;
            n.back(*this, n);
        }
    }

    /// Adds node gradients of bound parameters into their stores' grad
    /// buffers (in binding order).
    void flush_param_grads() {
        for (const auto& b : param_bindings_) {
            const Node& n = nodes_[b.node];
            if (n.grad.values.empty()) continue;
            auto& dst = b.store->entry(b.entry).grad;
            for (size_t i = 0; i < dst.values.size(); ++i) dst.values[i] += n.grad.values[i];
        }
    }

private:
    struct Node {
        Tensor<S> value;
        Tensor<S> grad;  // empty until touched
        std::vector<Id> parents;
        std::function<void(Graph&, Node&)> back;
        const char* op = "";
        bool needs_grad = false;
    };

    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    static Eigen::Map<Mat> cmap(Tensor<S>& t) {
        return Eigen::Map<Mat>(t.values.data(), static_cast<Eigen::Index>(t.shape[0]),
                               static_cast<Eigen::Index>(t.shape[1]));
    }
    static Eigen::Map<const Mat> cmap(const Tensor<S>& t) {
        return Eigen::Map<const Mat>(t.values.data(), static_cast<Eigen::Index>(t.shape[0]),
                                     static_cast<Eigen::Index>(t.shape[1]));
    }

    Node& node(Id id) { return nodes_[id]; }
    const Node& node(Id id) const { return nodes_[id]; }

    Tensor<S>& ensure_grad(Id id) {
        Node& n = nodes_[id];
        if (n.grad.values.empty()) n.grad = Tensor<S>(n.value.shape);
        return n.grad;
    }

    void accumulate(Id id, const S* src, size_t count) {
        if (!nodes_[id].needs_grad) return;
        auto& g = ensure_grad(id);
        for (size_t i = 0; i < count; ++i) g.values[i] += src[i];
    }

    void check_same_shape(Id a, Id b, const char* op) {
        require(nodes_[a].value.same_shape(nodes_[b].value), op, " shape mismatch: ",
                shape_str(nodes_[a].value.shape), " vs ", shape_str(nodes_[b].value.shape));
    }

    Id add_node(Tensor<S> value, std::vector<Id> parents, bool leaf_requires_grad, const char* op,
                std::function<void(Graph&, Node&)> back) {
        if (validate_finite_ && !value.all_finite())
            fail("non-finite value produced by node '", op, "' (id ", nodes_.size(), ")");
        Node n;
        n.value = std::move(value);
        n.parents = std::move(parents);
        n.back = std::move(back);
        n.op = op;
        n.needs_grad = leaf_requires_grad;
        for (Id p : n.parents)
            if (nodes_[p].needs_grad) n.needs_grad = true;
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size() - 1);
    }

    struct ParamBinding {
        ParameterStore<S>* store;
        size_t entry;
        Id node;
    };

    struct PairHash {
        size_t operator()(const std::pair<ParameterStore<S>*, size_t>& p) const {
            return std::hash<void*>()(p.first) ^ (p.second * 0x9e3779b97f4a7c15ULL);
        }
    };

    bool validate_finite_;
    std::vector<Node> nodes_;
    std::vector<ParamBinding> param_bindings_;
    std::unordered_map<std::pair<ParameterStore<S>*, size_t>, Id, PairHash> param_nodes_;
};

}  // namespace swr
