#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>
#include <vector>

#include "swr/grad_check.hpp"
#include "swr/models.hpp"

using namespace swr;

namespace {

FeatureSpace toy_space() {
    FeatureSpace sp;
    sp.sparse_names = {"user", "item"};
    sp.vocab_sizes = {7, 9};
    sp.dense_names = {"ctx"};
    sp.n_scenarios = 3;
    return sp;
}

Batch toy_batch(const FeatureSpace& sp, size_t rows, uint64_t seed) {
    Batch b;
    b.rows = rows;
    b.n_sparse = sp.n_sparse();
    b.n_dense = sp.n_dense();
    Rng rng(seed);
    for (size_t r = 0; r < rows; ++r) {
        for (size_t f = 0; f < b.n_sparse; ++f)
            b.sparse.push_back(static_cast<int32_t>(rng.uniform_index(sp.vocab_sizes[f])));
        for (size_t f = 0; f < b.n_dense; ++f) b.dense.push_back(static_cast<float>(rng.uniform01()));
        b.scenario.push_back(static_cast<int32_t>(r % sp.n_scenarios));
        b.label.push_back(static_cast<int8_t>(rng.uniform01() < 0.4 ? 1 : 0));
    }
    return b;
}

ModelConfig toy_config(const std::string& kind) {
    ModelConfig c;
    c.kind = kind;
    c.embed_dim = 4;
    c.tower_dims = {8, 4};
    c.experts = 3;
    c.expert_dim = 6;
    c.shared_experts = 2;
    c.specific_experts = 1;
    c.cgc_layers = 2;
    c.n_experts_m3oe = 2;
    c.bottom_dim = 8;
    c.aux_dim = 3;
    c.meta_dims = {5};
    c.ff_dim = 7;
    c.enc_layers = 1;
    c.dec_layers = 2;
    c.clusters = 3;
    c.gate_hidden = 5;
    c.hyper_hidden = 6;
    c.hyper_matrix = 3;
    return c;
}

template <class Fn>
std::string error_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

size_t np_dense(size_t in, size_t out) { return in * out + out; }

size_t np_mlp(const std::vector<size_t>& dims) {
    size_t n = 0;
    for (size_t i = 0; i + 1 < dims.size(); ++i) n += np_dense(dims[i], dims[i + 1]);
    return n;
}

}  // namespace

TEST_CASE("model config parses, validates, and round-trips") {
    for (const auto& kind : kModelKinds) CHECK(is_model_kind(kind));
    CHECK_FALSE(is_model_kind("bogus"));
    CHECK(kModelKinds.size() == 13);

    auto c = parse_model_config(R"({"kind":"mmoe","experts":8,"embed_dim":32})");
    CHECK(c.experts == 8);
    CHECK(c.embed_dim == 32);
    CHECK(c.tower_dims == std::vector<size_t>{256, 128, 64});

    auto msg = error_of([] { parse_model_config(R"({"kind":"bogus"})"); });
    CHECK(msg.find("unknown model kind") != std::string::npos);
    CHECK(msg.find("shared_bottom") != std::string::npos);
    CHECK(msg.find("m3oe") != std::string::npos);

    msg = error_of([] { parse_model_config(R"({"kind":"mmoe","clusters":4})"); });
    CHECK(msg.find("'clusters'") != std::string::npos);
    CHECK(msg.find("does not apply") != std::string::npos);

    msg = error_of([] { parse_model_config(R"({"kind":"mmoe","experts":0})"); });
    CHECK(msg.find("experts") != std::string::npos);

    msg = error_of([] { parse_model_config(R"({"kind":"ple","cgc_layers":3})"); });
    CHECK(msg.find("cgc_layers") != std::string::npos);

    msg = error_of([] { parse_model_config(R"({"kind":"star","frobnicate":1})"); });
    CHECK(msg.find("unknown model config field") != std::string::npos);

    msg = error_of([] { parse_model_config(R"({"tower_dims":[64]})"); });
    CHECK(msg.find("kind") != std::string::npos);

    msg = error_of([] { parse_model_config("{nope"); });
    CHECK(msg.find("not valid JSON") != std::string::npos);

    for (const auto& kind : kModelKinds) {
        auto cfg = toy_config(kind);
        auto j = model_config_to_json(cfg);
        auto back = model_config_from_json(j);
        CHECK(model_config_to_json(back) == j);
    }
}

TEST_CASE("parameter counts match closed forms") {
    const auto sp = toy_space();
    const size_t d = 4, D = 2 * 4 + 1, S = 3, e = 6;
    const size_t bank = 7 * d + 9 * d;
    auto stack = [](size_t in) { return std::vector<size_t>{in, 8, 4, 1}; };
    const size_t tower_D = np_mlp(stack(D));

    std::vector<std::pair<std::string, size_t>> expected = {
        {"single_tower", bank + tower_D},
        {"shared_bottom", bank + np_dense(D, 8) + S * np_mlp(stack(8))},
        {"mmoe", bank + 3 * np_dense(D, e) + S * np_dense(D, 3) + S * np_mlp(stack(e))},
        {"ple", bank + (2 * np_dense(D, e) + 3 * np_dense(D, e) + 3 * np_dense(D, 3) + np_dense(D, 5)) +
                    (2 * np_dense(e, e) + 3 * np_dense(e, e) + 3 * np_dense(e, 3)) + S * np_mlp(stack(e))},
        {"star", bank + (1 + S) * tower_D + S * 3 + np_dense(3, 1)},
        {"sar_net", bank + S * d + np_dense(d, 2) + 2 * np_dense(D, e) + S * np_dense(D, e) +
                        np_dense(d, 3) + np_mlp(stack(e))},
        {"m2m", bank + S * d + np_dense(1, d) + (np_dense(d, 7) + np_dense(7, d)) + np_dense(d, 5) +
                    np_dense(5, d * d) + d + 2 * (np_dense(5, d * d) + np_dense(5, d)) + np_dense(d, 1)},
        {"adasparse",
         bank + S * d + tower_D + 2 * np_dense(d + D, 8) + 2 * np_dense(d + 8, 4)},
        {"adl", bank + 3 * D + (3 + 1) * tower_D},
        {"epnet", bank + S * d + np_dense(d + D, 5) + np_dense(5, D) + tower_D},
        {"ppnet", bank + S * d + S * tower_D + (np_dense(d + D, 5) + np_dense(5, 8)) +
                      (np_dense(d + D, 5) + np_dense(5, 4))},
        {"hamur", bank + S * d + np_dense(d, 6) + np_dense(D, 8) + np_dense(8, 4) +
                      2 * (np_dense(6, 8 * 3)) + 2 * 8 + 2 * (np_dense(6, 4 * 3)) + 2 * 4 + np_dense(4, 1)},
        {"m3oe", bank + 6 * np_dense(D, e) + (1 + S + 1) * np_dense(D, 2) + (S * 2 + 2) + np_mlp(stack(e))},
    };
    CHECK(expected.size() == kModelKinds.size());
    for (const auto& [kind, count] : expected) {
        auto m = build_model<double>(toy_config(kind), sp, 7);
        INFO("kind = ", kind);
        CHECK(m->param_count() == count);
    }
}

TEST_CASE("same config and seed build bit-identical models") {
    const auto sp = toy_space();
    const auto b = toy_batch(sp, 12, 5);
    for (const auto& kind : kModelKinds) {
        auto m1 = build_model<float>(toy_config(kind), sp, 42);
        auto m2 = build_model<float>(toy_config(kind), sp, 42);
        REQUIRE(m1->params().size() == m2->params().size());
        for (size_t i = 0; i < m1->params().size(); ++i) {
            const auto& e1 = m1->params().entry(i);
            const auto& e2 = m2->params().entry(i);
            CHECK(e1.path == e2.path);
            CHECK(std::memcmp(e1.value.data(), e2.value.data(), e1.value.numel() * sizeof(float)) == 0);
        }
        auto p1 = m1->predict(b);
        auto p2 = m2->predict(b);
        CHECK(p1 == p2);
    }
}

TEST_CASE("predict emits one probability in (0,1) per row for every kind") {
    const auto sp = toy_space();
    const auto b = toy_batch(sp, 11, 19);
    for (const auto& kind : kModelKinds) {
        auto m = build_model<double>(toy_config(kind), sp, 3);
        auto p = m->predict(b);
        INFO("kind = ", kind);
        REQUIRE(p.size() == b.rows);
        for (double v : p) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }
}

TEST_CASE("zeroed parameters drive every kind to probability one half") {
    const auto sp = toy_space();
    const auto b = toy_batch(sp, 9, 23);
    for (const auto& kind : kModelKinds) {
        auto m = build_model<double>(toy_config(kind), sp, 3);
        for (auto& entry : m->params()) entry.value.fill(0.0);
        INFO("kind = ", kind);
        for (double v : m->predict(b)) CHECK(v == 0.5);
    }
}

TEST_CASE("permuting batch rows permutes predictions identically") {
    const auto sp = toy_space();
    const auto b = toy_batch(sp, 10, 31);
    std::vector<size_t> perm(b.rows);
    std::iota(perm.begin(), perm.end(), size_t{0});
    Rng rng(77);
    rng.shuffle(perm.data(), perm.size());

    Batch pb;
    pb.rows = b.rows;
    pb.n_sparse = b.n_sparse;
    pb.n_dense = b.n_dense;
    pb.sparse.resize(b.sparse.size());
    pb.dense.resize(b.dense.size());
    pb.scenario.resize(b.rows);
    pb.label.resize(b.rows);
    for (size_t r = 0; r < b.rows; ++r) {
        const size_t src = perm[r];
        for (size_t f = 0; f < b.n_sparse; ++f) pb.sparse[r * b.n_sparse + f] = b.sparse[src * b.n_sparse + f];
        for (size_t f = 0; f < b.n_dense; ++f) pb.dense[r * b.n_dense + f] = b.dense[src * b.n_dense + f];
        pb.scenario[r] = b.scenario[src];
        pb.label[r] = b.label[src];
    }

    for (const auto& kind : kModelKinds) {
        auto m = build_model<double>(toy_config(kind), sp, 13);
        auto p = m->predict(b);
        auto pp = m->predict(pb);
        INFO("kind = ", kind);
        for (size_t r = 0; r < b.rows; ++r) CHECK(pp[r] == p[perm[r]]);
    }
}

TEST_CASE("mixed-scenario batches equal per-scenario sub-batches") {
    const auto sp = toy_space();
    const auto b = toy_batch(sp, 10, 41);
    for (const auto& kind : kModelKinds) {
        auto m = build_model<double>(toy_config(kind), sp, 29);
        auto full = m->predict(b);
        std::vector<double> stitched(b.rows, -1.0);
        for (size_t s = 0; s < sp.n_scenarios; ++s) {
            Batch sub;
            sub.n_sparse = b.n_sparse;
            sub.n_dense = b.n_dense;
            std::vector<size_t> rows;
            for (size_t r = 0; r < b.rows; ++r) {
                if (b.scenario[r] != static_cast<int32_t>(s)) continue;
                rows.push_back(r);
                for (size_t f = 0; f < b.n_sparse; ++f) sub.sparse.push_back(b.sparse[r * b.n_sparse + f]);
                for (size_t f = 0; f < b.n_dense; ++f) sub.dense.push_back(b.dense[r * b.n_dense + f]);
                sub.scenario.push_back(b.scenario[r]);
                sub.label.push_back(b.label[r]);
            }
            sub.rows = rows.size();
            if (sub.rows == 0) continue;
            auto p = m->predict(sub);
            for (size_t i = 0; i < rows.size(); ++i) stitched[rows[i]] = p[i];
        }
        INFO("kind = ", kind);
        for (size_t r = 0; r < b.rows; ++r) CHECK(stitched[r] == doctest::Approx(full[r]).epsilon(1e-12));
    }
}

TEST_CASE("scenario id out of range and layout mismatches are hard errors") {
    const auto sp = toy_space();
    auto m = build_model<double>(toy_config("shared_bottom"), sp, 1);
    auto b = toy_batch(sp, 4, 2);
    b.scenario[2] = 3;
    auto msg = error_of([&] { m->predict(b); });
    CHECK(msg.find("out of range") != std::string::npos);

    auto bad = toy_batch(sp, 4, 2);
    bad.n_dense = 0;
    bad.dense.clear();
    msg = error_of([&] { m->predict(bad); });
    CHECK(msg.find("feature layout") != std::string::npos);

    auto cfg = toy_config("mmoe");
    FeatureSpace one = sp;
    one.n_scenarios = 1;
    msg = error_of([&] { build_model<double>(cfg, one, 1); });
    CHECK(msg.find("at least 2 scenarios") != std::string::npos);
    CHECK_NOTHROW(build_model<double>(toy_config("single_tower"), one, 1));

    msg = error_of([&] {
        auto c = toy_config("shared_bottom");
        c.kind = "bogus";
        build_model<double>(c, sp, 1);
    });
    CHECK(msg.find("unknown model kind") != std::string::npos);
}

TEST_CASE("distinct towers make scenario id matter under shared_bottom") {
    const auto sp = toy_space();
    auto m = build_model<double>(toy_config("shared_bottom"), sp, 1234);
    Batch b = toy_batch(sp, 2, 6);
    for (size_t f = 0; f < b.n_sparse; ++f) b.sparse[1 * b.n_sparse + f] = b.sparse[f];
    b.dense[1] = b.dense[0];
    b.scenario = {0, 1};
    auto p = m->predict(b);
    CHECK(std::abs(p[0] - p[1]) > 0.0);
}

TEST_CASE("moe_mix identities and weighted-sum oracle") {
    Rng rng(11);
    auto rnd = [&](std::vector<size_t> shape) {
        Tensor<double> t(shape);
        for (auto& v : t.values) v = rng.uniform(-2.0, 2.0);
        return t;
    };

    {
        Graph<double> g;
        auto x = g.input(rnd({5, 4}));
        auto gate = g.input(rnd({5, 1}));
        auto out = moe_mix(g, {x}, gate);
        CHECK(g.value(out).values == g.value(x).values);
    }
    {
        Graph<double> g;
        auto a = g.input(rnd({4, 3}));
        auto bb = g.input(rnd({4, 3}));
        auto gate = g.input(Tensor<double>({4, 2}, 0.7));
        auto out = moe_mix(g, {a, bb}, gate);
        for (size_t i = 0; i < g.value(out).numel(); ++i)
            CHECK(g.value(out).values[i] == (g.value(a).values[i] + g.value(bb).values[i]) / 2.0);
    }
    {
        Graph<double> g;
        std::vector<Tensor<double>> ex;
        std::vector<Graph<double>::Id> ids;
        for (int k = 0; k < 4; ++k) {
            ex.push_back(rnd({6, 5}));
            ids.push_back(g.input(ex.back()));
        }
        Tensor<double> logits = rnd({6, 4});
        auto out = moe_mix(g, ids, g.input(logits));
        for (size_t r = 0; r < 6; ++r) {
            double mx = *std::max_element(logits.values.begin() + r * 4, logits.values.begin() + r * 4 + 4);
            double z = 0.0;
            for (size_t k = 0; k < 4; ++k) z += std::exp(logits.at(r, k) - mx);
            for (size_t c = 0; c < 5; ++c) {
                double want = 0.0;
                for (size_t k = 0; k < 4; ++k) want += std::exp(logits.at(r, k) - mx) / z * ex[k].at(r, c);
                CHECK(g.value(out).at(r, c) == doctest::Approx(want).epsilon(1e-6));
            }
        }
    }
    {
        Graph<double> g;
        auto x = g.input(rnd({3, 2}));
        auto gate = g.input(rnd({3, 2}));
        auto msg = error_of([&] { moe_mix(g, {x}, gate); });
        CHECK(msg.find("gate has") != std::string::npos);
    }
}

TEST_CASE("shared-times-scenario layer combination identities") {
    Rng rng(17);
    Graph<double> g;
    Tensor<double> wsh({4, 3});
    for (auto& v : wsh.values) v = rng.uniform(-1.0, 1.0);
    Tensor<double> bsh({3});
    for (auto& v : bsh.values) v = rng.uniform(-1.0, 1.0);
    Tensor<double> x({6, 4});
    for (auto& v : x.values) v = rng.uniform(-1.0, 1.0);

    auto xs = g.input(x);
    auto w_shared = g.input(wsh);
    auto b_shared = g.input(bsh);
    auto plain = dense_from(g, xs, w_shared, b_shared, Act::relu);
    auto combined = dense_from(g, xs, g.mul(w_shared, g.input(Tensor<double>({4, 3}, 1.0))),
                               g.add(b_shared, g.input(Tensor<double>({3}, 0.0))), Act::relu);
    CHECK(g.value(plain).values == g.value(combined).values);

    auto w = g.mul(g.input(Tensor<double>({1, 1}, 2.0)), g.input(Tensor<double>({1, 1}, 3.0)));
    auto bias = g.add(g.input(Tensor<double>({1}, 1.0)), g.input(Tensor<double>({1}, 2.0)));
    CHECK(g.value(w).values[0] == 6.0);
    CHECK(g.value(bias).values[0] == 3.0);
}

TEST_CASE("gate factors are exactly 1 at zero init and always in (0,2)") {
    ParameterStore<double> store(5);
    GateNU<double> gate(store, "g", 6, 4, 3);
    for (auto& e : store) e.value.fill(0.0);
    Graph<double> g;
    Rng rng(7);
    Tensor<double> x({5, 6});
    for (auto& v : x.values) v = rng.uniform(-3.0, 3.0);
    auto xin = g.input(x);
    auto f = gate.apply(g, store, xin);
    for (double v : g.value(f).values) CHECK(v == 1.0);

    ParameterStore<double> store2(9);
    GateNU<double> gate2(store2, "g", 6, 4, 3);
    Graph<double> g2;
    auto f2 = gate2.apply(g2, store2, g2.input(x));
    for (double v : g2.value(f2).values) {
        CHECK(v > 0.0);
        CHECK(v < 2.0);
    }
}

TEST_CASE("detached gate input passes exactly zero gradient to embeddings") {
    ParameterStore<double> store(21);
    store.add("emb.a", {5, 3}, Init::embedding_normal);
    store.add("emb.s", {3, 2}, Init::embedding_normal);
    GateNU<double> gate(store, "gate", 2 + 6, 4, 6);

    Graph<double> g;
    auto table = g.param(store, "emb.a");
    auto e = g.concat_cols({g.embedding_rows(table, {0, 1, 2, 4}, "emb.a"),
                            g.embedding_rows(table, {4, 3, 2, 0}, "emb.a")});
    auto scen = g.embedding_rows(g.param(store, "emb.s"), {0, 1, 2, 0}, "emb.s");
    auto f = gate.apply(g, store, g.concat_cols({scen, g.stop_grad(e)}));
    auto loss = g.sum_all(f);
    g.backward(loss);
    g.flush_param_grads();

    for (double v : store.grad("emb.a").values) CHECK(v == 0.0);
    double scen_norm = 0.0, gate_norm = 0.0;
    for (double v : store.grad("emb.s").values) scen_norm += std::abs(v);
    for (double v : store.grad("gate.l0.w").values) gate_norm += std::abs(v);
    CHECK(scen_norm > 0.0);
    CHECK(gate_norm > 0.0);
}

TEST_CASE("generated weights collapse to the bias at zero meta weights and vary with z") {
    ParameterStore<double> store(33);
    DenseLayer<double> gen(store, "gen", 4, 6, Act::none);
    Rng rng(3);
    for (auto& v : store.value("gen.b").values) v = rng.uniform(-1.0, 1.0);
    store.value("gen.w").fill(0.0);

    Tensor<double> z({3, 4});
    for (auto& v : z.values) v = rng.uniform(-1.0, 1.0);
    {
        Graph<double> g;
        auto w = gen.apply(g, store, g.input(z));
        for (size_t r = 0; r < 3; ++r)
            for (size_t c = 0; c < 6; ++c) CHECK(g.value(w).at(r, c) == store.value("gen.b").values[c]);
    }
    for (auto& v : store.value("gen.w").values) v = rng.uniform(-1.0, 1.0);
    {
        Graph<double> g;
        auto w = gen.apply(g, store, g.input(z));
        double diff = 0.0;
        for (size_t c = 0; c < 6; ++c) diff = std::max(diff, std::abs(g.value(w).at(0, c) - g.value(w).at(1, c)));
        CHECK(diff > 0.0);
    }
}

TEST_CASE("pruning factors: center, saturation, and beta monotonicity") {
    {
        Graph<double> g;
        auto u = g.input(Tensor<double>({4, 3}, 0.3));
        auto v = g.input(Tensor<double>({4, 3}, 0.0));
        for (double beta : {1.0, 2.0, 17.0}) {
            auto pi = adasparse_factors(g, u, v, 1.0, beta);
            for (double val : g.value(pi).values)
                CHECK(val == doctest::Approx(2.0 * 1.0 / (1.0 + std::exp(-0.3)) * 0.5).epsilon(1e-12));
        }
    }
    {
        Graph<double> g;
        const double v9 = std::log(0.9 / 0.1);  // sigmoid(v9) = 0.9
        auto u = g.input(Tensor<double>({1, 1}, 0.0));
        auto v = g.input(Tensor<double>({1, 1}, v9));
        auto pi = adasparse_factors(g, u, v, 1.0, 100.0);
        CHECK(g.value(pi).values[0] == doctest::Approx(1.0).epsilon(1e-9));  // bin clamps to 1, scale = 1
    }
    {
        Rng rng(13);
        Tensor<double> u({50, 8}), v({50, 8});
        for (auto& x : u.values) x = rng.uniform(-4.0, 4.0);
        for (auto& x : v.values) x = rng.uniform(-4.0, 4.0);
        size_t prev = 0;
        bool first = true;
        for (double beta : {1.0, 2.0, 4.0, 8.0, 32.0}) {
            Graph<double> g;
            auto pi = adasparse_factors(g, g.input(u), g.input(v), 1.0, beta);
            size_t zeros = 0;
            for (double val : g.value(pi).values)
                if (val == 0.0) ++zeros;
            if (!first) CHECK(zeros >= prev);
            prev = zeros;
            first = false;
        }
        CHECK(prev > 0);  // beta = 32 prunes something on this input set
    }
}

TEST_CASE("cluster routing follows cosine argmax with deterministic ties") {
    Tensor<double> cents({2, 3});
    cents.values = {1, 0, 0, 0, 1, 0};
    Tensor<double> repr({4, 3});
    repr.values = {2, 0, 0,   // aligned with centroid 0
                   0, 5, 0,   // aligned with centroid 1
                   0, 0, 7,   // orthogonal to both -> tie -> lowest index
                   0, 0, 0};  // zero norm -> cluster 0 + warning
    size_t warn = 0;
    auto ids = adl_route(repr, cents, &warn);
    CHECK(ids == std::vector<int32_t>{0, 1, 0, 0});
    CHECK(warn == 1);

    Tensor<double> repr2({1, 3});
    repr2.values = {0.1, 0.9, 0.0};
    CHECK(adl_route(repr2, cents)[0] == 1);
}

TEST_CASE("centroid updates keep unit norms across 100 steps") {
    Rng rng(29);
    Tensor<double> cents({4, 6});
    for (auto& v : cents.values) v = rng.normal(0.0, 1.0);
    std::vector<int32_t> iota = {0, 1, 2, 3};
    adl_update(cents, cents, iota, 0.0);
    for (int step = 0; step < 100; ++step) {
        Tensor<double> repr({10, 6});
        for (auto& v : repr.values) v = rng.normal(0.0, 1.0);
        std::vector<int32_t> assign;
        for (int r = 0; r < 10; ++r) assign.push_back(static_cast<int32_t>(rng.uniform_index(4)));
        adl_update(cents, repr, assign, 0.1);
        for (size_t c = 0; c < 4; ++c) {
            double nrm = 0.0;
            for (size_t j = 0; j < 6; ++j) nrm += cents.at(c, j) * cents.at(c, j);
            CHECK(std::sqrt(nrm) == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("adl model updates centroids only in training mode") {
    const auto sp = toy_space();
    auto cfg = toy_config("adl");
    AdlModel<double> m(cfg, sp, 51);
    const auto before = m.params().value("adl.centroids").values;

    auto b = toy_batch(sp, 16, 61);
    (void)m.predict(b);
    m.after_step();  // nothing stashed at inference
    CHECK(m.params().value("adl.centroids").values == before);

    m.set_training(true);
    Graph<double> g;
    (void)m.logits(g, b);
    m.after_step();
    CHECK(m.params().value("adl.centroids").values != before);
    for (size_t c = 0; c < cfg.clusters; ++c) {
        double nrm = 0.0;
        const auto& cents = m.params().value("adl.centroids");
        for (size_t j = 0; j < cents.shape[1]; ++j) nrm += cents.at(c, j) * cents.at(c, j);
        CHECK(std::sqrt(nrm) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("adapter with zero up-projection is the exact identity") {
    Rng rng(37);
    Graph<double> g;
    const size_t h = 6, k = 3, n = 5;
    Tensor<double> x({n, h});
    for (auto& v : x.values) v = rng.uniform(-2.0, 2.0);
    Tensor<double> wd({n, h * k});
    for (auto& v : wd.values) v = rng.uniform(-2.0, 2.0);
    auto xs = g.input(x);
    auto down = g.rowwise_matvec(g.input(wd), xs, h, k);
    auto up = g.rowwise_matvec(g.input(Tensor<double>({n, k * h}, 0.0)), g.relu(down), k, h);
    auto branch = g.layer_norm_rows(up, g.input(Tensor<double>({h}, 1.0)), g.input(Tensor<double>({h}, 0.0)));
    auto out = g.add(xs, branch);
    CHECK(g.value(out).values == x.values);

    auto msg = error_of([&] { g.rowwise_matvec(g.input(Tensor<double>({n, 7}, 0.0)), xs, h, k); });
    CHECK(!msg.empty());
}

TEST_CASE("hamur predictions ignore the hyper trunk until up-weights move") {
    const auto sp = toy_space();
    auto m = build_model<double>(toy_config("hamur"), sp, 71);
    const auto b = toy_batch(sp, 8, 73);
    const auto base = m->predict(b);

    Rng rng(79);
    for (auto& v : m->params().value("hyper.head0.wd").values) v = rng.uniform(-1.0, 1.0);
    for (auto& v : m->params().value("hyper.trunk.w").values) v = rng.uniform(-1.0, 1.0);
    for (auto& v : m->params().value("emb.scenario").values) v = rng.uniform(-1.0, 1.0);
    CHECK(m->predict(b) == base);

    for (auto& v : m->params().value("hyper.head0.wu").values) v = rng.uniform(-0.5, 0.5);
    auto moved = m->predict(b);
    CHECK(moved != base);

    // distinct domains, same features -> distinct adapter outputs
    Batch two = toy_batch(sp, 2, 83);
    for (size_t f = 0; f < two.n_sparse; ++f) two.sparse[two.n_sparse + f] = two.sparse[f];
    two.dense[1] = two.dense[0];
    two.scenario = {0, 2};
    auto p = m->predict(two);
    CHECK(std::abs(p[0] - p[1]) > 0.0);
}

TEST_CASE("finite differences confirm every kind's gradients at toy size") {
    const auto sp = toy_space();
    const auto b = toy_batch(sp, 8, 91);
    std::vector<double> labels;
    for (int8_t l : b.label) labels.push_back(static_cast<double>(l));

    for (const auto& kind : kModelKinds) {
        auto m = build_model<double>(toy_config(kind), sp, 97);
        auto& store = m->params();

        if (kind == "epnet" || kind == "ppnet") {
            // The gate reads a gradient-stopped embedding copy. Zeroing the
            // first-layer rows that multiply that copy removes its (frozen)
            // forward sensitivity, so finite differences measure exactly the
            // function the analytic gradient differentiates. The rows' own
            // gradients stay generic and checked.
            const size_t d = 4, D = 9;
            auto zero_rows = [&](const std::string& path) {
                auto& w = store.value(path);
                for (size_t r = d; r < d + D; ++r)
                    for (size_t c = 0; c < w.shape[1]; ++c) w.at(r, c) = 0.0;
            };
            if (kind == "epnet") zero_rows("gate.l0.w");
            if (kind == "ppnet") {
                zero_rows("gate.l0.l0.w");
                zero_rows("gate.l1.l0.w");
            }
        }
        if (kind == "hamur") {
            // Zero up-weights park the adapter layernorm at an all-zero
            // input; nudge them so the check runs at a generic point.
            Rng rng(5);
            for (const char* p : {"hyper.head0.wu", "hyper.head1.wu"})
                for (auto& v : store.value(p).values) v = rng.uniform(-0.5, 0.5);
        }

        auto forward = [&]() {
            Graph<double> g;
            auto loss = g.bce_with_logits(m->logits(g, b), labels);
            return g.value(loss).values[0];
        };
        store.zero_grads();
        {
            Graph<double> g;
            auto loss = g.bce_with_logits(m->logits(g, b), labels);
            g.backward(loss);
            g.flush_param_grads();
        }
        auto rep = grad_check(store, forward);
        INFO("kind = ", kind, " worst = ", rep.worst_path, "[", rep.worst_index, "] analytic = ", rep.analytic,
             " numeric = ", rep.numeric);
        CHECK(rep.max_rel_err < 1e-4);
    }
}
