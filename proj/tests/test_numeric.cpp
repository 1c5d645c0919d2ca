#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "swr/adam.hpp"
#include "swr/checkpoint.hpp"
#include "swr/grad_check.hpp"
#include "swr/graph.hpp"
#include "swr/nn.hpp"
#include "swr/rng.hpp"

using namespace swr;

TEST_CASE("rng streams are deterministic and seed-sensitive") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const uint64_t va = a.next_u64();
        CHECK(va == b.next_u64());
    }
    bool any_diff = false;
    Rng a2(42);
    for (int i = 0; i < 100; ++i) any_diff |= (a2.next_u64() != c.next_u64());
    CHECK(any_diff);

    Rng u(7);
    for (int i = 0; i < 1000; ++i) {
        const double x = u.uniform01();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
    Rng n(9);
    double mean = 0.0, m2 = 0.0;
    const int N = 20000;
    for (int i = 0; i < N; ++i) {
        const double z = n.normal();
        mean += z;
        m2 += z * z;
    }
    mean /= N;
    CHECK(std::abs(mean) < 0.03);
    CHECK(std::abs(m2 / N - 1.0) < 0.05);
}

TEST_CASE("shuffle produces a permutation") {
    std::vector<int> v(257);
    for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<int>(i);
    Rng r(5);
    r.shuffle(v.data(), v.size());
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (size_t i = 0; i < v.size(); ++i) CHECK(sorted[i] == static_cast<int>(i));
    bool moved = false;
    for (size_t i = 0; i < v.size(); ++i) moved |= (v[i] != static_cast<int>(i));
    CHECK(moved);
}

TEST_CASE("parameter init depends only on seed, path and shape") {
    ParameterStore<double> s1(42), s2(42), s3(43);
    s1.add("m.emb", {8, 4}, Init::embedding_normal);
    s1.add("m.dense.w", {4, 3}, Init::dense_uniform);
    // registration order reversed; values must not change
    s2.add("m.dense.w", {4, 3}, Init::dense_uniform);
    s2.add("m.emb", {8, 4}, Init::embedding_normal);
    s3.add("m.emb", {8, 4}, Init::embedding_normal);

    CHECK(s1.value("m.emb").values == s2.value("m.emb").values);
    CHECK(s1.value("m.dense.w").values == s2.value("m.dense.w").values);
    CHECK(s1.value("m.emb").values != s3.value("m.emb").values);

    // uniform bound is 1/sqrt(fan_in)
    const double bound = 1.0 / std::sqrt(4.0);
    for (double v : s1.value("m.dense.w").values) {
        CHECK(v <= bound);
        CHECK(v >= -bound);
    }
    double spread = 0.0;
    for (double v : s1.value("m.emb").values) spread = std::max(spread, std::abs(v));
    CHECK(spread > 0.0);
    CHECK(spread < 0.1);  // N(0, 0.01) tail at 32 samples
}

TEST_CASE("matmul and add_bias match hand-computed values") {
    Graph<double> g;
    auto a = g.input(Tensor<double>({2, 3}, {1, 2, 3, 4, 5, 6}));
    auto b = g.input(Tensor<double>({3, 2}, {7, 8, 9, 10, 11, 12}));
    auto c = g.matmul(a, b);
    const auto& cv = g.value(c);
    CHECK(cv.shape == std::vector<size_t>{2, 2});
    CHECK(cv.values[0] == doctest::Approx(58).epsilon(1e-15));
    CHECK(cv.values[1] == doctest::Approx(64).epsilon(1e-15));
    CHECK(cv.values[2] == doctest::Approx(139).epsilon(1e-15));
    CHECK(cv.values[3] == doctest::Approx(154).epsilon(1e-15));

    auto bias = g.input(Tensor<double>({2}, {0.5, -0.5}));
    auto d = g.add_bias(c, bias);
    CHECK(g.value(d).values[0] == doctest::Approx(58.5));
    CHECK(g.value(d).values[3] == doctest::Approx(153.5));

    CHECK_THROWS_AS(g.matmul(a, a), Error);
}

TEST_CASE("softmax is stable for large logits and matches a long double oracle") {
    Graph<double> g;
    auto x = g.input(Tensor<double>({2, 3}, {1000.0, 999.0, 998.0, -1000.0, -1000.5, -999.0}));
    auto y = g.softmax_rows(x);
    const auto& yv = g.value(y);
    for (double v : yv.values) {
        CHECK(std::isfinite(v));
        CHECK(v > 0.0);
    }
    for (size_t i = 0; i < 2; ++i) {
        long double sum = 0.0L;
        for (size_t j = 0; j < 3; ++j) sum += yv.values[i * 3 + j];
        CHECK(static_cast<double>(sum) == doctest::Approx(1.0).epsilon(1e-12));
    }
    // oracle in long double with explicit max subtraction
    const double row0[3] = {1000.0, 999.0, 998.0};
    long double e[3], s = 0.0L;
    for (int j = 0; j < 3; ++j) {
        e[j] = expl(static_cast<long double>(row0[j]) - 1000.0L);
        s += e[j];
    }
    for (int j = 0; j < 3; ++j)
        CHECK(yv.values[j] == doctest::Approx(static_cast<double>(e[j] / s)).epsilon(1e-14));
}

TEST_CASE("bce_with_logits equals the clipped naive form and stays finite at extremes") {
    Graph<double> g;
    std::vector<double> z = {0.3, -1.2, 2.5, 0.0, -0.7};
    std::vector<double> y = {1, 0, 1, 0, 1};
    auto zn = g.input(Tensor<double>({5, 1}, z));
    auto loss = g.bce_with_logits(zn, y);
    long double naive = 0.0L;
    for (size_t i = 0; i < z.size(); ++i) {
        const long double p = 1.0L / (1.0L + expl(-static_cast<long double>(z[i])));
        naive += -(static_cast<long double>(y[i]) * logl(p) +
                   (1.0L - static_cast<long double>(y[i])) * logl(1.0L - p));
    }
    naive /= static_cast<long double>(z.size());
    CHECK(g.value(loss).values[0] == doctest::Approx(static_cast<double>(naive)).epsilon(1e-14));

    Graph<double> g2;
    auto ze = g2.input(Tensor<double>({2, 1}, {100.0, -100.0}), true);
    auto le = g2.bce_with_logits(ze, {0.0, 1.0});
    CHECK(std::isfinite(g2.value(le).values[0]));
    CHECK(g2.value(le).values[0] == doctest::Approx(100.0).epsilon(1e-12));
    g2.backward(le);
    for (double gv : g2.grad(ze).values) CHECK(std::isfinite(gv));
}

TEST_CASE("gather then scatter reconstructs the input exactly") {
    Graph<double> g;
    Tensor<double> x({6, 3});
    Rng r(11);
    for (auto& v : x.values) v = r.normal();
    auto xn = g.input(x, true);
    std::vector<std::vector<int32_t>> groups = {{4, 0, 2}, {5, 1}, {3}};
    std::vector<Graph<double>::Id> parts;
    for (const auto& rows : groups) parts.push_back(g.gather_rows(xn, rows));
    auto back = g.scatter_rows(parts, groups, 6);
    CHECK(g.value(back).values == x.values);

    auto loss = g.sum_all(g.mul(back, back));
    g.backward(loss);
    for (size_t i = 0; i < x.values.size(); ++i)
        CHECK(g.grad(xn).values[i] == doctest::Approx(2.0 * x.values[i]).epsilon(1e-14));
}

TEST_CASE("embedding rejects out-of-range indices with the feature name") {
    ParameterStore<double> store(1);
    store.add("emb.genre", {4, 2}, Init::embedding_normal);
    Graph<double> g;
    auto t = g.param(store, "emb.genre");
    try {
        g.embedding_rows(t, {0, 4}, "genre");
        FAIL("expected range error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("genre") != std::string::npos);
        CHECK(std::string(e.what()).find("4") != std::string::npos);
    }
}

TEST_CASE("stop_grad blocks the gradient path") {
    Graph<double> g;
    auto x = g.input(Tensor<double>({2, 2}, {1, 2, 3, 4}), true);
    auto frozen = g.stop_grad(x);
    auto y = g.mul(x, frozen);  // d/dx should be `frozen` only
    auto loss = g.sum_all(y);
    g.backward(loss);
    const auto& gx = g.grad(x).values;
    CHECK(gx == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("layer_norm forward matches a direct computation") {
    Graph<double> g;
    auto x = g.input(Tensor<double>({1, 4}, {1.0, 2.0, 3.0, 4.0}));
    auto gain = g.input(Tensor<double>({4}, {1.5, 1.0, 0.5, 2.0}));
    auto bias = g.input(Tensor<double>({4}, {0.1, 0.0, -0.1, 0.2}));
    auto y = g.layer_norm_rows(x, gain, bias);
    const double mean = 2.5, var = 1.25;
    for (int j = 0; j < 4; ++j) {
        const double xh = ((j + 1) - mean) / std::sqrt(var + 1e-5);
        const double expect = g.value(gain).values[j] * xh + g.value(bias).values[j];
        CHECK(g.value(y).values[j] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("finite-difference check over a graph exercising every op") {
    ParameterStore<double> store(99);
    store.add("emb", {6, 4}, Init::embedding_normal);
    store.add("scen", {3, 4}, Init::embedding_normal);
    DenseLayer<double> dense(store, "dense", 8, 6, Act::relu);
    DenseLayer<double> gate_l(store, "gate", 4, 3, Act::none);
    DenseLayer<double> metaw(store, "metaw", 4, 6 * 2, Act::tanh);
    store.add("ln.gain", {2}, Init::ones);
    store.add("ln.bias", {2}, Init::zeros);
    DenseLayer<double> head(store, "head", 2, 1, Act::none);
    GateNU<double> gatenu(store, "gnu", 4, 5, 6);

    const std::vector<int32_t> idx = {0, 3, 5, 1};
    const std::vector<int32_t> scen = {0, 2, 1, 0};
    const std::vector<double> labels = {1, 0, 0, 1};
    const std::vector<std::vector<int32_t>> groups = {{0, 3}, {2}, {1}};

    auto build = [&](Graph<double>& g) {
        auto e = g.embedding_rows(g.param(store, "emb"), idx, "item");
        auto s = g.embedding_rows(g.param(store, "scen"), scen, "scenario");
        auto cat = g.concat_cols({e, s});
        auto h = dense.apply(g, store, cat);
        // route rows per group through tanh / sigmoid / identity, merge back
        auto p0 = g.tanh_(g.gather_rows(h, groups[0]));
        auto p1 = g.sigmoid(g.gather_rows(h, groups[1]));
        auto p2 = g.gather_rows(h, groups[2]);
        auto merged = g.scatter_rows({p0, p1, p2}, groups, 4);
        auto gate = g.softmax_rows(gate_l.apply(g, store, s));
        auto mixed = moe_mix<double>(g, {merged, g.relu(h), g.scale(h, 0.5)}, gate);
        auto factors = gatenu.apply(g, store, s);
        auto scaled = g.mul(mixed, factors);
        auto wflat = metaw.apply(g, store, s);
        auto z2 = g.rowwise_matvec(wflat, scaled, 6, 2);
        auto normed = g.layer_norm_rows(z2, g.param(store, "ln.gain"), g.param(store, "ln.bias"));
        auto shifted = g.add_const(g.clamp01(normed), -0.25);
        auto col = g.slice_cols(shifted, 0, 1);
        auto reseen = g.reshape(g.rowwise_scale(shifted, col), {4, 2});
        auto logits = head.apply(g, store, g.sub(reseen, g.scale(reseen, 0.1)));
        return g.bce_with_logits(logits, labels);
    };

    store.zero_grads();
    {
        Graph<double> g(true);
        auto loss = build(g);
        g.backward(loss);
        g.flush_param_grads();
    }
    auto rep = grad_check(store, [&]() {
        Graph<double> g;
        return g.value(build(g)).values[0];
    });
    INFO("worst ", rep.worst_path, "[", rep.worst_index, "] analytic=", rep.analytic,
         " numeric=", rep.numeric);
    CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("two backward passes accumulate into the store") {
    ParameterStore<double> store(3);
    DenseLayer<double> lin(store, "lin", 2, 1, Act::none);
    auto run = [&]() {
        Graph<double> g;
        auto x = g.input(Tensor<double>({3, 2}, {1, 0, 0, 1, 1, 1}));
        auto loss = g.bce_with_logits(lin.apply(g, store, x), {1, 0, 1});
        g.backward(loss);
        g.flush_param_grads();
    };
    store.zero_grads();
    run();
    auto once = store.grad("lin.w").values;
    store.zero_grads();
    run();
    run();
    for (size_t i = 0; i < once.size(); ++i)
        CHECK(store.grad("lin.w").values[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-14));
}

TEST_CASE("adam follows a hand-computed five step trajectory") {
    ParameterStore<double> store(0);
    store.add("w", {1}, Init::zeros);
    store.value("w").values[0] = 1.0;
    Adam<double> opt(0.1, 0.9, 0.999, 1e-8);
    const double grads[5] = {0.5, -0.3, 0.2, 0.1, -0.4};

    long double w = 1.0L, m = 0.0L, v = 0.0L;
    for (int t = 1; t <= 5; ++t) {
        const long double gt = grads[t - 1];
        store.zero_grads();
        store.grad("w").values[0] = static_cast<double>(gt);
        opt.step(store);

        m = 0.9L * m + 0.1L * gt;
        v = 0.999L * v + 0.001L * gt * gt;
        const long double mhat = m / (1.0L - powl(0.9L, t));
        const long double vhat = v / (1.0L - powl(0.999L, t));
        w -= 0.1L * mhat / (sqrtl(vhat) + 1e-8L);
        CHECK(store.value("w").values[0] == doctest::Approx(static_cast<double>(w)).epsilon(1e-12));
    }
}

TEST_CASE("adam leaves non-trainable entries untouched and tolerates zero grads") {
    ParameterStore<double> store(0);
    store.add("w", {2, 2}, Init::dense_uniform);
    store.add("buf", {3}, Init::ones, false);
    const auto w0 = store.value("w").values;
    const auto b0 = store.value("buf").values;
    Adam<double> opt(0.01);
    store.zero_grads();
    opt.step(store);  // all-zero grads: values must not move
    CHECK(store.value("w").values == w0);
    CHECK(store.value("buf").values == b0);

    store.grad("w").values[0] = 1.0;
    store.grad("buf").values[0] = 1.0;  // ignored: not trainable
    opt.step(store);
    CHECK(store.value("w").values != w0);
    CHECK(store.value("buf").values == b0);
}

TEST_CASE("checkpoint round-trips bit-exactly and validates structure") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "swr_ckpt_test";
    fs::create_directories(dir);
    const std::string file = (dir / "model.swr").string();

    ParameterStore<float> a(7);
    a.add("emb.user", {10, 4}, Init::embedding_normal);
    a.add("tower.w", {4, 2}, Init::dense_uniform);
    a.add("tower.b", {2}, Init::zeros);
    a.add("centroids", {3, 4}, Init::embedding_normal, false);
    save_checkpoint(a, file);

    ParameterStore<float> b(8);  // different seed: different init, loaded over
    b.add("emb.user", {10, 4}, Init::embedding_normal);
    b.add("tower.w", {4, 2}, Init::dense_uniform);
    b.add("tower.b", {2}, Init::zeros);
    b.add("centroids", {3, 4}, Init::embedding_normal, false);
    load_checkpoint(b, file);
    for (size_t e = 0; e < a.size(); ++e) {
        const auto& va = a.entry(e).value.values;
        const auto& vb = b.entry(e).value.values;
        CHECK(std::memcmp(va.data(), vb.data(), va.size() * sizeof(float)) == 0);
    }

    ParameterStore<float> wrong_shape(8);
    wrong_shape.add("emb.user", {10, 4}, Init::embedding_normal);
    wrong_shape.add("tower.w", {4, 3}, Init::dense_uniform);
    wrong_shape.add("tower.b", {2}, Init::zeros);
    wrong_shape.add("centroids", {3, 4}, Init::embedding_normal, false);
    CHECK_THROWS_AS(load_checkpoint(wrong_shape, file), Error);

    ParameterStore<double> wrong_dtype(8);
    wrong_dtype.add("emb.user", {10, 4}, Init::embedding_normal);
    wrong_dtype.add("tower.w", {4, 2}, Init::dense_uniform);
    wrong_dtype.add("tower.b", {2}, Init::zeros);
    wrong_dtype.add("centroids", {3, 4}, Init::embedding_normal, false);
    CHECK_THROWS_AS(load_checkpoint(wrong_dtype, file), Error);

    // corrupt the magic
    {
        std::fstream f(file, std::ios::binary | std::ios::in | std::ios::out);
        f.write("XXXX", 4);
    }
    ParameterStore<float> c(9);
    c.add("emb.user", {10, 4}, Init::embedding_normal);
    c.add("tower.w", {4, 2}, Init::dense_uniform);
    c.add("tower.b", {2}, Init::zeros);
    c.add("centroids", {3, 4}, Init::embedding_normal, false);
    CHECK_THROWS_AS(load_checkpoint(c, file), Error);
}

TEST_CASE("finite validation flags non-finite node outputs") {
    Graph<double> checked(true);
    auto x = checked.input(Tensor<double>({1, 2}, {1.0, 2.0}));
    CHECK_THROWS_AS(checked.scale(x, std::numeric_limits<double>::infinity()), Error);
    Graph<double> unchecked(false);
    auto y = unchecked.input(Tensor<double>({1, 2}, {1.0, 2.0}));
    CHECK_NOTHROW(unchecked.scale(y, std::numeric_limits<double>::infinity()));
}
