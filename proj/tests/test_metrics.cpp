#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "swr/common.hpp"
#include "swr/metrics.hpp"
#include "swr/rng.hpp"

using namespace swr;

namespace {

struct WelchCase {
    std::vector<double> a, b;
    double t, p;
};

const std::vector<WelchCase> kWelchCases = {
#include "data/welch_cases.inc"
};

/// Pairwise AUC: every positive-negative pair scored 1, 0.5 on ties.
double auc_pairwise(const std::vector<int8_t>& y, const std::vector<double>& s) {
    double won = 0.0;
    size_t pairs = 0;
    for (size_t i = 0; i < y.size(); ++i) {
        if (y[i] != 1) continue;
        for (size_t j = 0; j < y.size(); ++j) {
            if (y[j] != 0) continue;
            ++pairs;
            if (s[i] > s[j]) won += 1.0;
            else if (s[i] == s[j]) won += 0.5;
        }
    }
    return won / static_cast<double>(pairs);
}

std::string error_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("auc matches pinned examples") {
    CHECK(auc({1, 0}, {0.9, 0.1}) == 1.0);
    CHECK(auc({0, 1}, {0.9, 0.1}) == 0.0);
    CHECK(auc({1, 0, 1, 0}, {0.3, 0.3, 0.3, 0.3}) == 0.5);
    // Pairs: (0.8,0.2)=1, (0.8,0.8)=0.5, (0.9,0.2)=1, (0.9,0.8)=1 of 4.
    CHECK(auc({1, 0, 0, 1}, {0.8, 0.2, 0.8, 0.9}) == doctest::Approx(0.875).epsilon(1e-12));
}

TEST_CASE("auc flags single-class inputs instead of inventing a value") {
    CHECK(std::isnan(auc({1, 1, 1}, {0.2, 0.5, 0.9})));
    CHECK(std::isnan(auc({0, 0}, {0.2, 0.5})));
    CHECK(error_of([] { auc({1, 2}, {0.1, 0.2}); }).find("labels must be 0 or 1") !=
          std::string::npos);
    CHECK(error_of([] { auc({1}, {0.1, 0.2}); }).find("differ in length") != std::string::npos);
}

TEST_CASE("auc agrees with the quadratic pairwise oracle under heavy ties") {
    Rng rng(311);
    for (int rep = 0; rep < 30; ++rep) {
        const size_t n = 400;
        std::vector<int8_t> y(n);
        std::vector<double> s(n);
        // A coarse score grid forces long tie runs.
        const int levels = 2 + static_cast<int>(rng.uniform_index(8));
        for (size_t i = 0; i < n; ++i) {
            y[i] = rng.uniform01() < 0.35 ? 1 : 0;
            s[i] = static_cast<double>(rng.uniform_index(static_cast<size_t>(levels))) / levels;
        }
        y[0] = 1;
        y[1] = 0;
        CHECK(auc(y, s) == doctest::Approx(auc_pairwise(y, s)).epsilon(1e-9));
    }
}

TEST_CASE("auc is invariant under strictly increasing score transforms") {
    Rng rng(1213);
    std::vector<int8_t> y(500);
    std::vector<double> s(500);
    for (size_t i = 0; i < y.size(); ++i) {
        y[i] = rng.uniform01() < 0.5 ? 1 : 0;
        s[i] = rng.uniform(-4.0, 4.0);
    }
    y[0] = 1;
    y[1] = 0;
    const double base = auc(y, s);
    auto mapped = s;
    for (double& v : mapped) v = std::exp(0.5 * v) + 3.0;
    CHECK(auc(y, mapped) == doctest::Approx(base).epsilon(1e-12));
    for (double& v : mapped) v = std::atan(v);
    CHECK(auc(y, mapped) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("logloss matches hand-computed values and clips extremes") {
    CHECK(logloss({1}, {0.5}) == doctest::Approx(0.69314718055994531).epsilon(1e-12));
    CHECK(logloss({1}, {0.9}) == doctest::Approx(0.10536051565782630).epsilon(1e-12));
    CHECK(logloss({0}, {0.1}) == doctest::Approx(0.10536051565782630).epsilon(1e-12));
    CHECK(logloss({1, 0}, {0.9, 0.1}) == doctest::Approx(0.10536051565782630).epsilon(1e-12));
    CHECK(logloss({1}, {0.0}) == doctest::Approx(-std::log(1e-7)).epsilon(1e-12));
    CHECK(logloss({0}, {1.0}) == doctest::Approx(-std::log1p(-(1.0 - 1e-7))).epsilon(1e-7));
    CHECK(std::isfinite(logloss({1, 0}, {0.0, 1.0})));
}

TEST_CASE("logloss of a constant prediction is minimized at the base rate") {
    Rng rng(77);
    std::vector<int8_t> y(400);
    size_t pos = 0;
    for (auto& v : y) {
        v = rng.uniform01() < 0.3 ? 1 : 0;
        pos += static_cast<size_t>(v);
    }
    const double q = static_cast<double>(pos) / static_cast<double>(y.size());
    auto at = [&](double p) { return logloss(y, std::vector<double>(y.size(), p)); };
    CHECK(at(q) < at(q + 0.03));
    CHECK(at(q) < at(q - 0.03));
    CHECK(at(q) < at(0.5) + 1e-15);
}

TEST_CASE("student t tail handles pinned closed forms") {
    // df=1 is Cauchy: P(|T| > 1) is exactly 1/2.
    CHECK(student_t_two_sided(1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(student_t_two_sided(0.0, 5.0) == doctest::Approx(1.0).epsilon(1e-12));
    // Large df approaches the normal tail.
    CHECK(student_t_two_sided(1.959963984540054, 1e7) == doctest::Approx(0.05).epsilon(1e-4));
    CHECK(student_t_two_sided(std::numeric_limits<double>::infinity(), 3.0) == 0.0);
}

TEST_CASE("welch_ttest degenerate and error cases") {
    const Welch same = welch_ttest({1, 2, 3}, {1, 2, 3});
    CHECK(same.t == 0.0);
    CHECK(same.p == 1.0);

    const Welch zero_var_equal = welch_ttest({2, 2, 2}, {2, 2});
    CHECK(zero_var_equal.t == 0.0);
    CHECK(zero_var_equal.p == 1.0);

    const Welch zero_var_diff = welch_ttest({0, 0, 0}, {1, 1, 1});
    CHECK(zero_var_diff.p == 0.0);
    CHECK(std::isinf(zero_var_diff.t));
    CHECK(zero_var_diff.t < 0.0);

    CHECK(error_of([] { welch_ttest({1.0}, {1.0, 2.0}); }).find("at least two samples") !=
          std::string::npos);
    CHECK(error_of([] { welch_ttest({1.0, 2.0}, {}); }).find("at least two samples") !=
          std::string::npos);
}

TEST_CASE("welch_ttest matches the reference table") {
    REQUIRE(kWelchCases.size() == 50);
    for (const WelchCase& c : kWelchCases) {
        const Welch w = welch_ttest(c.a, c.b);
        CHECK(std::fabs(w.t - c.t) < 1e-6);
        CHECK(std::fabs(w.p - c.p) < 1e-6);
    }
}

TEST_CASE("per-scenario evaluation pools, slices and flags") {
    Rng rng(901);
    const size_t n = 600;
    std::vector<int8_t> y(n);
    std::vector<double> s(n);
    std::vector<int32_t> scen(n);
    for (size_t i = 0; i < n; ++i) {
        scen[i] = static_cast<int32_t>(i % 3);
        y[i] = rng.uniform01() < 0.4 ? 1 : 0;
        s[i] = rng.uniform01();
    }
    const ScenarioReport r = evaluate_per_scenario(y, s, scen, 3);
    CHECK(r.per_scenario.size() == 3);
    CHECK(r.overall.count == n);

    // Micro metrics equal direct recomputation over the concatenated rows.
    CHECK(r.overall.auc == doctest::Approx(auc(y, s)).epsilon(1e-12));
    CHECK(r.overall.logloss == doctest::Approx(logloss(y, s)).epsilon(1e-12));

    double macro = 0.0;
    size_t counts = 0;
    for (int32_t k = 0; k < 3; ++k) {
        std::vector<int8_t> yk;
        std::vector<double> sk;
        for (size_t i = 0; i < n; ++i)
            if (scen[i] == k) {
                yk.push_back(y[i]);
                sk.push_back(s[i]);
            }
        CHECK(r.per_scenario[k].count == yk.size());
        CHECK(r.per_scenario[k].auc == doctest::Approx(auc(yk, sk)).epsilon(1e-12));
        CHECK(r.per_scenario[k].logloss == doctest::Approx(logloss(yk, sk)).epsilon(1e-12));
        macro += r.per_scenario[k].auc;
        ++counts;
    }
    CHECK(r.macro_auc == doctest::Approx(macro / counts).epsilon(1e-12));
}

TEST_CASE("single-scenario report repeats the overall row") {
    std::vector<int8_t> y = {1, 0, 1, 0, 1};
    std::vector<double> s = {0.9, 0.2, 0.7, 0.4, 0.6};
    std::vector<int32_t> scen(y.size(), 0);
    const ScenarioReport r = evaluate_per_scenario(y, s, scen, 1);
    REQUIRE(r.per_scenario.size() == 1);
    CHECK(r.per_scenario[0].auc == r.overall.auc);
    CHECK(r.per_scenario[0].logloss == r.overall.logloss);
    CHECK(r.per_scenario[0].count == r.overall.count);
    CHECK(r.macro_auc == r.overall.auc);
}

TEST_CASE("one-class and empty scenarios are flagged, not fabricated") {
    std::vector<int8_t> y = {1, 1, 1, 0, 1, 0};
    std::vector<double> s = {0.9, 0.8, 0.7, 0.3, 0.6, 0.2};
    std::vector<int32_t> scen = {0, 0, 0, 1, 1, 1};
    const ScenarioReport r = evaluate_per_scenario(y, s, scen, 3);
    CHECK(r.per_scenario[0].auc_missing());
    CHECK(!r.per_scenario[1].auc_missing());
    CHECK(r.per_scenario[2].count == 0);
    CHECK(r.per_scenario[2].auc_missing());
    // Macro averages only the scenarios with a defined AUC.
    CHECK(r.macro_auc == doctest::Approx(r.per_scenario[1].auc).epsilon(1e-15));
    CHECK(!r.overall.auc_missing());

    const std::vector<int32_t> bad = {0, 0, 0, 1, 1, 3};
    CHECK(error_of([&] { evaluate_per_scenario(y, s, bad, 3); }).find("out of range") !=
          std::string::npos);
}

TEST_CASE("reports round-trip through json losslessly") {
    Rng rng(555);
    std::vector<int8_t> y(300);
    std::vector<double> s(300);
    std::vector<int32_t> scen(300);
    for (size_t i = 0; i < y.size(); ++i) {
        y[i] = rng.uniform01() < 0.5 ? 1 : 0;
        s[i] = rng.uniform01();
        scen[i] = static_cast<int32_t>(rng.uniform_index(4));
    }
    // Force one single-class slice so the missing flag takes the null path.
    for (size_t i = 0; i < y.size(); ++i)
        if (scen[i] == 3) y[i] = 1;

    const ScenarioReport r = evaluate_per_scenario(y, s, scen, 4);
    const nlohmann::json j = report_to_json(r);
    const ScenarioReport back = report_from_json(j);
    CHECK(report_to_json(back).dump() == j.dump());
    CHECK(back.overall.auc == r.overall.auc);
    CHECK(back.overall.logloss == r.overall.logloss);
    CHECK(back.per_scenario[3].auc_missing());
}

TEST_CASE("aggregate uses the sample standard deviation") {
    const Aggregate a = aggregate({2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0});
    CHECK(a.mean == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(a.std == doctest::Approx(std::sqrt(32.0 / 7.0)).epsilon(1e-12));
    CHECK(a.n == 8);

    const Aggregate single = aggregate({3.25});
    CHECK(single.mean == 3.25);
    CHECK(single.std == 0.0);
    CHECK(error_of([] { aggregate({}); }).find("empty") != std::string::npos);
}

TEST_CASE("table and csv renderers align and quote") {
    const std::string table =
        format_table({"model", "auc"}, {{"mmoe", "0.81"}, {"single_tower", "0.79"}});
    CHECK(table.find("model         auc ") == 0);
    CHECK(table.find("mmoe          0.81") != std::string::npos);
    CHECK(table.find("single_tower  0.79") != std::string::npos);
    CHECK(error_of([] { format_table({"a"}, {{"x", "y"}}); }).find("row width") !=
          std::string::npos);

    CHECK(csv_line({"a", "b"}) == "a,b\n");
    CHECK(csv_line({"a,b", "c\"d", "plain"}) == "\"a,b\",\"c\"\"d\",plain\n");
}
