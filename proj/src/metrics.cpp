#include "swr/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "swr/common.hpp"

namespace swr {

double auc(const std::vector<int8_t>& labels, const std::vector<double>& scores) {
    require(labels.size() == scores.size(), "auc: labels and scores differ in length");
    require(!labels.empty(), "auc: empty input");
    const size_t n = labels.size();

    size_t n_pos = 0;
    for (int8_t y : labels) {
        require(y == 0 || y == 1, "auc: labels must be 0 or 1");
        n_pos += static_cast<size_t>(y);
    }
    const size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::numeric_limits<double>::quiet_NaN();

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Tied scores share the average of the 1-based ranks they span.
    double pos_rank_sum = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) pos_rank_sum += avg_rank;
        i = j;
    }

    const double u = pos_rank_sum -
                     0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double logloss(const std::vector<int8_t>& labels, const std::vector<double>& scores) {
    require(labels.size() == scores.size(), "logloss: labels and scores differ in length");
    require(!labels.empty(), "logloss: empty input");
    double sum = 0.0;
    for (size_t i = 0; i < labels.size(); ++i) {
        require(labels[i] == 0 || labels[i] == 1, "logloss: labels must be 0 or 1");
        const double p = std::clamp(scores[i], kProbClip, 1.0 - kProbClip);
        sum -= labels[i] == 1 ? std::log(p) : std::log1p(-p);
    }
    return sum / static_cast<double>(labels.size());
}

namespace {

double beta_cont_frac(double a, double b, double x) {
    constexpr double tiny = 1e-30;
    constexpr double eps = 1e-15;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

double sample_mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_var(const std::vector<double>& xs, double mean) {
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(xs.size() - 1);
}

}  // namespace

double reg_inc_beta(double a, double b, double x) {
    require(a > 0.0 && b > 0.0, "reg_inc_beta: parameters must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cont_frac(a, b, x) / a;
    return 1.0 - front * beta_cont_frac(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
    require(df > 0.0, "student_t_two_sided: df must be positive");
    if (std::isinf(t)) return 0.0;
    return reg_inc_beta(0.5 * df, 0.5, df / (df + t * t));
}

Welch welch_ttest(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() >= 2 && b.size() >= 2, "welch_ttest: each group needs at least two samples");
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double ma = sample_mean(a);
    const double mb = sample_mean(b);
    const double va = sample_var(a, ma);
    const double vb = sample_var(b, mb);

    Welch w;
    if (va == 0.0 && vb == 0.0) {
        if (ma == mb) return w;
        w.t = ma > mb ? std::numeric_limits<double>::infinity()
                      : -std::numeric_limits<double>::infinity();
        w.p = 0.0;
        return w;
    }

    const double sa = va / na;
    const double sb = vb / nb;
    w.t = (ma - mb) / std::sqrt(sa + sb);
    w.df = (sa + sb) * (sa + sb) /
           (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    w.p = student_t_two_sided(w.t, w.df);
    return w;
}

namespace {

MetricCell cell_of(const std::vector<int8_t>& labels, const std::vector<double>& scores) {
    MetricCell c;
    c.count = labels.size();
    for (int8_t y : labels) c.positives += static_cast<size_t>(y == 1);
    c.auc = auc(labels, scores);
    c.logloss = logloss(labels, scores);
    return c;
}

nlohmann::json cell_to_json(const MetricCell& c) {
    nlohmann::json j;
    j["count"] = c.count;
    j["positives"] = c.positives;
    j["logloss"] = c.logloss;
    if (c.auc_missing()) {
        j["auc"] = nullptr;
        j["auc_missing"] = true;
    } else {
        j["auc"] = c.auc;
        j["auc_missing"] = false;
    }
    return j;
}

MetricCell cell_from_json(const nlohmann::json& j) {
    MetricCell c;
    c.count = j.at("count").get<size_t>();
    c.positives = j.at("positives").get<size_t>();
    c.logloss = j.at("logloss").get<double>();
    if (!j.at("auc_missing").get<bool>()) c.auc = j.at("auc").get<double>();
    return c;
}

}  // namespace

ScenarioReport evaluate_per_scenario(const std::vector<int8_t>& labels,
                                     const std::vector<double>& scores,
                                     const std::vector<int32_t>& scenario,
                                     size_t n_scenarios) {
    require(labels.size() == scores.size() && labels.size() == scenario.size(),
            "evaluate_per_scenario: input lengths differ");
    require(!labels.empty(), "evaluate_per_scenario: empty input");
    require(n_scenarios >= 1, "evaluate_per_scenario: need at least one scenario");

    ScenarioReport r;
    r.overall = cell_of(labels, scores);

    std::vector<std::vector<int8_t>> ls(n_scenarios);
    std::vector<std::vector<double>> ss(n_scenarios);
    for (size_t i = 0; i < labels.size(); ++i) {
        const int32_t s = scenario[i];
        require(s >= 0 && static_cast<size_t>(s) < n_scenarios,
                "evaluate_per_scenario: scenario id out of range");
        ls[static_cast<size_t>(s)].push_back(labels[i]);
        ss[static_cast<size_t>(s)].push_back(scores[i]);
    }

    double macro_sum = 0.0;
    size_t macro_n = 0;
    r.per_scenario.resize(n_scenarios);
    for (size_t s = 0; s < n_scenarios; ++s) {
        if (ls[s].empty()) continue;  // cell stays flagged with count 0
        r.per_scenario[s] = cell_of(ls[s], ss[s]);
        if (!r.per_scenario[s].auc_missing()) {
            macro_sum += r.per_scenario[s].auc;
            ++macro_n;
        }
    }
    if (macro_n > 0) r.macro_auc = macro_sum / static_cast<double>(macro_n);
    return r;
}

nlohmann::json report_to_json(const ScenarioReport& r) {
    nlohmann::json j;
    j["overall"] = cell_to_json(r.overall);
    if (std::isnan(r.macro_auc))
        j["macro_auc"] = nullptr;
    else
        j["macro_auc"] = r.macro_auc;
    j["per_scenario"] = nlohmann::json::array();
    for (const MetricCell& c : r.per_scenario) j["per_scenario"].push_back(cell_to_json(c));
    return j;
}

ScenarioReport report_from_json(const nlohmann::json& j) {
    ScenarioReport r;
    r.overall = cell_from_json(j.at("overall"));
    if (!j.at("macro_auc").is_null()) r.macro_auc = j.at("macro_auc").get<double>();
    for (const nlohmann::json& c : j.at("per_scenario")) r.per_scenario.push_back(cell_from_json(c));
    return r;
}

Aggregate aggregate(const std::vector<double>& xs) {
    require(!xs.empty(), "aggregate: empty input");
    Aggregate a;
    a.n = xs.size();
    a.mean = sample_mean(xs);
    if (xs.size() > 1) a.std = std::sqrt(sample_var(xs, a.mean));
    return a;
}

std::string format_table(const std::vector<std::string>& headers,
                         const std::vector<std::vector<std::string>>& rows) {
    std::vector<size_t> width(headers.size());
    for (size_t c = 0; c < headers.size(); ++c) width[c] = headers[c].size();
    for (const auto& row : rows) {
        require(row.size() == headers.size(), "format_table: row width mismatch");
        for (size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& row) {
        for (size_t c = 0; c < row.size(); ++c) {
            out << row[c] << std::string(width[c] - row[c].size(), ' ');
            out << (c + 1 == row.size() ? "\n" : "  ");
        }
    };
    emit(headers);
    std::vector<std::string> rule(headers.size());
    for (size_t c = 0; c < headers.size(); ++c) rule[c] = std::string(width[c], '-');
    emit(rule);
    for (const auto& row : rows) emit(row);
    return out.str();
}

std::string csv_line(const std::vector<std::string>& fields) {
    std::string out;
    for (size_t i = 0; i < fields.size(); ++i) {
        const std::string& f = fields[i];
        const bool quote = f.find_first_of(",\"\n") != std::string::npos;
        if (quote) {
            out += '"';
            for (char ch : f) {
                if (ch == '"') out += '"';
                out += ch;
            }
            out += '"';
        } else {
            out += f;
        }
        if (i + 1 < fields.size()) out += ',';
    }
    out += '\n';
    return out;
}

}  // namespace swr
