#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

namespace swr {

/// Probabilities are clipped to [kProbClip, 1 - kProbClip] before the log.
constexpr double kProbClip = 1e-7;

/// Rank-based AUC with average ranks for tied scores, O(n log n).
/// Returns quiet NaN when labels contain a single class; callers must treat
/// that as a missing value, not a score.
double auc(const std::vector<int8_t>& labels, const std::vector<double>& scores);

/// Mean binary cross entropy between labels and clipped probabilities.
double logloss(const std::vector<int8_t>& labels, const std::vector<double>& scores);

struct Welch {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
};

/// Two-sided Welch t-test with the Welch-Satterthwaite degrees of freedom.
/// Both groups need at least two samples. When both variances are zero the
/// test degenerates: p = 1 for equal means, p = 0 otherwise.
Welch welch_ttest(const std::vector<double>& a, const std::vector<double>& b);

/// Two-sided tail mass of the Student t distribution.
double student_t_two_sided(double t, double df);

/// Regularized incomplete beta I_x(a, b) via Lentz continued fractions.
double reg_inc_beta(double a, double b, double x);

/// Metrics over one slice of predictions. auc is NaN when the slice holds a
/// single label class.
struct MetricCell {
    size_t count = 0;
    size_t positives = 0;
    double auc = std::numeric_limits<double>::quiet_NaN();
    double logloss = 0.0;

    bool auc_missing() const { return std::isnan(auc); }
};

struct ScenarioReport {
    MetricCell overall;                   // micro: all rows pooled
    double macro_auc = std::numeric_limits<double>::quiet_NaN();
    std::vector<MetricCell> per_scenario;
};

ScenarioReport evaluate_per_scenario(const std::vector<int8_t>& labels,
                                     const std::vector<double>& scores,
                                     const std::vector<int32_t>& scenario,
                                     size_t n_scenarios);

nlohmann::json report_to_json(const ScenarioReport& r);
ScenarioReport report_from_json(const nlohmann::json& j);

/// Mean and sample (n-1) standard deviation; std is 0 for a single value.
struct Aggregate {
    double mean = 0.0;
    double std = 0.0;
    size_t n = 0;
};

Aggregate aggregate(const std::vector<double>& xs);

/// Renders rows as space-aligned columns; every row must match headers.
std::string format_table(const std::vector<std::string>& headers,
                         const std::vector<std::vector<std::string>>& rows);

/// RFC 4180 quoting: fields with commas, quotes or newlines get wrapped.
std::string csv_line(const std::vector<std::string>& fields);

}  // namespace swr
