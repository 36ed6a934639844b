#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "carb/errors.hpp"

namespace carb::stats {

// Fractional (average) ranks; ties share the mean of their positions.
std::vector<double> fractional_ranks(const std::vector<double>& values);

struct SpearmanResult {
    double rho = 0.0;
    bool degenerate = false;  // a constant input leaves rho undefined
};

// Rank correlation with average-rank tie handling; symmetric in arguments.
SpearmanResult spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

struct OlsResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double p_value = 1.0;  // two-sided, from the slope t-statistic, n-2 df
};

OlsResult ols_fit(const std::vector<double>& x, const std::vector<double>& y);

// Regularized incomplete beta function I_x(a, b); used for the t CDF.
double incomplete_beta(double a, double b, double x);

// Two benchmark-vs-downstream rankings over the same named models.
struct RankingPair {
    std::vector<std::string> labels;
    std::vector<double> r_align;  // downstream alignment scores/ranks
    std::vector<double> r_rb;     // benchmark scores/ranks

    void validate() const;
};

struct CorrelationReport {
    SpearmanResult spearman;
    OlsResult ols;
    std::vector<double> align_ranks;
    std::vector<double> rb_ranks;
};

CorrelationReport correlation_report(const RankingPair& pair);

nlohmann::json to_json(const CorrelationReport& report, const RankingPair& pair);

}  // namespace carb::stats
