#include "carb/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace carb::stats {

using nlohmann::json;

std::vector<double> fractional_ranks(const std::vector<double>& values) {
    size_t n = values.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return values[a] < values[b]; });

    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        // Positions i..j (0-based) tie; each gets the mean 1-based rank.
        double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

namespace {

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    double n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

bool is_constant(const std::vector<double>& v) {
    for (double x : v)
        if (x != v.front()) return false;
    return true;
}

}  // namespace

SpearmanResult spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw LengthMismatch("spearman_rho: " + std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()));
    if (x.size() < 2) throw DegenerateInput("spearman_rho: need at least 2 points");
    if (is_constant(x) || is_constant(y)) return {0.0, true};
    return {pearson(fractional_ranks(x), fractional_ranks(y)), false};
}

// Lentz continued fraction for the incomplete beta (Numerical Recipes form).
namespace {
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 200;
    constexpr double kEps = 3e-14;
    constexpr double kFpmin = 1e-300;

    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpmin) d = kFpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpmin) d = kFpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpmin) c = kFpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpmin) d = kFpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpmin) c = kFpmin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}
}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x < 0.0 || x > 1.0) throw DegenerateInput("incomplete_beta: x outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                      b * std::log(1.0 - x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

OlsResult ols_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw LengthMismatch("ols_fit: input lengths differ");
    size_t n = x.size();
    if (n < 3) throw DegenerateInput("ols_fit: need at least 3 points");
    if (is_constant(x)) throw DegenerateX("ols_fit: constant predictor");

    double nd = static_cast<double>(n);
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / nd;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / nd;
    double sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }

    OlsResult result;
    result.slope = sxy / sxx;
    result.intercept = my - result.slope * mx;

    double ss_res = 0;
    for (size_t i = 0; i < n; ++i) {
        double resid = y[i] - (result.intercept + result.slope * x[i]);
        ss_res += resid * resid;
    }
    result.r_squared = syy > 0 ? 1.0 - ss_res / syy : 1.0;

    double df = nd - 2.0;
    double se2 = ss_res / df / sxx;
    if (se2 <= 0) {
        result.p_value = 0.0;  // exact fit
    } else {
        double t = result.slope / std::sqrt(se2);
        // Two-sided: P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2).
        result.p_value = incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
    }
    return result;
}

void RankingPair::validate() const {
    if (labels.size() != r_align.size() || labels.size() != r_rb.size())
        throw LengthMismatch("ranking pair: misaligned sequences");
    if (labels.size() < 3) throw DegenerateInput("ranking pair: need at least 3 entries");
    std::set<std::string> unique(labels.begin(), labels.end());
    if (unique.size() != labels.size()) throw MalformedRecord("ranking pair: duplicate labels");
}

CorrelationReport correlation_report(const RankingPair& pair) {
    pair.validate();
    CorrelationReport report;
    report.spearman = spearman_rho(pair.r_align, pair.r_rb);
    report.ols = ols_fit(pair.r_rb, pair.r_align);
    report.align_ranks = fractional_ranks(pair.r_align);
    report.rb_ranks = fractional_ranks(pair.r_rb);
    return report;
}

json to_json(const CorrelationReport& report, const RankingPair& pair) {
    json rec;
    rec["spearman_rho"] = report.spearman.rho;
    rec["spearman_degenerate"] = report.spearman.degenerate;
    rec["ols"] = {{"slope", report.ols.slope},
                  {"intercept", report.ols.intercept},
                  {"r_squared", report.ols.r_squared},
                  {"p_value", report.ols.p_value}};
    json rows = json::array();
    for (size_t i = 0; i < pair.labels.size(); ++i)
        rows.push_back({{"label", pair.labels[i]},
                        {"r_align", pair.r_align[i]},
                        {"r_rb", pair.r_rb[i]},
                        {"align_rank", report.align_ranks[i]},
                        {"rb_rank", report.rb_ranks[i]}});
    rec["rank_table"] = rows;
    return rec;
}

}  // namespace carb::stats
