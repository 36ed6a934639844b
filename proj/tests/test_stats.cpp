#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "carb/rng.hpp"
#include "carb/stats.hpp"

using namespace carb;
using namespace carb::stats;

namespace {

// Independent O(n^2) rank oracle: 1 + (#strictly smaller) + (#equal - 1)/2.
std::vector<double> naive_ranks(const std::vector<double>& v) {
    std::vector<double> ranks(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        int smaller = 0, equal = 0;
        for (size_t j = 0; j < v.size(); ++j) {
            if (v[j] < v[i]) ++smaller;
            if (v[j] == v[i]) ++equal;
        }
        ranks[i] = 1.0 + smaller + (equal - 1) / 2.0;
    }
    return ranks;
}

double naive_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("fractional ranks average over tie groups") {
    auto r = fractional_ranks({10.0, 20.0, 30.0});
    CHECK(r == std::vector<double>{1.0, 2.0, 3.0});
    // Two-way tie at positions 1,2 and a three-way tie at the bottom.
    r = fractional_ranks({5.0, 5.0, 1.0, 1.0, 1.0, 9.0});
    CHECK(r[0] == doctest::Approx(4.5));
    CHECK(r[1] == doctest::Approx(4.5));
    CHECK(r[2] == doctest::Approx(2.0));
    CHECK(r[3] == doctest::Approx(2.0));
    CHECK(r[4] == doctest::Approx(2.0));
    CHECK(r[5] == doctest::Approx(6.0));
}

TEST_CASE("spearman endpoints and symmetry") {
    auto up = spearman_rho({1, 2, 3, 4}, {10, 20, 30, 40});
    CHECK(up.rho == doctest::Approx(1.0));
    auto down = spearman_rho({1, 2, 3, 4}, {8, 6, 4, 2});
    CHECK(down.rho == doctest::Approx(-1.0));
    auto ab = spearman_rho({1, 5, 2, 4}, {3, 1, 4, 1});
    auto ba = spearman_rho({3, 1, 4, 1}, {1, 5, 2, 4});
    CHECK(ab.rho == doctest::Approx(ba.rho).epsilon(1e-12));
}

TEST_CASE("spearman is invariant under monotone transforms") {
    std::vector<double> x{0.3, 1.7, 0.9, 2.4, 0.1};
    std::vector<double> y{5.0, 2.0, 9.0, 1.0, 4.0};
    auto base = spearman_rho(x, y);
    std::vector<double> ex;
    for (double v : x) ex.push_back(std::exp(v));
    auto mapped = spearman_rho(ex, y);
    CHECK(base.rho == doctest::Approx(mapped.rho).epsilon(1e-12));
}

TEST_CASE("spearman degenerates on constant input instead of dividing by zero") {
    auto r = spearman_rho({2, 2, 2}, {1, 5, 3});
    CHECK(r.degenerate);
    CHECK(r.rho == 0.0);
    CHECK_THROWS_AS(spearman_rho({1}, {2}), DegenerateInput);
    CHECK_THROWS_AS(spearman_rho({1, 2}, {1, 2, 3}), LengthMismatch);
}

TEST_CASE("spearman matches the naive rank oracle over random tied vectors") {
    SplitMix rng(21);
    int checked = 0;
    for (int trial = 0; trial < 300; ++trial) {
        size_t n = 3 + rng.next_below(6);
        std::vector<double> x(n), y(n);
        // Small alphabet forces frequent ties.
        for (auto& v : x) v = static_cast<double>(rng.next_below(4));
        for (auto& v : y) v = static_cast<double>(rng.next_below(4));
        auto result = spearman_rho(x, y);
        if (result.degenerate) continue;
        double oracle = naive_pearson(naive_ranks(x), naive_ranks(y));
        CHECK(result.rho == doctest::Approx(oracle).epsilon(1e-12));
        ++checked;
    }
    CHECK(checked > 200);
}

TEST_CASE("incomplete beta matches closed forms") {
    for (double x : {0.1, 0.25, 0.5, 0.77, 0.93}) {
        CHECK(incomplete_beta(1, 1, x) == doctest::Approx(x).epsilon(1e-12));
        CHECK(incomplete_beta(2, 2, x) ==
              doctest::Approx(3 * x * x - 2 * x * x * x).epsilon(1e-12));
        CHECK(incomplete_beta(0.5, 0.5, x) ==
              doctest::Approx(2.0 / M_PI * std::asin(std::sqrt(x))).epsilon(1e-10));
        // Reflection identity.
        CHECK(incomplete_beta(2.5, 1.5, x) + incomplete_beta(1.5, 2.5, 1 - x) ==
              doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(incomplete_beta(3, 4, 0.0) == 0.0);
    CHECK(incomplete_beta(3, 4, 1.0) == 1.0);
    CHECK_THROWS_AS(incomplete_beta(1, 1, 1.5), DegenerateInput);
}

TEST_CASE("ols recovers an exact line") {
    std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y;
    for (double v : x) y.push_back(2.5 * v - 1.0);
    auto fit = ols_fit(x, y);
    CHECK(fit.slope == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.p_value == 0.0);
}

TEST_CASE("ols p-value matches the Cauchy tail for one residual degree of freedom") {
    // n = 3 with df = 1: the slope t-statistic is Cauchy, so arranging
    // t = 1 gives a two-sided p of exactly 0.5. With x = {-1, 0, 1} and
    // y = {-b, 2s, b} the slope is b and its standard error works out to
    // 2s/sqrt(3), independent of b; choosing b equal to it forces t = 1.
    double s = 0.3;
    double b = 2.0 * s / std::sqrt(3.0);
    auto fit = ols_fit({-1, 0, 1}, {-b, 2 * s, b});
    CHECK(fit.p_value == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("ols p-value is symmetric in the slope sign and shrinks with signal") {
    std::vector<double> x{1, 2, 3, 4, 5, 6};
    std::vector<double> y{1.1, 1.9, 3.2, 3.8, 5.1, 5.9};
    std::vector<double> neg;
    for (double v : y) neg.push_back(-v);
    auto up = ols_fit(x, y);
    auto down = ols_fit(x, neg);
    CHECK(up.p_value == doctest::Approx(down.p_value).epsilon(1e-12));
    CHECK(up.p_value > 0.0);
    CHECK(up.p_value < 0.01);

    std::vector<double> noisy{3.0, 1.0, 4.0, 1.0, 5.0, 2.0};
    auto weak = ols_fit(x, noisy);
    CHECK(weak.p_value > up.p_value);
}

TEST_CASE("ols input validation") {
    CHECK_THROWS_AS(ols_fit({1, 2}, {1, 2}), DegenerateInput);
    CHECK_THROWS_AS(ols_fit({1, 1, 1}, {1, 2, 3}), DegenerateX);
    CHECK_THROWS_AS(ols_fit({1, 2, 3}, {1, 2}), LengthMismatch);
}

TEST_CASE("ranking pairs validate shape and label uniqueness") {
    RankingPair pair{{"a", "b", "c"}, {1, 2, 3}, {3, 2, 1}};
    pair.validate();
    pair.labels = {"a", "b"};
    CHECK_THROWS_AS(pair.validate(), LengthMismatch);
    pair.labels = {"a", "b", "b"};
    CHECK_THROWS_AS(pair.validate(), MalformedRecord);
    RankingPair tiny{{"a", "b"}, {1, 2}, {2, 1}};
    CHECK_THROWS_AS(tiny.validate(), DegenerateInput);
}

TEST_CASE("correlation report combines spearman, ols, and the rank table") {
    RankingPair pair{{"m1", "m2", "m3", "m4"}, {0.81, 0.74, 0.66, 0.59}, {0.77, 0.71, 0.69, 0.52}};
    auto report = correlation_report(pair);
    CHECK(report.spearman.rho == doctest::Approx(1.0));
    CHECK(report.ols.slope > 0.0);
    CHECK(report.align_ranks.size() == 4);

    auto rec = to_json(report, pair);
    CHECK(rec["spearman_rho"] == doctest::Approx(1.0));
    CHECK(rec["rank_table"].size() == 4);
    CHECK(rec["rank_table"][0]["label"] == "m1");
    CHECK(rec["ols"]["r_squared"].get<double>() > 0.8);
}
