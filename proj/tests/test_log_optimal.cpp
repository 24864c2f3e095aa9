#include <gtest/gtest.h>

#include <cmath>

#include "markets.hpp"
#include "numeraire/error.hpp"
#include "numeraire/log_optimal.hpp"

using namespace numeraire;
using testing_markets::binomial;
using testing_markets::one_period;

namespace {

const double kBinomialLogValue = 0.6 * std::log(1.8) + 0.4 * std::log(0.6);

// max over admissible delta of sum p ln(1 + delta dS) by a 1e-3 grid over the
// whole admissible interval, refined with step 1e-6 around the best point.
double grid_search(const std::vector<double>& ds, const std::vector<double>& p) {
    double lo = -1e300, hi = 1e300;
    for (double x : ds) {
        if (x > 0) lo = std::max(lo, -1.0 / x);
        if (x < 0) hi = std::min(hi, -1.0 / x);
    }
    auto f = [&](double d) {
        double s = 0.0;
        for (std::size_t c = 0; c < ds.size(); ++c) s += p[c] * std::log(1.0 + d * ds[c]);
        return s;
    };
    double best = lo + 1e-3, fbest = -1e300;
    for (double d = lo + 1e-3; d < hi; d += 1e-3) {
        if (const double v = f(d); std::isfinite(v) && v > fbest) fbest = v, best = d;
    }
    const double a = std::max(lo + 1e-9, best - 2e-3), b = std::min(hi - 1e-9, best + 2e-3);
    for (double d = a; d <= b; d += 1e-6) {
        if (const double v = f(d); std::isfinite(v) && v > fbest) fbest = v;
    }
    return fbest;
}

}  // namespace

TEST(MartingaleMeasure, Binomial) {
    const auto q = find_martingale_measure(binomial());
    ASSERT_TRUE(q);
    EXPECT_NEAR(q->weight(0), 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(q->weight(1), 2.0 / 3.0, 1e-12);
}

TEST(MartingaleMeasure, BothUpHasNone) {
    EXPECT_FALSE(find_martingale_measure(one_period({1.2, 1.1}, {0.5, 0.5})));
}

TEST(MartingaleMeasure, TrinomialInterior) {
    const auto q = find_martingale_measure(one_period({1.3, 1.0, 0.8}, {0.3, 0.4, 0.3}));
    ASSERT_TRUE(q);
    const double a = q->weight(0), b = q->weight(1), c = q->weight(2);
    EXPECT_GT(std::min({a, b, c}), 0.0);
    EXPECT_NEAR(a + b + c, 1.0, 1e-9);
    EXPECT_NEAR(1.3 * a + b + 0.8 * c, 1.0, 1e-9);
}

TEST(Solver, BinomialExample) {
    const auto m = binomial();
    const auto sol = solve_log_optimal(m);
    EXPECT_NEAR(sol.log_value, kBinomialLogValue, 1e-12);
    EXPECT_NEAR(sol.strategy.holdings[0][0], 4.0, 1e-9);
    EXPECT_NEAR(sol.terminal[0], 1.8, 1e-12);
    EXPECT_NEAR(sol.terminal[1], 0.6, 1e-12);
    EXPECT_NEAR(sol.qhat.weight(0), 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(sol.qhat.weight(1), 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(sol.dual_value, kBinomialLogValue, 1e-12);
    EXPECT_LE(sol.gap, 1e-12);
    EXPECT_NEAR(sol.value.wealth[0], 1.0, 0.0);
}

TEST(Solver, MartingaleMarketGivesUnitNumeraire) {
    const auto m = one_period({1.2, 0.9}, {1.0 / 3.0, 2.0 / 3.0});
    const auto sol = solve_log_optimal(m);
    EXPECT_NEAR(sol.strategy.holdings[0][0], 0.0, 1e-12);
    for (double v : sol.terminal) EXPECT_NEAR(v, 1.0, 1e-12);
    EXPECT_NEAR(sol.log_value, 0.0, 1e-15);
    EXPECT_NEAR(sol.qhat.weight(0), 1.0 / 3.0, 1e-12);
}

TEST(Solver, ArbitrageIsAnError) {
    try {
        solve_log_optimal(one_period({1.2, 1.1}, {0.5, 0.5}));
        FAIL() << "expected ArbitrageError";
    } catch (const ArbitrageError& e) {
        EXPECT_NE(std::string(e.what()).find("small market admits arbitrage"), std::string::npos);
    }
}

TEST(Solver, TwoPeriodIidIsMultiplicative) {
    const std::vector<double> f{1.2, 0.9}, p{0.6, 0.4};
    const auto m = make_iid_tree(2, 1.0, f, p);
    const auto sol = solve_log_optimal(m);
    EXPECT_NEAR(sol.log_value, 2.0 * kBinomialLogValue, 1e-12);
    const std::vector<double> expected{1.8 * 1.8, 1.8 * 0.6, 0.6 * 1.8, 0.6 * 0.6};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(sol.terminal[i], expected[i], 1e-12);
}

TEST(Solver, TwoPeriodMatchesBruteForceOverStrategyGrid) {
    // Terminal log wealth for fractions (a at root, b after up, c after down).
    const std::vector<double> f{1.2, 0.9}, p{0.6, 0.4};
    const auto m = make_iid_tree(2, 1.0, f, p);
    auto value = [&](double a, double b, double c) {
        double s = 0.0;
        const double du = 0.2, dd = -0.1;
        s += p[0] * std::log(1 + a * du) + p[1] * std::log(1 + a * dd);
        s += p[0] * (p[0] * std::log(1 + b * du) + p[1] * std::log(1 + b * dd));
        s += p[1] * (p[0] * std::log(1 + c * du) + p[1] * std::log(1 + c * dd));
        return s;
    };
    double best = -1e300;
    for (double a = -4.9; a < 9.99; a += 0.01) {
        for (double b = 3.9; b < 4.1; b += 0.01) {
            best = std::max(best, value(a, b, b));
        }
    }
    const auto sol = solve_log_optimal(m);
    EXPECT_GE(sol.log_value, best - 1e-12);
    EXPECT_NEAR(sol.log_value, best, 1e-6);
}

TEST(Solver, BruteForceOnePeriod) {
    PhiloxStream rng(21, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t k = 2 + trial % 2;
        std::vector<double> up{1.02 + 0.5 * rng.uniform(), 0.98 - 0.4 * rng.uniform()};
        if (k == 3) up.push_back(0.6 + 0.9 * rng.uniform());
        const auto p = testing_markets::random_probs(k, rng);
        const auto sol = solve_log_optimal(one_period(up, p));
        std::vector<double> ds;
        for (double u : up) ds.push_back(u - 1.0);
        EXPECT_NEAR(sol.log_value, grid_search(ds, p), 1e-5);
    }
}

TEST(Solver, PriceScalingInvariance) {
    const auto a = solve_log_optimal(one_period({1.3, 1.0, 0.8}, {0.3, 0.4, 0.3}));
    const auto b = solve_log_optimal(one_period({3.9, 3.0, 2.4}, {0.3, 0.4, 0.3}, 3.0));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a.terminal[i], b.terminal[i], 1e-12);
    EXPECT_NEAR(b.strategy.holdings[0][0] * 3.0, a.strategy.holdings[0][0], 1e-10);
}

TEST(Solver, RedundantAssetsUseMinimumNorm) {
    std::vector<NodeSpec> nodes{{0, 0, std::nullopt, 1.0, {1.0, 1.0}},
                                {1, 1, 0, 0.6, {1.2, 1.2}},
                                {2, 1, 0, 0.4, {0.9, 0.9}}};
    const FiniteMarket m(1, 2, nodes);
    const auto sol = solve_log_optimal(m);
    EXPECT_NEAR(sol.terminal[0], 1.8, 1e-10);
    EXPECT_NEAR(sol.terminal[1], 0.6, 1e-10);
    EXPECT_NEAR(sol.strategy.holdings[0][0], 2.0, 1e-8);
    EXPECT_NEAR(sol.strategy.holdings[0][1], 2.0, 1e-8);
}

TEST(Solver, NumeraireProperties) {
    PhiloxStream rng(33, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = testing_markets::random_tree(2, 3, rng);
        const auto sol = solve_log_optimal(m);
        std::vector<double> inv;
        for (double v : sol.terminal) inv.push_back(1.0 / v);
        EXPECT_NEAR(expectation(m, inv), 1.0, 1e-9);
        EXPECT_NEAR(sol.qhat.mass(), 1.0, 1e-9);
        EXPECT_GT(sol.value.min_wealth, 0.0);
        for (int k = 0; k < 20; ++k) {
            const auto x = evaluate_value_process(m, sample_admissible_strategy(m, 1.0, rng), 1.0);
            const auto xt = x.terminal(m);
            std::vector<double> ratio, log_ratio;
            for (std::size_t i = 0; i < xt.size(); ++i) ratio.push_back(xt[i] / sol.terminal[i]);
            EXPECT_LE(expectation(m, ratio), 1.0 + 1e-9);
            // Relative log-optimality; skip strategies that hit zero.
            bool positive = true;
            for (double r : ratio) positive = positive && r > 0.0;
            if (positive) {
                for (double r : ratio) log_ratio.push_back(std::log(r));
                EXPECT_LE(expectation(m, log_ratio), 1e-12);
            }
        }
    }
}

TEST(ReverseEntropy, Examples) {
    const SubProbabilityMeasure p({0.6, 0.4});
    EXPECT_NEAR(reverse_entropy(p, p), 0.0, 1e-15);
    EXPECT_NEAR(reverse_entropy(p, SubProbabilityMeasure({1.0 / 3.0, 2.0 / 3.0})), kBinomialLogValue, 1e-12);
    EXPECT_NEAR(reverse_entropy(SubProbabilityMeasure({1.0, 0.0}), SubProbabilityMeasure({0.5, 0.5})), std::log(2.0),
                1e-15);
    EXPECT_THROW(reverse_entropy(p, SubProbabilityMeasure({1.0, 0.0})), InputError);
}

TEST(Duality, BinomialSingleton) {
    const auto m = binomial();
    const auto sol = solve_log_optimal(m);
    const auto rep = verify_duality(m, sol, 100, 1);
    EXPECT_TRUE(rep.passed());
    EXPECT_NEAR(rep.min_sampled_entropy, kBinomialLogValue, 1e-9);
}

TEST(Duality, TrinomialSampledDominance) {
    const auto m = one_period({1.3, 1.0, 0.8}, {0.3, 0.4, 0.3});
    const auto sol = solve_log_optimal(m);
    const auto rep = verify_duality(m, sol, 500, 2);
    EXPECT_TRUE(rep.martingale_ok);
    EXPECT_TRUE(rep.entropy_ok);
    EXPECT_GE(rep.worst_entropy_margin, -1e-9);
    EXPECT_TRUE(rep.numeraire_ok);
    EXPECT_LE(rep.max_ratio_expectation, 1.0 + 1e-9);
}

TEST(Duality, MartingaleMarket) {
    const auto m = one_period({1.2, 0.9}, {1.0 / 3.0, 2.0 / 3.0});
    const auto rep = verify_duality(m, solve_log_optimal(m), 100, 3);
    EXPECT_TRUE(rep.passed());
}

TEST(Duality, SampledMeasuresAreMartingaleMeasures) {
    PhiloxStream rng(8, 0);
    const auto m = testing_markets::random_tree(2, 3, rng);
    PhiloxStream draw(8, 1);
    for (int k = 0; k < 50; ++k) {
        const auto q = sample_martingale_measure(m, draw);
        EXPECT_NEAR(q.mass(), 1.0, 1e-12);
        std::vector<double> s;
        for (std::size_t i = 0; i < m.tree().size(); ++i) s.push_back(m.prices(static_cast<int>(i))[0]);
        std::vector<double> neg(s);
        for (auto& x : neg) x = -x;
        EXPECT_TRUE(is_supermartingale(m, s, 1e-10, q).holds);
        EXPECT_TRUE(is_supermartingale(m, neg, 1e-10, q).holds);
    }
}

TEST(Serialization, SolutionDocument) {
    const auto m = binomial();
    const auto doc = solution_to_json(m, solve_log_optimal(m));
    for (const char* key : {"log_value", "dual_value", "gap", "qhat", "strategy"}) EXPECT_TRUE(doc.contains(key)) << key;
    EXPECT_NEAR(doc["log_value"].get<double>(), kBinomialLogValue, 1e-12);
}
