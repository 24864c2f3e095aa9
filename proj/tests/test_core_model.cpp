#include <gtest/gtest.h>

#include <cmath>

#include "markets.hpp"
#include "numeraire/core_model.hpp"
#include "numeraire/error.hpp"
#include "numeraire/market_io.hpp"

using namespace numeraire;
using testing_markets::binomial;
using testing_markets::one_period;

namespace {

bool mentions(const ValidationReport& r, const std::string& needle) {
    for (const auto& v : r.violations) {
        if (v.find(needle) != std::string::npos) return true;
    }
    return false;
}

Strategy single_holding(const FiniteMarket& m, double units) {
    Strategy s = Strategy::zeros(m);
    s.holdings[static_cast<std::size_t>(m.tree().root())][0] = units;
    return s;
}

}  // namespace

TEST(Validation, BinomialIsWellFormed) { EXPECT_TRUE(validate_market(binomial()).ok()); }

TEST(Validation, BranchSumReported) {
    const auto m = one_period({1.2, 0.9}, {0.6, 0.5});
    const auto r = validate_market(m);
    EXPECT_FALSE(r.ok());
    EXPECT_TRUE(mentions(r, "branch sum 1.1")) << r.violations.front();
}

TEST(Validation, NonUniformDepthReported) {
    std::vector<NodeSpec> nodes{{0, 0, std::nullopt, 1.0, {1.0}},
                                {1, 1, 0, 0.5, {1.1}},
                                {2, 1, 0, 0.5, {0.9}},
                                {3, 2, 1, 1.0, {1.1}}};
    const FiniteMarket m(2, 1, nodes);
    EXPECT_TRUE(mentions(validate_market(m), "non-uniform depth"));
}

TEST(Validation, NonPositivePriceAndZeroProbability) {
    const auto m = one_period({1.2, -0.1}, {1.0, 0.0});
    const auto r = validate_market(m);
    EXPECT_GE(r.violations.size(), 2u);
}

TEST(EventTree, RejectsUnknownParentAndDuplicates) {
    std::vector<NodeSpec> orphan{{0, 0, std::nullopt, 1.0, {1.0}}, {1, 1, 7, 1.0, {1.0}}};
    EXPECT_THROW(EventTree(1, orphan), InputError);
    std::vector<NodeSpec> dup{{0, 0, std::nullopt, 1.0, {1.0}}, {0, 1, 0, 1.0, {1.0}}};
    EXPECT_THROW(EventTree(1, dup), InputError);
}

TEST(ValueProcess, ZeroHoldingsKeepWealth) {
    const auto m = binomial();
    const auto v = evaluate_value_process(m, Strategy::zeros(m), 1.0);
    for (double x : v.wealth) EXPECT_DOUBLE_EQ(x, 1.0);
    EXPECT_TRUE(v.nonnegative);
}

TEST(ValueProcess, OneUnit) {
    const auto m = binomial();
    const auto v = evaluate_value_process(m, single_holding(m, 1.0), 1.0);
    const auto xt = v.terminal(m);
    EXPECT_NEAR(xt[0], 1.2, 1e-15);
    EXPECT_NEAR(xt[1], 0.9, 1e-15);
}

TEST(ValueProcess, AdmissibilityBoundary) {
    const auto m = binomial();
    const auto at_edge = evaluate_value_process(m, single_holding(m, -5.0), 1.0);
    EXPECT_NEAR(at_edge.terminal(m)[0], 0.0, 1e-15);
    EXPECT_TRUE(at_edge.nonnegative);
    const auto beyond = evaluate_value_process(m, single_holding(m, -6.0), 1.0);
    EXPECT_FALSE(beyond.nonnegative);
}

TEST(ValueProcess, DimensionMismatchAndNegativeInitialWealth) {
    const auto m = binomial();
    Strategy s = Strategy::zeros(m);
    s.holdings[0] = {1.0, 2.0};
    EXPECT_THROW(evaluate_value_process(m, s, 1.0), InputError);
    EXPECT_THROW(evaluate_value_process(m, Strategy::zeros(m), -1.0), InputError);
}

TEST(ValueProcess, ConeProperty) {
    PhiloxStream rng(5, 0);
    const auto m = testing_markets::random_tree(2, 3, rng);
    for (int trial = 0; trial < 20; ++trial) {
        const Strategy s = sample_admissible_strategy(m, 1.0, rng);
        Strategy doubled = s;
        for (auto& h : doubled.holdings) {
            for (auto& x : h) x *= 2.0;
        }
        const auto a = evaluate_value_process(m, s, 1.0);
        const auto b = evaluate_value_process(m, doubled, 2.0);
        for (std::size_t i = 0; i < a.wealth.size(); ++i) EXPECT_NEAR(b.wealth[i], 2.0 * a.wealth[i], 1e-12);
        EXPECT_TRUE(a.nonnegative);
    }
}

TEST(Expectation, Examples) {
    const auto m = binomial();
    const std::vector<double> c{3.0, 3.0};
    EXPECT_NEAR(expectation(m, c), 3.0, 1e-15);
    const std::vector<double> f{1.8, 0.6};
    EXPECT_NEAR(expectation(m, f), 1.32, 1e-15);
    EXPECT_EQ(expectation(m, f, SubProbabilityMeasure({0.0, 0.0})), 0.0);
}

TEST(Expectation, LinearInFunctionAndMeasure) {
    PhiloxStream rng(9, 0);
    const auto m = testing_markets::random_tree(2, 3, rng);
    const std::size_t n = m.num_leaves();
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> f(n), g(n), q1(n), q2(n), mix(n), sum(n);
        for (std::size_t i = 0; i < n; ++i) {
            f[i] = rng.uniform() * 4 - 2;
            g[i] = rng.uniform() * 4 - 2;
            q1[i] = rng.uniform() / static_cast<double>(n);
            q2[i] = rng.uniform() / static_cast<double>(n);
            mix[i] = 0.3 * q1[i] + 0.7 * q2[i];
            sum[i] = 2.0 * f[i] - 3.0 * g[i];
        }
        const SubProbabilityMeasure a(q1), b(q2), c(mix);
        EXPECT_NEAR(expectation(m, sum, a), 2.0 * expectation(m, f, a) - 3.0 * expectation(m, g, a), 1e-12);
        EXPECT_NEAR(expectation(m, f, c), 0.3 * expectation(m, f, a) + 0.7 * expectation(m, f, b), 1e-12);
    }
}

TEST(Supermartingale, Examples) {
    const auto m = binomial();
    const std::vector<double> constant{2.0, 2.0, 2.0};
    auto r = is_supermartingale(m, constant, 0.0);
    EXPECT_TRUE(r.holds);
    EXPECT_NEAR(r.worst_slack, 0.0, 1e-15);

    const SubProbabilityMeasure qhat({1.0 / 3.0, 2.0 / 3.0});
    const std::vector<double> s{1.0, 1.2, 0.9};
    r = is_supermartingale(m, s, 1e-12, qhat);
    EXPECT_TRUE(r.holds);
    EXPECT_NEAR(r.worst_slack, 0.0, 1e-15);

    const std::vector<double> up{1.0, 1.5, 1.5};
    r = is_supermartingale(m, up, 1e-12, qhat);
    EXPECT_FALSE(r.holds);
    EXPECT_NEAR(r.worst_slack, -0.5, 1e-15);
}

TEST(Supermartingale, WealthTimesDensityOnEnumeratedTrees) {
    // Z built from a martingale measure makes S Z a martingale, hence X Z a
    // supermartingale for every admissible X.
    PhiloxStream rng(11, 0);
    for (int tree = 0; tree < 10; ++tree) {
        const auto m = testing_markets::random_tree(1 + tree % 3, 3, rng);
        const auto& t = m.tree();
        // Martingale weights on the two straddling children, zero elsewhere.
        std::vector<double> z(t.size(), 1.0);
        for (int i : t.topological_order()) {
            if (t.is_leaf(i)) continue;
            const auto& ch = t.node(i).children;
            const double s = m.prices(i)[0];
            const double hi = m.prices(ch[0])[0], lo = m.prices(ch[1])[0];
            const double q_hi = (s - lo) / (hi - lo);
            for (std::size_t c = 0; c < ch.size(); ++c) {
                const double q = c == 0 ? q_hi : (c == 1 ? 1.0 - q_hi : 0.0);
                z[static_cast<std::size_t>(ch[c])] = z[static_cast<std::size_t>(i)] * q / t.node(ch[c]).prob;
            }
        }
        std::vector<double> sz(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) sz[i] = m.prices(static_cast<int>(i))[0] * z[i];
        ASSERT_TRUE(is_supermartingale(m, sz, 1e-10).holds);
        for (int k = 0; k < 20; ++k) {
            const auto x = evaluate_value_process(m, sample_admissible_strategy(m, 1.0, rng), 1.0);
            ASSERT_TRUE(x.nonnegative);
            std::vector<double> xz(t.size());
            for (std::size_t i = 0; i < t.size(); ++i) xz[i] = x.wealth[i] * z[i];
            EXPECT_TRUE(is_supermartingale(m, xz, 1e-10).holds);
        }
    }
}

TEST(SubProbability, Invariants) {
    EXPECT_THROW(SubProbabilityMeasure({0.7, 0.4}), InputError);
    EXPECT_THROW(SubProbabilityMeasure({-0.1, 0.4}), InputError);
    EXPECT_NO_THROW(SubProbabilityMeasure({0.5, 0.5 + 1e-13}));
    EXPECT_NEAR(SubProbabilityMeasure({0.2, 0.3}).mass(), 0.5, 1e-15);
}

TEST(Density, ToMeasureExamples) {
    const auto m = binomial();
    const std::vector<double> one{1.0, 1.0};
    const auto p = density_to_measure(m, one);
    EXPECT_EQ(p.weight(0), 0.6);
    EXPECT_EQ(p.weight(1), 0.4);

    const std::vector<double> inv{1.0 / 1.8, 1.0 / 0.6};
    const auto q = density_to_measure(m, inv);
    EXPECT_NEAR(q.weight(0), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(q.weight(1), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(q.mass(), 1.0, 1e-15);

    const std::vector<double> half{0.5, 0.5};
    const auto h = density_to_measure(m, half);
    EXPECT_NEAR(h.weight(0), 0.3, 1e-15);
    EXPECT_NEAR(h.weight(1), 0.2, 1e-15);
    EXPECT_NEAR(h.mass(), 0.5, 1e-15);

    const std::vector<double> too_big{2.0, 2.0};
    EXPECT_THROW(density_to_measure(m, too_big), InputError);
}

TEST(Density, ProcessInvariants) {
    const auto m = binomial();
    EXPECT_NO_THROW(DensityProcess(m, {1.0, 0.5, 1.5}));
    EXPECT_THROW(DensityProcess(m, {0.9, 0.5, 1.5}), InputError);
    EXPECT_THROW(DensityProcess(m, {1.0, 0.0, 1.5}), InputError);
}

TEST(IidTree, Structure) {
    const std::vector<double> f{1.2, 0.9}, p{0.6, 0.4};
    const auto m = make_iid_tree(3, 1.0, f, p);
    EXPECT_EQ(m.num_leaves(), 8u);
    EXPECT_TRUE(validate_market(m).ok());
    double total = 0.0;
    for (double x : m.leaf_probabilities()) total += x;
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(MarketIo, RoundTrip) {
    PhiloxStream rng(1, 0);
    const auto m = testing_markets::random_tree(2, 3, rng);
    const auto back = market_from_json(market_to_json(m));
    ASSERT_EQ(back.tree().size(), m.tree().size());
    for (std::size_t i = 0; i < m.tree().size(); ++i) {
        EXPECT_EQ(back.prices(static_cast<int>(i))[0], m.prices(static_cast<int>(i))[0]);
    }
}

TEST(MarketIo, LoaderRejectsInvalid) {
    auto doc = market_to_json(one_period({1.2, 0.9}, {0.6, 0.5}));
    EXPECT_THROW(market_from_json(doc), InputError);
    EXPECT_THROW(market_from_json(nlohmann::json{{"T", 1}}), InputError);
    EXPECT_THROW(load_market("/nonexistent/market.json"), InputError);
}
