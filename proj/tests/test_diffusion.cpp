#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "numeraire/diffusion.hpp"
#include "numeraire/error.hpp"
#include "numeraire/rng.hpp"

using namespace numeraire;

namespace {

struct Moments {
    double mean = 0.0;
    double se = 0.0;
};

template <class F>
Moments sample_moments(const std::vector<double>& xs, F f) {
    double s = 0.0, ss = 0.0;
    for (double x : xs) {
        const double v = f(x);
        s += v;
        ss += v * v;
    }
    const double n = static_cast<double>(xs.size());
    const double mean = s / n;
    return {mean, std::sqrt(std::max(ss / n - mean * mean, 0.0) / n)};
}

DiffusionModelSpec scalar(double mu, double sigma, double horizon) {
    return DiffusionModelSpec::constant(Eigen::VectorXd::Constant(1, mu), Eigen::MatrixXd::Constant(1, 1, sigma),
                                        horizon);
}

DiffusionModelSpec state_dependent() {
    DiffusionModelSpec spec;
    spec.d = 1;
    spec.m = 1;
    spec.horizon = 1.0;
    spec.s0 = Eigen::VectorXd::Ones(1);
    spec.mu = [](double t, const Eigen::VectorXd& s) {
        return Eigen::VectorXd::Constant(1, 0.1 + 0.05 * std::sin(t) + 0.1 * s(0) / (1.0 + s(0)));
    };
    spec.sigma = [](double, const Eigen::VectorXd& s) {
        return Eigen::MatrixXd::Constant(1, 1, 0.25 + 0.1 * std::cos(std::log(s(0))));
    };
    return spec;
}

}  // namespace

TEST(PriceOfRisk, Examples) {
    Eigen::MatrixXd s1(1, 1);
    s1 << 0.2;
    EXPECT_NEAR(market_price_of_risk(s1, Eigen::VectorXd::Zero(1)).norm(), 0.0, 1e-15);

    Eigen::MatrixXd s2(1, 2);
    s2 << 0.2, 0.0;
    const auto l2 = market_price_of_risk(s2, Eigen::VectorXd::Constant(1, 0.04));
    EXPECT_NEAR(l2(0), 0.2, 1e-14);
    EXPECT_NEAR(l2(1), 0.0, 1e-14);

    Eigen::MatrixXd s3(1, 2);
    s3 << 0.1, 0.1;
    const auto l3 = market_price_of_risk(s3, Eigen::VectorXd::Constant(1, 0.02));
    EXPECT_NEAR(l3(0), 0.1, 1e-14);
    EXPECT_NEAR(l3(1), 0.1, 1e-14);
}

TEST(PriceOfRisk, RankDeficientThrows) {
    Eigen::MatrixXd s(2, 2);
    s << 1.0, 1.0, 1.0, 1.0;
    EXPECT_THROW(market_price_of_risk(s, Eigen::VectorXd::Ones(2)), NumericalError);
    EXPECT_THROW(scalar(0.1, 0.0, 1.0).validate(), NumericalError);
}

TEST(PriceOfRisk, MinimumNormSolutionAgainstPseudoInverse) {
    PhiloxStream rng(3, 0);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 1 + trial % 3;
        const int m = d + trial % 2;
        Eigen::MatrixXd sigma(d, m);
        Eigen::VectorXd mu(d);
        for (int i = 0; i < d; ++i) {
            mu(i) = 0.1 * normal(rng);
            for (int j = 0; j < m; ++j) sigma(i, j) = normal(rng);
        }
        const Eigen::VectorXd oracle = sigma.completeOrthogonalDecomposition().pseudoInverse() * mu;
        const Eigen::VectorXd lambda = market_price_of_risk(sigma, mu);
        EXPECT_LT((lambda - oracle).norm(), 1e-10 * std::max(1.0, oracle.norm()));
        EXPECT_LT((sigma * lambda - mu).norm(), 1e-10);
    }
}

TEST(Simulation, ZeroDriftGivesUnitNumeraire) {
    const auto bundle = simulate(scalar(0.0, 0.3, 2.0), 16, 200, 1);
    for (std::size_t i = 0; i < bundle.size(); ++i) {
        EXPECT_EQ(bundle.log_v_terminal[i], 0.0);
        EXPECT_EQ(bundle.lambda_integral[i], 0.0);
    }
}

TEST(Simulation, ConstantCoefficientMoments) {
    const double mu = 0.1, sigma = 0.2, horizon = 4.0;  // lambda = 0.5, lambda^2 T = 1
    const auto bundle = simulate(scalar(mu, sigma, horizon), 1, 100000, 17);
    ASSERT_EQ(bundle.size(), 100000u);
    for (double alpha : {0.25, 0.5}) {
        const auto m = sample_moments(bundle.log_v_terminal, [&](double lv) { return std::exp(-alpha * lv); });
        EXPECT_NEAR(m.mean, std::exp(-0.5 * alpha * (1.0 - alpha)), 3.0 * m.se);
    }
    const auto inv = sample_moments(bundle.log_v_terminal, [](double lv) { return std::exp(-lv); });
    EXPECT_NEAR(inv.mean, 1.0, 3.0 * inv.se);

    const auto lv = sample_moments(bundle.log_v_terminal, [](double x) { return x; });
    EXPECT_NEAR(lv.mean, 0.5, 3.0 * lv.se);
    const auto lv2 = sample_moments(bundle.log_v_terminal, [](double x) { return (x - 0.5) * (x - 0.5); });
    EXPECT_NEAR(lv2.mean, 1.0, 3.0 * lv2.se);

    std::vector<double> st;
    for (const auto& s : bundle.s_terminal) st.push_back(s(0));
    const auto sm = sample_moments(st, [](double x) { return x; });
    EXPECT_NEAR(sm.mean, std::exp(mu * horizon), 3.0 * sm.se);

    for (double li : bundle.lambda_integral) EXPECT_NEAR(li, 1.0, 1e-12);
}

TEST(Simulation, ReproducibleAndStreamSeparated) {
    const auto spec = scalar(0.1, 0.2, 1.0);
    const auto a = simulate(spec, 8, 100, 5);
    const auto b = simulate(spec, 8, 100, 5);
    const auto c = simulate(spec, 8, 100, 5, false, 9);
    EXPECT_EQ(a.log_v_terminal, b.log_v_terminal);
    EXPECT_NE(a.log_v_terminal, c.log_v_terminal);
}

TEST(Simulation, StepDoublingExactForConstantCoefficients) {
    const auto spec = scalar(0.08, 0.3, 2.0);
    for (std::uint64_t path = 0; path < 20; ++path) {
        const Eigen::MatrixXd fine = generate_increments(1, 64, spec.horizon / 64, 11, 4, path);
        Eigen::MatrixXd coarse(32, 1);
        for (int k = 0; k < 32; ++k) coarse(k, 0) = fine(2 * k, 0) + fine(2 * k + 1, 0);
        const auto a = simulate_path(spec, fine);
        const auto b = simulate_path(spec, coarse);
        EXPECT_NEAR(a.log_v.back(), b.log_v.back(), 1e-12);
        EXPECT_NEAR(a.log_s(64, 0), b.log_s(32, 0), 1e-12);
    }
}

TEST(Simulation, StepDoublingConvergesForStateDependentCoefficients) {
    const auto spec = state_dependent();
    const int reference_steps = 1024;
    std::vector<double> rms;
    for (int steps : {8, 32, 128}) {
        double sq = 0.0;
        const int paths = 200;
        for (int path = 0; path < paths; ++path) {
            const Eigen::MatrixXd fine = generate_increments(1, reference_steps, 1.0 / reference_steps, 13, 4,
                                                             static_cast<std::uint64_t>(path));
            const int block = reference_steps / steps;
            Eigen::MatrixXd coarse = Eigen::MatrixXd::Zero(steps, 1);
            for (int k = 0; k < reference_steps; ++k) coarse(k / block, 0) += fine(k, 0);
            const double diff = simulate_path(spec, fine).log_v.back() - simulate_path(spec, coarse).log_v.back();
            sq += diff * diff;
        }
        rms.push_back(std::sqrt(sq / paths));
    }
    EXPECT_GT(rms[0], rms[1]);
    EXPECT_GT(rms[1], rms[2]);
}

TEST(Replication, ErrorScalesWithSquareRootOfStep) {
    const double mu = 0.05, sigma = 0.3, horizon = 1.0;
    const auto spec = scalar(mu, sigma, horizon);
    const double delta = mu / (sigma * sigma);
    std::vector<double> rms;
    for (int steps : {64, 128}) {
        const auto bundle = simulate(spec, steps, 4000, 21, true);
        double sq = 0.0;
        for (const auto& p : bundle.paths) {
            const double e = replicate_log_numeraire(spec, p) - p.log_v.back();
            sq += e * e;
        }
        const double r = std::sqrt(sq / static_cast<double>(bundle.paths.size()));
        const double predicted =
            0.5 * std::abs(delta * (1.0 - delta)) * sigma * sigma * std::sqrt(2.0 * horizon * horizon / steps);
        EXPECT_NEAR(r / predicted, 1.0, 0.1);
        rms.push_back(r);
    }
    EXPECT_NEAR(rms[0] / rms[1], std::sqrt(2.0), 0.15);
}

TEST(ComparisonBounds, Examples) {
    const auto bundle = simulate(scalar(0.0, 0.3, 1.0), 4, 100, 1);
    const auto s = verify_comparison_bounds(bundle, 0.5, 10.0, 2.0);
    EXPECT_NEAR(s.tail_slack, std::exp(2.0) / 10.0, 1e-14);
    const auto t = verify_comparison_bounds(bundle, 0.5, 4.0, 10.0);
    EXPECT_NEAR(t.integral_slack, std::sqrt(10.0) * std::exp(-0.5), 1e-14);
    EXPECT_TRUE(s.ok());
    EXPECT_THROW(verify_comparison_bounds(bundle, 1.0, 4.0, 10.0), InputError);
}

TEST(ComparisonBounds, HoldOnSimulatedPaths) {
    const auto bundle = simulate(state_dependent(), 32, 20000, 8);
    for (double alpha : {0.1, 0.5, 0.9}) {
        for (double m : {0.5, 1.0, 2.0, 5.0, 20.0}) {
            for (double n : {0.1, 0.5, 1.0, 3.0}) {
                EXPECT_TRUE(verify_comparison_bounds(bundle, alpha, m, n).ok())
                    << alpha << " " << m << " " << n;
            }
        }
    }
}

TEST(SequenceDiagnostic, ShrinkingPriceOfRiskIsNaa) {
    ScalarPowerFamily fam{0.4, 1.0, 0.2, 1.0, 0.0, 1.0};
    std::vector<int> ns;
    for (int n = 1; n <= 12; ++n) ns.push_back(n);
    const auto grid = Policy::default_m_grid();
    const auto alphas = Policy::default_alpha_grid();
    const auto rep = price_of_risk_diagnostic([&](int n) { return fam.member(n); }, ns, grid, alphas, {4000, 4, 3});
    EXPECT_EQ(rep.verdict, Verdict::NAA);
    EXPECT_TRUE(rep.curves_agree);
}

TEST(SequenceDiagnostic, GrowingHorizonIsSaa) {
    ScalarPowerFamily fam{0.4, 0.0, 0.2, 1.0, 1.0, 1.0};
    std::vector<int> ns;
    for (int n = 1; n <= 12; ++n) ns.push_back(n);
    const auto grid = Policy::default_m_grid();
    const auto alphas = Policy::default_alpha_grid();
    const auto rep = price_of_risk_diagnostic([&](int n) { return fam.member(n); }, ns, grid, alphas, {4000, 4, 3});
    EXPECT_EQ(rep.verdict, Verdict::SAA);
    EXPECT_TRUE(rep.curves_agree);
}

TEST(SequenceDiagnostic, FixedModelIsNaa) {
    ScalarPowerFamily fam{0.4, 0.0, 0.2, 1.0, 0.0, 1.0};
    const std::vector<int> ns{1, 2, 3, 4, 5, 6};
    const auto grid = Policy::default_m_grid();
    const auto alphas = Policy::default_alpha_grid();
    const auto rep = price_of_risk_diagnostic([&](int n) { return fam.member(n); }, ns, grid, alphas, {4000, 2, 3});
    EXPECT_EQ(rep.verdict, Verdict::NAA);
    EXPECT_TRUE(rep.curves_agree);
    for (int e : rep.excluded) EXPECT_EQ(e, 0);
}
