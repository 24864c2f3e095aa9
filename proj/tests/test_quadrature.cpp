#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "numeraire/quadrature.hpp"

using namespace numeraire;

TEST(Hermite, WeightsSumToSqrtPi) {
    for (int order : {1, 2, 8, 64, 256}) {
        const auto& r = hermite_rule(order);
        ASSERT_EQ(r.nodes.size(), static_cast<std::size_t>(order));
        double s = 0.0;
        for (double w : r.weights) s += w;
        EXPECT_NEAR(s, std::sqrt(std::numbers::pi), 1e-12) << order;
    }
}

TEST(Hermite, NodesSymmetric) {
    const auto& r = hermite_rule(9);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(r.nodes[i], -r.nodes[8 - i], 1e-13);
    EXPECT_NEAR(r.nodes[4], 0.0, 1e-13);
}

TEST(Hermite, GaussianMomentsExact) {
    // E xi^(2k) = (2k - 1)!!
    double dfact = 1.0;
    for (int k = 1; k <= 8; ++k) {
        dfact *= 2 * k - 1;
        EXPECT_NEAR(gaussian_expectation([k](double x) { return std::pow(x, 2 * k); }, 16), dfact, 1e-9 * dfact);
        EXPECT_NEAR(gaussian_expectation([k](double x) { return std::pow(x, 2 * k - 1); }, 16), 0.0, 1e-9 * dfact);
    }
}

TEST(Hermite, LognormalMean) {
    const auto r = gaussian_expectation_adaptive([](double x) { return std::exp(0.7 * x); });
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value, std::exp(0.245), 1e-12);
}

TEST(Hermite, AdaptiveReportsFailure) {
    const auto r = gaussian_expectation_adaptive([](double x) { return std::cos(40.0 * x); }, 4, 1e-12, 16);
    EXPECT_FALSE(r.converged);
    EXPECT_GT(r.error, 0.0);
}

TEST(Hermite, InvalidOrder) { EXPECT_THROW(hermite_rule(0), std::exception); }
