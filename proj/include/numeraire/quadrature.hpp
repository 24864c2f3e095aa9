#pragma once

#include <functional>
#include <span>
#include <vector>

namespace numeraire {

// Gauss-Hermite rule for the weight exp(-x^2), computed by Golub-Welsch.
struct HermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Cached per order; thread-safe.
const HermiteRule& hermite_rule(int order);

// E f(xi), xi ~ N(0,1), with a fixed rule: pi^{-1/2} sum w_i f(sqrt(2) x_i).
double gaussian_expectation(const std::function<double(double)>& f, int order);

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;  // |difference| between the last two orders
    int order = 0;
    bool converged = false;
};

// Doubles the order from `order` until successive values differ by less than
// tol or max_order is exceeded.
QuadratureResult gaussian_expectation_adaptive(const std::function<double(double)>& f, int order = 64,
                                               double tol = 1e-10, int max_order = 512);

}  // namespace numeraire
