#include "numeraire/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "numeraire/error.hpp"

namespace numeraire {

namespace {

HermiteRule build_rule(int order) {
    // Jacobi matrix of the physicists' Hermite recurrence: off-diagonal sqrt(k/2).
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(order, order);
    for (int k = 1; k < order; ++k) {
        jac(k, k - 1) = jac(k - 1, k) = std::sqrt(0.5 * k);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jac);
    HermiteRule rule;
    rule.nodes.resize(static_cast<std::size_t>(order));
    rule.weights.resize(static_cast<std::size_t>(order));
    const double mu0 = std::sqrt(std::numbers::pi);
    for (int i = 0; i < order; ++i) {
        const double v = eig.eigenvectors()(0, i);
        rule.nodes[static_cast<std::size_t>(i)] = eig.eigenvalues()(i);
        rule.weights[static_cast<std::size_t>(i)] = mu0 * v * v;
    }
    // The exact rule is symmetric; enforce it so odd moments cancel.
    for (int i = 0, j = order - 1; i <= j; ++i, --j) {
        const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(j);
        const double x = 0.5 * (rule.nodes[b] - rule.nodes[a]);
        const double w = 0.5 * (rule.weights[a] + rule.weights[b]);
        rule.nodes[a] = -x;
        rule.nodes[b] = x;
        rule.weights[a] = rule.weights[b] = w;
    }
    return rule;
}

}  // namespace

const HermiteRule& hermite_rule(int order) {
    if (order < 1 || order > 4096) throw InputError("Gauss-Hermite order must be in [1, 4096]");
    static std::mutex mutex;
    static std::map<int, std::unique_ptr<HermiteRule>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[order];
    if (!slot) slot = std::make_unique<HermiteRule>(build_rule(order));
    return *slot;
}

double gaussian_expectation(const std::function<double(double)>& f, int order) {
    const HermiteRule& rule = hermite_rule(order);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        if (rule.weights[i] == 0.0) continue;
        sum += rule.weights[i] * f(std::numbers::sqrt2 * rule.nodes[i]);
    }
    return sum / std::sqrt(std::numbers::pi);
}

QuadratureResult gaussian_expectation_adaptive(const std::function<double(double)>& f, int order, double tol,
                                               int max_order) {
    QuadratureResult res;
    res.order = order;
    res.value = gaussian_expectation(f, order);
    res.error = std::numeric_limits<double>::infinity();
    while (2 * res.order <= max_order) {
        const int next = 2 * res.order;
        const double v = gaussian_expectation(f, next);
        res.error = std::abs(v - res.value);
        res.value = v;
        res.order = next;
        if (res.error < tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

}  // namespace numeraire
