#include "numeraire/log_optimal.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "numeraire/error.hpp"

namespace numeraire {

namespace {

// Rows are children, columns assets: S_child - S_node.
Eigen::MatrixXd price_increments(const FiniteMarket& m, int node) {
    const auto& children = m.tree().node(node).children;
    Eigen::MatrixXd inc(static_cast<Eigen::Index>(children.size()), m.dim());
    for (std::size_t c = 0; c < children.size(); ++c) {
        for (int j = 0; j < m.dim(); ++j) {
            inc(static_cast<Eigen::Index>(c), j) = m.prices(children[c])[j] - m.prices(node)[j];
        }
    }
    return inc;
}

bool next_combination(std::vector<int>& idx, int n) {
    const int r = static_cast<int>(idx.size());
    int i = r - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - r + i) --i;
    if (i < 0) return false;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < r; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    return true;
}

// Per-edge probabilities of the vertex-average measure; empty if some node
// has no strictly positive local solution.
std::optional<std::vector<double>> average_vertex_edges(const FiniteMarket& m) {
    const EventTree& tree = m.tree();
    std::vector<double> edge(tree.size(), 1.0);
    for (int i : tree.internal_nodes()) {
        const auto vertices = martingale_vertices(m, i);
        if (vertices.empty()) return std::nullopt;
        const auto& children = tree.node(i).children;
        for (std::size_t c = 0; c < children.size(); ++c) {
            double avg = 0.0;
            for (const auto& v : vertices) avg += v[c];
            avg /= static_cast<double>(vertices.size());
            if (!(avg > 0.0)) return std::nullopt;
            edge[static_cast<std::size_t>(children[c])] = avg;
        }
    }
    return edge;
}

std::vector<double> leaf_weights_from_edges(const FiniteMarket& m, const std::vector<double>& edge) {
    const EventTree& tree = m.tree();
    std::vector<double> path(tree.size(), 1.0);
    for (int i : tree.topological_order()) {
        const int p = tree.node(i).parent;
        if (p >= 0) path[static_cast<std::size_t>(i)] = path[static_cast<std::size_t>(p)] * edge[static_cast<std::size_t>(i)];
    }
    return leaf_values(m, path);
}

struct NodeResult {
    Eigen::VectorXd fraction;  // holdings per unit of wealth
    int iterations = 0;
    double gradient_norm = 0.0;
};

// Maximizes sum_c p_c ln(1 + <h, dS_c>) by damped Newton from h = 0.
NodeResult solve_node(const Eigen::MatrixXd& inc, const Eigen::VectorXd& prob, const SolverOptions& opts,
                      std::int64_t node_id) {
    constexpr double kMinWealth = 1e-10;
    const Eigen::Index d = inc.cols();
    NodeResult res;
    res.fraction = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd& h = res.fraction;

    auto objective = [&](const Eigen::VectorXd& x, double& out) {
        const Eigen::VectorXd w = Eigen::VectorXd::Ones(inc.rows()) + inc * x;
        if (w.minCoeff() < kMinWealth) return false;
        out = prob.dot(w.array().log().matrix());
        return true;
    };

    double f = 0.0;
    objective(h, f);
    int polish = 0;
    for (int it = 0;; ++it) {
        const Eigen::VectorXd w = Eigen::VectorXd::Ones(inc.rows()) + inc * h;
        const Eigen::VectorXd pw = prob.array() / w.array();
        const Eigen::VectorXd grad = inc.transpose() * pw;
        res.gradient_norm = grad.norm();
        res.iterations = it;
        // Once converged, take up to two more full Newton steps: the dual
        // residual |sum p/w - 1| = |<h, grad>| scales with |h|.
        if (res.gradient_norm <= opts.tol) {
            if (polish >= 2 || res.gradient_norm == 0.0) return res;
            ++polish;
        }
        if (it >= opts.max_iterations) {
            std::ostringstream os;
            os << "Newton did not converge at node " << node_id << " after " << it
               << " iterations (|grad| = " << res.gradient_norm << ", |h| = " << h.norm()
               << "); the martingale polytope is likely too thin";
            throw NumericalError(os.str());
        }

        const Eigen::VectorXd sw = pw.array() / w.array();
        const Eigen::MatrixXd hess = inc.transpose() * sw.asDiagonal() * inc;
        const Eigen::VectorXd step = hess.completeOrthogonalDecomposition().solve(grad);
        const double decrement = grad.dot(step);

        double t = 1.0;
        bool accepted = false;
        for (int k = 0; k < 80; ++k, t *= 0.5) {
            const Eigen::VectorXd trial = h + t * step;
            double ft = 0.0;
            if (!objective(trial, ft)) continue;
            // In the quadratic regime the Armijo test is below roundoff; only feasibility matters.
            if (decrement < 1e-12 || ft >= f + 0.25 * t * decrement) {
                h = trial;
                f = ft;
                accepted = true;
                break;
            }
        }
        if (!accepted && polish > 0) return res;
        if (!accepted) {
            std::ostringstream os;
            os << "line search failed at node " << node_id << " (|grad| = " << res.gradient_norm << ")";
            throw NumericalError(os.str());
        }
    }
}

}  // namespace

std::vector<std::vector<double>> martingale_vertices(const FiniteMarket& m, int node) {
    const auto& children = m.tree().node(node).children;
    const auto k = static_cast<Eigen::Index>(children.size());
    if (k == 0) return {};
    const Eigen::MatrixXd inc = price_increments(m, node);
    const Eigen::Index rows = m.dim() + 1;

    Eigen::MatrixXd a(rows, k);
    a.row(0).setOnes();
    a.bottomRows(m.dim()) = inc.transpose();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
    b(0) = 1.0;

    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> full(a);
    full.setThreshold(1e-12);
    const auto r = static_cast<int>(full.rank());

    std::vector<std::vector<double>> vertices;
    std::vector<int> idx(static_cast<std::size_t>(r));
    std::iota(idx.begin(), idx.end(), 0);
    do {
        Eigen::MatrixXd sub(rows, r);
        for (int j = 0; j < r; ++j) sub.col(j) = a.col(idx[static_cast<std::size_t>(j)]);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
        qr.setThreshold(1e-12);
        if (qr.rank() != r) continue;
        const Eigen::VectorXd x = qr.solve(b);
        if ((sub * x - b).norm() > 1e-10 * scale) continue;
        if (x.minCoeff() < -1e-12) continue;

        std::vector<double> q(static_cast<std::size_t>(k), 0.0);
        double sum = 0.0;
        for (int j = 0; j < r; ++j) {
            const double v = std::max(0.0, x(j));
            q[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])] = v;
            sum += v;
        }
        for (auto& v : q) v /= sum;
        const bool seen = std::any_of(vertices.begin(), vertices.end(), [&](const std::vector<double>& v) {
            for (std::size_t c = 0; c < v.size(); ++c) {
                if (std::abs(v[c] - q[c]) > 1e-12) return false;
            }
            return true;
        });
        if (!seen) vertices.push_back(std::move(q));
    } while (next_combination(idx, static_cast<int>(k)));
    return vertices;
}

std::optional<SubProbabilityMeasure> find_martingale_measure(const FiniteMarket& m) {
    const auto edge = average_vertex_edges(m);
    if (!edge) return std::nullopt;
    return SubProbabilityMeasure(leaf_weights_from_edges(m, *edge));
}

SubProbabilityMeasure sample_martingale_measure(const FiniteMarket& m, PhiloxStream& rng) {
    const EventTree& tree = m.tree();
    std::vector<double> edge(tree.size(), 1.0);
    std::gamma_distribution<double> gamma(1.0, 1.0);
    for (int i : tree.internal_nodes()) {
        const auto vertices = martingale_vertices(m, i);
        if (vertices.empty()) throw ArbitrageError("small market admits arbitrage");
        std::vector<double> w(vertices.size());
        double total = 0.0;
        for (auto& x : w) total += (x = gamma(rng));
        const auto& children = tree.node(i).children;
        for (std::size_t c = 0; c < children.size(); ++c) {
            double q = 0.0;
            for (std::size_t v = 0; v < vertices.size(); ++v) q += w[v] / total * vertices[v][c];
            edge[static_cast<std::size_t>(children[c])] = q;
        }
    }
    return SubProbabilityMeasure(leaf_weights_from_edges(m, edge));
}

NumeraireSolution solve_log_optimal(const FiniteMarket& m, const SolverOptions& opts) {
    if (!average_vertex_edges(m)) throw ArbitrageError("small market admits arbitrage");
    const EventTree& tree = m.tree();

    NumeraireSolution sol;
    sol.strategy = Strategy::zeros(m);
    std::vector<Eigen::VectorXd> fractions(tree.size());
    for (int i : tree.internal_nodes()) {
        const auto& children = tree.node(i).children;
        Eigen::VectorXd prob(static_cast<Eigen::Index>(children.size()));
        for (std::size_t c = 0; c < children.size(); ++c) prob(static_cast<Eigen::Index>(c)) = tree.node(children[c]).prob;
        const NodeResult res = solve_node(price_increments(m, i), prob, opts, tree.node(i).id);
        fractions[static_cast<std::size_t>(i)] = res.fraction;
        sol.iterations = std::max(sol.iterations, res.iterations);
        sol.max_gradient = std::max(sol.max_gradient, res.gradient_norm);
    }

    // Holdings in units: wealth at the node times the per-unit-wealth fraction.
    std::vector<double> wealth(tree.size(), 1.0);
    for (int i : tree.topological_order()) {
        const int p = tree.node(i).parent;
        if (p >= 0) {
            double growth = 1.0;
            const auto& h = fractions[static_cast<std::size_t>(p)];
            for (int j = 0; j < m.dim(); ++j) growth += h(j) * (m.prices(i)[j] - m.prices(p)[j]);
            wealth[static_cast<std::size_t>(i)] = wealth[static_cast<std::size_t>(p)] * growth;
        }
        if (!tree.is_leaf(i)) {
            auto& gamma = sol.strategy.holdings[static_cast<std::size_t>(i)];
            for (int j = 0; j < m.dim(); ++j) gamma[static_cast<std::size_t>(j)] = wealth[static_cast<std::size_t>(i)] * fractions[static_cast<std::size_t>(i)](j);
        }
    }

    sol.value = evaluate_value_process(m, sol.strategy, 1.0);
    if (!(sol.value.min_wealth > 0.0)) throw NumericalError("numeraire portfolio lost strict positivity");
    sol.terminal = sol.value.terminal(m);

    const auto p = m.leaf_probabilities();
    std::vector<double> qhat(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        sol.log_value += p[i] * std::log(sol.terminal[i]);
        qhat[i] = p[i] / sol.terminal[i];
    }
    sol.qhat = SubProbabilityMeasure(std::move(qhat));
    sol.dual_value = reverse_entropy(market_measure(m), sol.qhat);
    sol.gap = std::abs(sol.log_value - sol.dual_value);
    return sol;
}

double reverse_entropy(const SubProbabilityMeasure& p, const SubProbabilityMeasure& q) {
    if (p.size() != q.size()) throw InputError("measures live on different atoms");
    double h = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p.weight(i) == 0.0) continue;
        if (q.weight(i) == 0.0) throw InputError("not equivalent: q vanishes on an atom charged by p");
        h += p.weight(i) * std::log(p.weight(i) / q.weight(i));
    }
    return h;
}

DualityReport verify_duality(const FiniteMarket& m, const NumeraireSolution& sol, int samples,
                                      std::uint64_t seed, double tol) {
    const EventTree& tree = m.tree();
    DualityReport rep;
    rep.samples = samples;

    rep.martingale_slack = 0.0;
    bool first = true;
    std::vector<double> s(tree.size()), neg(tree.size());
    for (int j = 0; j < m.dim(); ++j) {
        for (std::size_t i = 0; i < tree.size(); ++i) {
            s[i] = m.prices(static_cast<int>(i))[j];
            neg[i] = -s[i];
        }
        for (const auto* proc : {&s, &neg}) {
            const auto check = is_supermartingale(m, *proc, tol, sol.qhat);
            if (first || check.worst_slack < rep.martingale_slack) rep.martingale_slack = check.worst_slack;
            first = false;
        }
    }
    rep.martingale_ok = rep.martingale_slack >= -tol;

    const auto p = market_measure(m);
    rep.qhat_entropy = reverse_entropy(p, sol.qhat);
    rep.min_sampled_entropy = std::numeric_limits<double>::infinity();
    rep.worst_entropy_margin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < samples; ++k) {
        PhiloxStream rng(seed, 1, static_cast<std::uint64_t>(k));
        const auto q = sample_martingale_measure(m, rng);
        const double h = reverse_entropy(p, q);
        rep.min_sampled_entropy = std::min(rep.min_sampled_entropy, h);
        rep.worst_entropy_margin = std::min(rep.worst_entropy_margin, h - rep.qhat_entropy);
    }
    rep.entropy_ok = samples == 0 || rep.worst_entropy_margin >= -tol;

    rep.worst_ratio_slack = std::numeric_limits<double>::infinity();
    rep.max_ratio_expectation = -std::numeric_limits<double>::infinity();
    std::vector<double> ratio(tree.size());
    for (int k = 0; k < samples; ++k) {
        PhiloxStream rng(seed, 2, static_cast<std::uint64_t>(k));
        const Strategy st = sample_admissible_strategy(m, 1.0, rng);
        const ValueProcess x = evaluate_value_process(m, st, 1.0);
        for (std::size_t i = 0; i < tree.size(); ++i) ratio[i] = x.wealth[i] / sol.value.wealth[i];
        const auto check = is_supermartingale(m, ratio, tol);
        rep.worst_ratio_slack = std::min(rep.worst_ratio_slack, check.worst_slack);
        rep.max_ratio_expectation = std::max(rep.max_ratio_expectation, expectation(m, leaf_values(m, ratio)));
    }
    rep.numeraire_ok = samples == 0 || rep.worst_ratio_slack >= -tol;
    return rep;
}

nlohmann::json solution_to_json(const FiniteMarket& m, const NumeraireSolution& sol) {
    nlohmann::json strategy = nlohmann::json::array();
    for (int i : m.tree().internal_nodes()) {
        strategy.push_back({{"node", m.tree().node(i).id},
                            {"t", m.tree().node(i).t},
                            {"holdings", sol.strategy.holdings[static_cast<std::size_t>(i)]}});
    }
    return {{"log_value", sol.log_value},
            {"dual_value", sol.dual_value},
            {"gap", sol.gap},
            {"qhat", std::vector<double>(sol.qhat.weights().begin(), sol.qhat.weights().end())},
            {"terminal_value", sol.terminal},
            {"strategy", std::move(strategy)}};
}

}  // namespace numeraire
