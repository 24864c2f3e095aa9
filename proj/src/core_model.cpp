#include "numeraire/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <sstream>
#include <unordered_map>

#include "numeraire/error.hpp"

namespace numeraire {

EventTree::EventTree(int horizon, std::span<const NodeSpec> nodes) : horizon_(horizon) {
    if (horizon < 0) throw InputError("horizon must be nonnegative");
    if (nodes.empty()) throw InputError("event tree has no nodes");

    std::unordered_map<std::int64_t, int> index;
    nodes_.reserve(nodes.size());
    for (const auto& spec : nodes) {
        const int i = static_cast<int>(nodes_.size());
        if (!index.emplace(spec.id, i).second) {
            throw InputError("duplicate node id " + std::to_string(spec.id));
        }
        nodes_.push_back(Node{spec.id, spec.t, -1, spec.prob, {}});
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!nodes[i].parent) {
            roots_.push_back(static_cast<int>(i));
            continue;
        }
        auto it = index.find(*nodes[i].parent);
        if (it == index.end()) {
            throw InputError("node " + std::to_string(nodes[i].id) + " references unknown parent " +
                             std::to_string(*nodes[i].parent));
        }
        nodes_[i].parent = it->second;
        nodes_[static_cast<std::size_t>(it->second)].children.push_back(static_cast<int>(i));
    }
    if (roots_.empty()) throw InputError("event tree has no root");

    std::deque<int> queue(roots_.begin(), roots_.end());
    while (!queue.empty()) {
        const int i = queue.front();
        queue.pop_front();
        order_.push_back(i);
        for (int c : nodes_[static_cast<std::size_t>(i)].children) queue.push_back(c);
    }
    if (order_.size() != nodes_.size()) throw InputError("parent links contain a cycle");

    leaf_pos_.assign(nodes_.size(), -1);
    for (int i : order_) {
        if (is_leaf(i)) {
            leaf_pos_[static_cast<std::size_t>(i)] = static_cast<int>(leaves_.size());
            leaves_.push_back(i);
        } else {
            internal_.push_back(i);
        }
    }
}

std::vector<double> EventTree::path_probabilities() const {
    std::vector<double> p(nodes_.size(), 0.0);
    for (int i : order_) {
        const Node& n = node(i);
        p[static_cast<std::size_t>(i)] = n.parent < 0 ? 1.0 : p[static_cast<std::size_t>(n.parent)] * n.prob;
    }
    return p;
}

FiniteMarket::FiniteMarket(int horizon, int dim, std::span<const NodeSpec> nodes)
    : tree_(horizon, nodes), dim_(dim) {
    if (dim < 1) throw InputError("asset dimension must be at least 1");
    prices_.reserve(nodes.size());
    for (const auto& spec : nodes) prices_.push_back(spec.prices);
    const auto path = tree_.path_probabilities();
    for (int leaf : tree_.leaves()) leaf_prob_.push_back(path[static_cast<std::size_t>(leaf)]);
}

std::vector<NodeSpec> FiniteMarket::node_specs() const {
    std::vector<NodeSpec> out;
    out.reserve(tree_.size());
    for (std::size_t i = 0; i < tree_.size(); ++i) {
        const auto& n = tree_.node(static_cast<int>(i));
        NodeSpec spec{n.id, n.t, std::nullopt, n.prob, prices_[i]};
        if (n.parent >= 0) spec.parent = tree_.node(n.parent).id;
        out.push_back(std::move(spec));
    }
    return out;
}

ValidationReport validate_market(const FiniteMarket& m) {
    ValidationReport report;
    const EventTree& tree = m.tree();
    auto add = [&](const std::string& msg) { report.violations.push_back(msg); };
    auto id = [&](int i) { return std::to_string(tree.node(i).id); };

    if (tree.roots().size() != 1) {
        add("expected exactly one root, found " + std::to_string(tree.roots().size()));
    }
    for (int r : tree.roots()) {
        if (tree.node(r).t != 0) add("root " + id(r) + " at t=" + std::to_string(tree.node(r).t) + ", expected t=0");
        if (std::abs(tree.node(r).prob - 1.0) > kStructuralTol) add("root " + id(r) + " prob must be 1");
    }

    for (std::size_t k = 0; k < tree.size(); ++k) {
        const int i = static_cast<int>(k);
        const auto& n = tree.node(i);
        if (n.parent >= 0) {
            if (n.t != tree.node(n.parent).t + 1) {
                add("node " + id(i) + ": time " + std::to_string(n.t) + " does not follow parent time " +
                    std::to_string(tree.node(n.parent).t));
            }
            if (!(n.prob > 0.0 && n.prob <= 1.0)) {
                std::ostringstream os;
                os << "node " << id(i) << ": branch probability " << n.prob << " outside (0, 1]";
                add(os.str());
            }
        }
        if (n.children.empty()) {
            if (n.t != tree.horizon()) {
                add("non-uniform depth: leaf " + id(i) + " at t=" + std::to_string(n.t) +
                    ", expected T=" + std::to_string(tree.horizon()));
            }
        } else {
            double sum = 0.0;
            for (int c : n.children) sum += tree.node(c).prob;
            if (std::abs(sum - 1.0) > kStructuralTol) {
                std::ostringstream os;
                os << "node " << id(i) << ": branch sum " << sum << " != 1";
                add(os.str());
            }
        }

        const auto prices = m.prices(i);
        if (static_cast<int>(prices.size()) != m.dim()) {
            add("node " + id(i) + ": " + std::to_string(prices.size()) + " prices, expected d=" +
                std::to_string(m.dim()));
        }
        for (double s : prices) {
            if (!(s > 0.0) || !std::isfinite(s)) {
                add("node " + id(i) + ": price must be finite and > 0");
                break;
            }
        }
    }

    double total = 0.0;
    for (double p : m.leaf_probabilities()) total += p;
    if (std::abs(total - 1.0) > kStructuralTol) {
        std::ostringstream os;
        os << "leaf probabilities sum to " << total << " != 1";
        add(os.str());
    }
    return report;
}

Strategy Strategy::zeros(const FiniteMarket& m) {
    Strategy s;
    s.holdings.assign(m.tree().size(), std::vector<double>(static_cast<std::size_t>(m.dim()), 0.0));
    return s;
}

std::vector<double> ValueProcess::terminal(const FiniteMarket& m) const { return leaf_values(m, wealth); }

SubProbabilityMeasure::SubProbabilityMeasure(std::vector<double> weights) : weights_(std::move(weights)) {
    for (double w : weights_) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw InputError("measure weights must be finite and nonnegative");
        mass_ += w;
    }
    if (mass_ > 1.0 + kStructuralTol) {
        std::ostringstream os;
        os.precision(17);
        os << "measure mass " << mass_ << " exceeds 1";
        throw InputError(os.str());
    }
}

DensityProcess::DensityProcess(const FiniteMarket& m, std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() != m.tree().size()) throw InputError("density process must have one value per node");
    for (double v : values_) {
        if (!(v > 0.0) || !std::isfinite(v)) throw InputError("density process must be strictly positive");
    }
    if (values_[static_cast<std::size_t>(m.tree().root())] != 1.0) throw InputError("density process must start at 1");
}

ValueProcess evaluate_value_process(const FiniteMarket& m, const Strategy& s, double x0) {
    if (!(x0 >= 0.0)) throw InputError("initial wealth must be nonnegative");
    const EventTree& tree = m.tree();
    if (s.holdings.size() != tree.size()) throw InputError("strategy must have one holding vector per node");
    for (int i : tree.internal_nodes()) {
        if (static_cast<int>(s.holdings[static_cast<std::size_t>(i)].size()) != m.dim()) {
            throw InputError("strategy dimension does not match market dimension at node " +
                             std::to_string(tree.node(i).id));
        }
    }

    ValueProcess v;
    v.initial = x0;
    v.wealth.assign(tree.size(), 0.0);
    for (int i : tree.topological_order()) {
        const auto& n = tree.node(i);
        double x = x0;
        if (n.parent >= 0) {
            const auto& gamma = s.holdings[static_cast<std::size_t>(n.parent)];
            const auto sp = m.prices(n.parent);
            const auto sc = m.prices(i);
            x = v.wealth[static_cast<std::size_t>(n.parent)];
            for (int j = 0; j < m.dim(); ++j) x += gamma[j] * (sc[j] - sp[j]);
        }
        v.wealth[static_cast<std::size_t>(i)] = x;
    }
    v.min_wealth = *std::min_element(v.wealth.begin(), v.wealth.end());
    v.nonnegative = v.min_wealth >= 0.0;
    return v;
}

SubProbabilityMeasure market_measure(const FiniteMarket& m) {
    return SubProbabilityMeasure(std::vector<double>(m.leaf_probabilities().begin(), m.leaf_probabilities().end()));
}

namespace {

double weighted_sum(std::span<const double> f, std::span<const double> w) {
    if (f.size() != w.size()) throw InputError("leaf function size does not match number of leaves");
    double sum = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (w[i] != 0.0) sum += f[i] * w[i];
    }
    return sum;
}

// Edge probabilities induced by a leaf measure; nodes of zero mass keep P's.
std::vector<double> conditional_probs(const FiniteMarket& m, const SubProbabilityMeasure& q) {
    const EventTree& tree = m.tree();
    if (q.size() != m.num_leaves()) throw InputError("measure size does not match number of leaves");
    std::vector<double> mass(tree.size(), 0.0);
    const auto order = tree.topological_order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const int i = *it;
        if (tree.is_leaf(i)) {
            mass[static_cast<std::size_t>(i)] = q.weight(static_cast<std::size_t>(tree.leaf_index(i)));
        }
        const int p = tree.node(i).parent;
        if (p >= 0) mass[static_cast<std::size_t>(p)] += mass[static_cast<std::size_t>(i)];
    }
    std::vector<double> cond(tree.size(), 1.0);
    for (std::size_t i = 0; i < tree.size(); ++i) {
        const int p = tree.node(static_cast<int>(i)).parent;
        if (p < 0) continue;
        const double mp = mass[static_cast<std::size_t>(p)];
        cond[i] = mp > 0.0 ? mass[i] / mp : tree.node(static_cast<int>(i)).prob;
    }
    return cond;
}

SupermartingaleCheck check_with(const FiniteMarket& m, std::span<const double> values, double tol,
                                const std::vector<double>& edge_prob) {
    const EventTree& tree = m.tree();
    if (values.size() != tree.size()) throw InputError("process must have one value per node");
    SupermartingaleCheck out;
    bool first = true;
    for (int i : tree.internal_nodes()) {
        double mean = 0.0;
        for (int c : tree.node(i).children) mean += edge_prob[static_cast<std::size_t>(c)] * values[static_cast<std::size_t>(c)];
        const double slack = values[static_cast<std::size_t>(i)] - mean;
        if (first || slack < out.worst_slack) {
            out.worst_slack = slack;
            out.worst_node = i;
            first = false;
        }
    }
    out.holds = out.worst_slack >= -tol;
    return out;
}

}  // namespace

double expectation(const FiniteMarket& m, std::span<const double> leaf_values) {
    return weighted_sum(leaf_values, m.leaf_probabilities());
}

double expectation(const FiniteMarket& m, std::span<const double> leaf_values, const SubProbabilityMeasure& q) {
    if (q.size() != m.num_leaves()) throw InputError("measure size does not match number of leaves");
    return weighted_sum(leaf_values, q.weights());
}

SupermartingaleCheck is_supermartingale(const FiniteMarket& m, std::span<const double> node_values, double tol) {
    std::vector<double> edge(m.tree().size());
    for (std::size_t i = 0; i < edge.size(); ++i) edge[i] = m.tree().node(static_cast<int>(i)).prob;
    return check_with(m, node_values, tol, edge);
}

SupermartingaleCheck is_supermartingale(const FiniteMarket& m, std::span<const double> node_values, double tol,
                                        const SubProbabilityMeasure& q) {
    return check_with(m, node_values, tol, conditional_probs(m, q));
}

SubProbabilityMeasure density_to_measure(const FiniteMarket& m, std::span<const double> xi) {
    if (xi.size() != m.num_leaves()) throw InputError("density must have one value per leaf");
    std::vector<double> w(xi.size());
    for (std::size_t i = 0; i < xi.size(); ++i) {
        if (!(xi[i] >= 0.0)) throw InputError("density must be nonnegative");
        w[i] = xi[i] * m.leaf_probabilities()[i];
    }
    return SubProbabilityMeasure(std::move(w));
}

std::vector<double> leaf_values(const FiniteMarket& m, std::span<const double> node_values) {
    if (node_values.size() != m.tree().size()) throw InputError("process must have one value per node");
    std::vector<double> out;
    out.reserve(m.num_leaves());
    for (int leaf : m.tree().leaves()) out.push_back(node_values[static_cast<std::size_t>(leaf)]);
    return out;
}

Strategy sample_admissible_strategy(const FiniteMarket& m, double x0, PhiloxStream& rng) {
    const EventTree& tree = m.tree();
    const auto d = static_cast<std::size_t>(m.dim());
    Strategy s = Strategy::zeros(m);
    std::vector<double> wealth(tree.size(), x0);
    std::normal_distribution<double> normal;
    for (int i : tree.topological_order()) {
        const auto& n = tree.node(i);
        if (n.parent >= 0) {
            const auto& gamma = s.holdings[static_cast<std::size_t>(n.parent)];
            double x = wealth[static_cast<std::size_t>(n.parent)];
            for (std::size_t j = 0; j < d; ++j) x += gamma[j] * (m.prices(i)[j] - m.prices(n.parent)[j]);
            wealth[static_cast<std::size_t>(i)] = std::max(x, 0.0);
        }
        if (tree.is_leaf(i)) continue;

        std::vector<double> u(d);
        for (auto& v : u) v = normal(rng);
        // Largest t with 1 + t <u, dS_c> >= 0 for all children.
        double t_max = std::numeric_limits<double>::infinity();
        double scale = 0.0;
        for (int c : n.children) {
            double proj = 0.0;
            for (std::size_t j = 0; j < d; ++j) proj += u[j] * (m.prices(c)[j] - m.prices(i)[j]);
            scale = std::max(scale, std::abs(proj));
            if (proj < 0.0) t_max = std::min(t_max, -1.0 / proj);
        }
        if (scale == 0.0) continue;
        t_max = std::min(t_max, 4.0 / scale);
        const double t = rng.uniform() * t_max;
        auto& gamma = s.holdings[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < d; ++j) gamma[j] = wealth[static_cast<std::size_t>(i)] * t * u[j];
    }
    return s;
}

FiniteMarket make_iid_tree(int horizon, double s0, std::span<const double> factors, std::span<const double> probs) {
    if (factors.size() != probs.size() || factors.empty()) throw InputError("factors and probs must match");
    if (horizon < 0 || horizon > 24) throw InputError("iid tree horizon must be in [0, 24]");
    std::vector<NodeSpec> nodes;
    nodes.push_back(NodeSpec{0, 0, std::nullopt, 1.0, {s0}});
    std::size_t level_begin = 0;
    for (int t = 1; t <= horizon; ++t) {
        const std::size_t level_end = nodes.size();
        for (std::size_t p = level_begin; p < level_end; ++p) {
            for (std::size_t c = 0; c < factors.size(); ++c) {
                const auto id = static_cast<std::int64_t>(nodes.size());
                nodes.push_back(NodeSpec{id, t, nodes[p].id, probs[c], {nodes[p].prices[0] * factors[c]}});
            }
        }
        level_begin = level_end;
    }
    return FiniteMarket(horizon, 1, nodes);
}

}  // namespace numeraire
