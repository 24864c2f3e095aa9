#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "numeraire/rng.hpp"

namespace numeraire {

// Tolerance for structural sums (branch probabilities, measure masses).
inline constexpr double kStructuralTol = 1e-12;

// One node of a market description, as it appears in a market file.
struct NodeSpec {
    std::int64_t id = 0;
    int t = 0;
    std::optional<std::int64_t> parent;
    double prob = 1.0;
    std::vector<double> prices;
};

// Finite event tree encoding the filtration. Nodes are addressed by their
// position in the construction list; external ids are kept for reporting.
// Construction only requires that parents resolve and the parent graph is
// acyclic. Everything else is checked by validate_market so that malformed
// trees can still be diagnosed.
class EventTree {
public:
    struct Node {
        std::int64_t id;
        int t;
        int parent;  // -1 for a root
        double prob;
        std::vector<int> children;
    };

    EventTree(int horizon, std::span<const NodeSpec> nodes);

    int horizon() const { return horizon_; }
    std::size_t size() const { return nodes_.size(); }
    const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
    bool is_leaf(int i) const { return node(i).children.empty(); }

    std::span<const int> roots() const { return roots_; }
    int root() const { return roots_.front(); }
    std::span<const int> leaves() const { return leaves_; }
    std::span<const int> internal_nodes() const { return internal_; }
    // Parents precede children.
    std::span<const int> topological_order() const { return order_; }
    // Position of a leaf node in leaves(), or -1.
    int leaf_index(int node) const { return leaf_pos_[static_cast<std::size_t>(node)]; }

    // Product of branch probabilities from the root to each node.
    std::vector<double> path_probabilities() const;

private:
    int horizon_;
    std::vector<Node> nodes_;
    std::vector<int> roots_;
    std::vector<int> leaves_;
    std::vector<int> internal_;
    std::vector<int> order_;
    std::vector<int> leaf_pos_;
};

// Event tree with strictly positive discounted prices for d assets per node.
// The reference measure P is carried on the edges.
class FiniteMarket {
public:
    FiniteMarket(int horizon, int dim, std::span<const NodeSpec> nodes);

    const EventTree& tree() const { return tree_; }
    int dim() const { return dim_; }
    int horizon() const { return tree_.horizon(); }
    std::span<const double> prices(int node) const { return prices_[static_cast<std::size_t>(node)]; }
    // P of every leaf, in tree().leaves() order.
    std::span<const double> leaf_probabilities() const { return leaf_prob_; }
    std::size_t num_leaves() const { return leaf_prob_.size(); }

    std::vector<NodeSpec> node_specs() const;

private:
    EventTree tree_;
    int dim_;
    std::vector<std::vector<double>> prices_;
    std::vector<double> leaf_prob_;
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

ValidationReport validate_market(const FiniteMarket& m);

// Units of each asset held over the period leaving a node. Entries for leaves
// are ignored.
struct Strategy {
    std::vector<std::vector<double>> holdings;

    static Strategy zeros(const FiniteMarket& m);
};

struct ValueProcess {
    double initial = 0.0;
    std::vector<double> wealth;  // per node
    bool nonnegative = true;     // membership in the admissible set
    double min_wealth = 0.0;

    std::vector<double> terminal(const FiniteMarket& m) const;
};

// Weights on the leaves of a market with total mass at most one.
class SubProbabilityMeasure {
public:
    SubProbabilityMeasure() = default;
    explicit SubProbabilityMeasure(std::vector<double> weights);

    std::span<const double> weights() const { return weights_; }
    double weight(std::size_t i) const { return weights_[i]; }
    std::size_t size() const { return weights_.size(); }
    double mass() const { return mass_; }

private:
    std::vector<double> weights_;
    double mass_ = 0.0;
};

// Strictly positive per-node process with Z at the root equal to one.
class DensityProcess {
public:
    DensityProcess(const FiniteMarket& m, std::vector<double> values);

    std::span<const double> values() const { return values_; }
    double operator[](std::size_t node) const { return values_[node]; }

private:
    std::vector<double> values_;
};

struct SupermartingaleCheck {
    bool holds = true;
    double worst_slack = 0.0;  // min over internal nodes of value - conditional mean
    int worst_node = -1;
};

// Self-financing wealth X(child) = X(parent) + <gamma(parent), S(child) - S(parent)>.
ValueProcess evaluate_value_process(const FiniteMarket& m, const Strategy& s, double x0);

SubProbabilityMeasure market_measure(const FiniteMarket& m);

double expectation(const FiniteMarket& m, std::span<const double> leaf_values);
double expectation(const FiniteMarket& m, std::span<const double> leaf_values,
                   const SubProbabilityMeasure& q);

// Conditional expectations use the edge probabilities of P, or those induced
// by q when supplied (q(child subtree) / q(node subtree)).
SupermartingaleCheck is_supermartingale(const FiniteMarket& m, std::span<const double> node_values,
                                        double tol);
SupermartingaleCheck is_supermartingale(const FiniteMarket& m, std::span<const double> node_values,
                                        double tol, const SubProbabilityMeasure& q);

// The measure xi * P on the leaves.
SubProbabilityMeasure density_to_measure(const FiniteMarket& m, std::span<const double> xi);

// Node values restricted to the leaves, in leaves() order.
std::vector<double> leaf_values(const FiniteMarket& m, std::span<const double> node_values);

// Draws holdings that keep wealth nonnegative at every node: at each internal
// node a uniformly random direction is scaled by a uniform fraction of the
// largest step that keeps all children solvent.
Strategy sample_admissible_strategy(const FiniteMarket& m, double x0, PhiloxStream& rng);

// Non-recombining tree where each period the single asset is multiplied by
// factors[c] with probability probs[c].
FiniteMarket make_iid_tree(int horizon, double s0, std::span<const double> factors,
                           std::span<const double> probs);

}  // namespace numeraire
