#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"
#include "numeraire/core_model.hpp"

namespace numeraire {

// Vertices of the local martingale polytope at an internal node:
// {q in R^k : q >= 0, sum q = 1, sum_c q_c (S_c - S_node) = 0}.
// Each vertex lists one probability per child, in child order.
std::vector<std::vector<double>> martingale_vertices(const FiniteMarket& m, int node);

// A strictly positive martingale measure built node by node from the average
// of all local polytope vertices, or nullopt when some node admits no
// strictly positive solution (the small market has an arbitrage).
std::optional<SubProbabilityMeasure> find_martingale_measure(const FiniteMarket& m);

// Log-optimal (numeraire) portfolio of a finite market with initial wealth 1.
struct NumeraireSolution {
    Strategy strategy;
    ValueProcess value;             // V, with V at the root equal to 1
    std::vector<double> terminal;   // V_T per leaf
    double log_value = 0.0;         // E ln V_T
    SubProbabilityMeasure qhat;     // (V_T)^{-1} P
    double dual_value = 0.0;        // H(P | qhat)
    double gap = 0.0;
    int iterations = 0;             // worst Newton iteration count over nodes
    double max_gradient = 0.0;      // worst first-order residual over nodes
};

struct SolverOptions {
    double tol = 1e-12;
    int max_iterations = 200;
};

// Throws ArbitrageError when the market has no equivalent martingale measure
// and NumericalError when a node does not converge.
NumeraireSolution solve_log_optimal(const FiniteMarket& m, const SolverOptions& opts = {});

// H(p | q) = sum p_i ln(p_i / q_i). Throws InputError if q_i = 0 < p_i.
double reverse_entropy(const SubProbabilityMeasure& p, const SubProbabilityMeasure& q);

struct DualityReport {
    int samples = 0;
    // Q-hat is a martingale measure: worst slack of S and -S as Q-hat supermartingales.
    bool martingale_ok = false;
    double martingale_slack = 0.0;
    // H(P|Q-hat) <= H(P|q) for every sampled martingale measure q.
    bool entropy_ok = false;
    double qhat_entropy = 0.0;
    double min_sampled_entropy = 0.0;
    double worst_entropy_margin = 0.0;  // min over samples of H(P|q) - H(P|Q-hat)
    // X/V is a P-supermartingale for sampled admissible X with X_0 = 1.
    bool numeraire_ok = false;
    double worst_ratio_slack = 0.0;
    double max_ratio_expectation = 0.0;  // max over samples of E(X_T / V_T)

    bool passed() const { return martingale_ok && entropy_ok && numeraire_ok; }
};

DualityReport verify_duality(const FiniteMarket& m, const NumeraireSolution& sol, int samples,
                                      std::uint64_t seed, double tol = 1e-9);

// Draws a strictly positive martingale measure: at each node a Dirichlet(1)
// mixture of the local polytope vertices.
SubProbabilityMeasure sample_martingale_measure(const FiniteMarket& m, PhiloxStream& rng);

// {"log_value", "dual_value", "gap", "qhat": [...], "terminal_value": [...],
//  "strategy": [{"node", "t", "holdings": [...]}, ...]}
nlohmann::json solution_to_json(const FiniteMarket& m, const NumeraireSolution& sol);

}  // namespace numeraire
