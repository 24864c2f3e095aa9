#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "numeraire/core_model.hpp"

namespace numeraire {

struct Estimate {
    double value = 0.0;
    double se = 0.0;  // zero for exact laws
};

// Law of a positive terminal variable (typically V_T, or 1/Z_T) for one
// member n of a market sequence: either exact atoms or an i.i.d. sample.
// Values are held as logarithms so that astronomically large wealth stays
// representable.
class TerminalLaw {
public:
    enum class Kind { Exact, Sample };

    static TerminalLaw exact(std::span<const double> values, std::span<const double> probs, int index);
    static TerminalLaw exact_log(std::vector<double> log_values, std::vector<double> probs, int index);
    static TerminalLaw sample(std::span<const double> values, int index);
    static TerminalLaw sample_log(std::vector<double> log_values, int index);

    Kind kind() const { return kind_; }
    int index() const { return index_; }
    std::size_t size() const { return log_values_.size(); }
    std::span<const double> log_values() const { return log_values_; }
    // Atom probabilities; 1/size for samples.
    std::span<const double> probs() const { return probs_; }

    // P(X >= m), with a binomial standard error for samples.
    Estimate prob_at_least(double m) const;
    // P(X < m).
    Estimate prob_below(double m) const;
    // E X^{-alpha}.
    Estimate negative_moment(double alpha) const;

private:
    TerminalLaw(Kind kind, std::vector<double> log_values, std::vector<double> probs, int index);

    // Mean and standard error of per-atom values g_i under the law.
    Estimate average(const std::vector<double>& g) const;

    Kind kind_;
    std::vector<double> log_values_;
    std::vector<double> probs_;
    int index_;
};

// value[i][j] / se[i][j] for law i and grid point j.
struct Curve {
    std::vector<int> n;
    std::vector<double> grid;
    std::vector<std::vector<double>> value;
    std::vector<std::vector<double>> se;

    bool empty() const { return n.empty() || grid.empty(); }
};

// P^n(V_T >= M). M_grid must be positive and strictly increasing.
Curve tail_curve(std::span<const TerminalLaw> laws, std::span<const double> m_grid);

// E (V_T)^{-alpha}, the Hellinger integral of order alpha between (V_T)^{-1} P and P.
Curve hellinger_curve(std::span<const TerminalLaw> laws, std::span<const double> alpha_grid);

// Neyman-Pearson profile: max { E_p phi : E_q phi <= delta } over randomized
// tests phi. Atoms are taken in decreasing likelihood ratio p/q (q = 0 atoms
// first) and the boundary atom is split.
std::vector<double> np_profile(std::span<const double> p, std::span<const double> q,
                               std::span<const double> delta_grid);
std::vector<double> np_profile(const SubProbabilityMeasure& p, const SubProbabilityMeasure& q,
                               std::span<const double> delta_grid);
// Profile of (P, (V_T)^{-1} P) for a terminal law.
std::vector<double> np_profile(const TerminalLaw& law, std::span<const double> delta_grid);

// RHS - LHS of the three inequalities
//   P(xi < M) <= M^a E xi^{-a}
//   E xi^{-a} <= M^{-a} + N^{a-1} + N^a P(xi < M)        when E(1/xi) <= 1
//   P(xi >= M) <= N/M + P(eta >= N)                      when E(xi/eta) <= 1
// eta, when given, is paired atom-by-atom with xi. Inequalities whose
// precondition fails are skipped and a notice is recorded.
struct InequalitySlacks {
    std::optional<double> markov;
    std::optional<double> hellinger;
    std::optional<double> comparison;
    std::vector<std::string> notices;

    bool ok(double tol = 1e-9) const;
};

InequalitySlacks inequality_check(const TerminalLaw& xi, std::span<const double> eta, double alpha, double m, double n);

enum class Verdict { NAA, SAA, Inconclusive, NotApplicable };
std::string to_string(Verdict v);

// Thresholds for turning finitely many n into a verdict. limsup/liminf over
// n are replaced by max/min over the trailing window of n values.
struct Policy {
    double eps_naa = 0.05;
    double eps_saa = 0.05;
    double window_fraction = 1.0 / 3.0;
    double agreement_tol = 0.05;

    static std::vector<double> default_m_grid();
    static std::vector<double> default_alpha_grid();
    // Index of the first n value in the trailing window.
    std::size_t window_begin(std::size_t count) const;
};

inline constexpr const char* kFiniteEvidenceCaveat =
    "finite-n evidence is consistent with, but cannot prove, an asymptotic statement";

struct VerdictReport {
    Verdict verdict = Verdict::Inconclusive;
    bool naa_consistent = false;
    bool saa_consistent = false;
    double tail_sup_at_max_m = 0.0;      // max over window of P(V >= max M)
    double min_tail_sup = 0.0;           // min over M of max over window
    double hellinger_inf_min_alpha = 1.0;  // min over window at the smallest alpha
    double hellinger_inf_min = 1.0;      // min over alpha and window
    std::string explanation;
};

struct SequenceDiagnostics {
    Curve tail;
    Curve hellinger;  // may be empty (tail-only evidence)
    Curve np;         // power over (n, delta)
    Policy policy;
    VerdictReport verdict;
};

VerdictReport verdict(const SequenceDiagnostics& diag, const Policy& policy);

// Curves for every law, the NP profile of (P, (V_T)^{-1} P), and the verdict.
SequenceDiagnostics build_diagnostics(std::span<const TerminalLaw> laws, std::span<const double> m_grid,
                                      std::span<const double> alpha_grid, std::span<const double> delta_grid,
                                      const Policy& policy = {});

// Joint atoms of terminal wealth X_T, numeraire V_T and density Z_T for one n.
struct WealthTriple {
    std::vector<double> probs;
    std::vector<double> x;
    std::vector<double> v;
    std::vector<double> z;
};

struct AgreementReport {
    // Finite-n surrogate of the Hellinger/tail identity with Z = 1/V.
    double hellinger_side = 0.0;  // min over window of E (Z_T)^{alpha_min}
    double tail_side = 0.0;       // min over window of P(1/Z_T < M_max)
    bool agree = false;
    // Windowed forms of the two comparison bounds; negative means violated.
    double wealth_vs_numeraire_slack = 0.0;   // N/M + sup P(V>=N) - sup P(X>=M)
    double numeraire_vs_density_slack = 0.0;  // N/M + sup P(1/Z>=N) - sup P(V>=M)
    bool comparison_ok = true;
};

AgreementReport agreement_checks(std::span<const TerminalLaw> laws, std::span<const double> alpha_grid,
                                 std::span<const double> m_grid, const Policy& policy,
                                 std::span<const WealthTriple> triples = {}, double m = 2.0, double n = 1.0);

}  // namespace numeraire
