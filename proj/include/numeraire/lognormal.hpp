#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "numeraire/diagnostics.hpp"

namespace numeraire {

// Period parameters (mu_k, sigma_k), k >= 1, of a single stock with returns
// R_k = exp(mu_k - sigma_k^2/2 + sigma_k xi_k) - 1. Either explicit arrays or
// the power-law family mu_k = a k^-p, sigma_k = b k^-q.
class LognormalParams {
public:
    struct PowerLaw {
        double a = 0.0;
        double p = 0.0;
        double b = 1.0;
        double q = 0.0;
    };

    static LognormalParams power(double a, double p, double b, double q);
    static LognormalParams numeric(std::vector<double> mu, std::vector<double> sigma);

    bool symbolic() const { return symbolic_; }
    const PowerLaw& power_law() const { return power_; }
    // Number of available periods; nullopt for power-law families.
    std::optional<int> length() const;

    double mu(int k) const;
    double sigma(int k) const;

private:
    bool symbolic_ = true;
    PowerLaw power_;
    std::vector<double> mu_;
    std::vector<double> sigma_;
};

// E ln(1 + delta R) for one period by Gauss-Hermite quadrature, doubling the
// order from quad_order until successive values agree to 1e-10.
double expected_log_growth(double delta, double mu, double sigma, int quad_order = 64);

// argmax over [0, 1] of expected_log_growth. Returns 0 when E R <= 0 and 1
// when the derivative at 1 is nonnegative (mu >= sigma^2).
double optimal_fraction(double mu, double sigma, double tol = 1e-12);

// delta*_k for k = 1..n.
std::vector<double> optimal_fractions(const LognormalParams& params, int n);

struct NumerairePath {
    std::vector<double> log_value;  // ln V_k for k = 0..n
    double log_terminal() const { return log_value.back(); }
    double terminal() const;
};

// V_n = prod (1 + delta*_k R_k) for a realization xi_1..xi_n.
NumerairePath numeraire_path(const LognormalParams& params, int n, std::span<const double> xi);
NumerairePath numeraire_path(const LognormalParams& params, std::span<const double> fractions,
                             std::span<const double> xi);

// Position of mu_k relative to the threshold (1 + eps) sigma_k^2 / 2.
enum class DriftBand { NonPositive, Moderate, Large };
DriftBand classify_drift(double mu, double sigma, double eps);

enum class TriState { True, False, Undetermined };
enum class SeriesBehavior { Converges, Diverges, Unknown };
std::string to_string(TriState t);
std::string to_string(SeriesBehavior s);

// Partial sums, for n = 1..N, of
//   S1_n(eps) = sum (mu_k/sigma_k)^2 over Moderate periods
//   S2_n(eps) = sum mu_k over Large periods
// and S = S1 + S2. For power-law families also the limiting behavior of each
// series and whether sigma_k -> 0 along Moderate periods (the
// vanishing-volatility condition).
struct SigmaSeries {
    double eps = 0.0;
    std::vector<double> sigma1;
    std::vector<double> sigma2;
    std::vector<double> sigma;
    std::vector<DriftBand> band;
    TriState vanishing_volatility = TriState::Undetermined;
    SeriesBehavior sigma1_behavior = SeriesBehavior::Unknown;
    SeriesBehavior sigma2_behavior = SeriesBehavior::Unknown;
    SeriesBehavior sigma_behavior = SeriesBehavior::Unknown;
};

SigmaSeries sigma_series(const LognormalParams& params, double eps, int n);

// Decision rules, applied in this order.
enum class SeriesRule {
    FiniteSeries,            // S(1) < inf                                   -> NAA
    LargeDriftDivergence,    // S2(eps) = inf for some eps > 0                 -> SAA
    VanishingVolDivergence,  // vanishing volatility and S1(eps) = inf, eps<1  -> SAA
    VanishingVolDichotomy,   // vanishing volatility at eps in (0,1): NAA iff S(eps) < inf
};
std::string to_string(SeriesRule r);

struct RuleFiring {
    SeriesRule rule;
    Verdict verdict;
    double eps;
    std::string detail;
};

struct SeriesVerdict {
    Verdict verdict = Verdict::NotApplicable;
    std::string basis;               // detail of the first rule that fires
    std::vector<RuleFiring> firing;  // every rule that fires, in rule order
    std::vector<double> eps_scanned;
    SigmaSeries report;              // partial sums at eps = 1 up to n_report

    bool fired(SeriesRule r) const;
};

// Throws InputError for numeric parameter arrays: convergence of a general
// series cannot be decided from finitely many terms.
SeriesVerdict series_verdict(const LognormalParams& params, int n_report = 1000);

// The one-period density factor
//   zeta = 1                                          mu <= 0
//        = exp(-(mu/sigma)^2/2 - (mu/sigma) xi)       0 < mu <= sigma^2
//        = exp(-mu + sigma^2/2 - sigma xi)            mu > sigma^2
double zeta(double xi, double mu, double sigma);

// Closed form of E zeta^alpha.
double zeta_moment(double alpha, double mu, double sigma);

// 1 - E[(1 + delta R) zeta] by quadrature; nonnegative when zeta is a
// supermartingale density for every fraction delta in [0, 1].
double zeta_density_check(double mu, double sigma, double delta, int quad_order = 64);

// E R^2 = exp(2 mu + sigma^2) - 2 exp(mu) + 1.
double second_moment_return(double mu, double sigma);

struct GrowthTrend {
    std::vector<int> checkpoints;
    std::vector<double> median;
    std::vector<double> q1;
    std::vector<double> q3;
    std::vector<double> mean;
    std::vector<double> predicted_mean;  // sum of expected one-period log growth
    double late_slope = 0.0;             // least-squares slope of median vs ln n, second half of checkpoints
    double median_gain = 0.0;            // median(n_max) - median at the checkpoint nearest n_max/2
    std::string trend;                   // "plateau" or "growing" or "declining"
    // E R_1^2: Monte Carlo vs closed form.
    double r2_closed_form = 0.0;
    double r2_estimate = 0.0;
    double r2_se = 0.0;
};

GrowthTrend monte_carlo_growth(const LognormalParams& params, int n_max, int n_paths, std::uint64_t seed,
                               double plateau_tol = 0.05);

}  // namespace numeraire
