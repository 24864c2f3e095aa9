#include "numeraire/lognormal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "numeraire/error.hpp"
#include "numeraire/quadrature.hpp"
#include "numeraire/rng.hpp"

namespace numeraire {

namespace {

// Neumaier compensated sum.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

double log_return(double x, double mu, double sigma) { return mu - 0.5 * sigma * sigma + sigma * x; }

void check_sigma(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InputError("sigma must be positive and finite");
}

// Smallest order at which the first two derivatives of the objective are
// stable under doubling at a few interior fractions.
int select_order(double mu, double sigma) {
    constexpr int kMaxOrder = 512;
    auto d1 = [&](double delta, int order) {
        return gaussian_expectation(
            [&](double x) {
                const double r = std::expm1(log_return(x, mu, sigma));
                return r / (1.0 + delta * r);
            },
            order);
    };
    for (int order = 32; order < kMaxOrder; order *= 2) {
        bool stable = true;
        for (double delta : {0.25, 0.5, 0.9}) {
            const double a = d1(delta, order);
            const double b = d1(delta, 2 * order);
            if (std::abs(a - b) > 1e-13 * std::max(1.0, std::abs(b))) {
                stable = false;
                break;
            }
        }
        if (stable) return 2 * order;
    }
    throw NumericalError("quadrature for the optimal fraction did not stabilize (sigma too large?)");
}

// Limiting behavior of the series for a power-law family at a given eps.
struct Asymptotics {
    DriftBand eventual;
    bool sigma1_converges;
    bool sigma2_converges;
    bool vanishing_volatility;
};

Asymptotics analyze(const LognormalParams::PowerLaw& pw, double eps) {
    if (pw.a <= 0.0) return {DriftBand::NonPositive, true, true, true};
    const double c = 0.5 * (1.0 + eps);
    const double e = 2.0 * pw.q - pw.p;
    DriftBand band;
    if (e > 0.0) {
        band = DriftBand::Large;
    } else if (e < 0.0) {
        band = DriftBand::Moderate;
    } else {
        band = pw.a <= c * pw.b * pw.b ? DriftBand::Moderate : DriftBand::Large;
    }
    if (band == DriftBand::Moderate) {
        // (mu/sigma)^2 = (a/b)^2 k^{-2(p-q)}
        return {band, 2.0 * (pw.p - pw.q) > 1.0, true, pw.q > 0.0};
    }
    return {band, true, pw.p > 1.0, true};
}

SeriesBehavior behavior(bool converges) { return converges ? SeriesBehavior::Converges : SeriesBehavior::Diverges; }

std::string fmt_eps(double eps) {
    std::ostringstream os;
    os.precision(6);
    os << eps;
    return os.str();
}

double quantile_sorted(const std::vector<double>& v, double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - w) + v[hi] * w;
}

}  // namespace

LognormalParams LognormalParams::power(double a, double p, double b, double q) {
    if (!(b > 0.0)) throw InputError("power-law family requires b > 0");
    if (!(p >= 0.0) || !(q >= 0.0)) throw InputError("power-law exponents p, q must be nonnegative");
    if (!std::isfinite(a)) throw InputError("power-law coefficient a must be finite");
    LognormalParams out;
    out.symbolic_ = true;
    out.power_ = {a, p, b, q};
    return out;
}

LognormalParams LognormalParams::numeric(std::vector<double> mu, std::vector<double> sigma) {
    if (mu.size() != sigma.size() || mu.empty()) throw InputError("mu and sigma arrays must be nonempty and equal in length");
    for (double s : sigma) check_sigma(s);
    LognormalParams out;
    out.symbolic_ = false;
    out.mu_ = std::move(mu);
    out.sigma_ = std::move(sigma);
    return out;
}

std::optional<int> LognormalParams::length() const {
    if (symbolic_) return std::nullopt;
    return static_cast<int>(mu_.size());
}

double LognormalParams::mu(int k) const {
    if (k < 1) throw InputError("period index starts at 1");
    if (symbolic_) return power_.a * std::pow(static_cast<double>(k), -power_.p);
    if (k > static_cast<int>(mu_.size())) throw InputError("period index beyond the supplied arrays");
    return mu_[static_cast<std::size_t>(k - 1)];
}

double LognormalParams::sigma(int k) const {
    if (k < 1) throw InputError("period index starts at 1");
    if (symbolic_) return power_.b * std::pow(static_cast<double>(k), -power_.q);
    if (k > static_cast<int>(sigma_.size())) throw InputError("period index beyond the supplied arrays");
    return sigma_[static_cast<std::size_t>(k - 1)];
}

double expected_log_growth(double delta, double mu, double sigma, int quad_order) {
    check_sigma(sigma);
    if (!(delta >= 0.0 && delta <= 1.0)) throw InputError("fraction must lie in [0, 1]");
    if (delta == 0.0) return 0.0;
    const auto res = gaussian_expectation_adaptive(
        [&](double x) { return std::log1p(delta * std::expm1(log_return(x, mu, sigma))); }, quad_order, 1e-10);
    if (!res.converged) {
        std::ostringstream os;
        os << "Gauss-Hermite quadrature did not converge (achieved " << res.error << " at order " << res.order << ")";
        throw NumericalError(os.str());
    }
    return res.value;
}

double optimal_fraction(double mu, double sigma, double tol) {
    check_sigma(sigma);
    if (std::expm1(mu) <= 0.0) return 0.0;
    if (mu >= sigma * sigma) return 1.0;

    const int order = select_order(mu, sigma);
    auto derivs = [&](double delta, double& d1, double& d2) {
        const HermiteRule& rule = hermite_rule(order);
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double r = std::expm1(log_return(std::sqrt(2.0) * rule.nodes[i], mu, sigma));
            const double g = r / (1.0 + delta * r);
            s1 += rule.weights[i] * g;
            s2 += rule.weights[i] * g * g;
        }
        const double norm = 1.0 / std::sqrt(std::numbers::pi);
        d1 = s1 * norm;
        d2 = -s2 * norm;
    };

    double lo = 0.0, hi = 1.0;
    double delta = std::clamp(mu / (sigma * sigma), 0.0, 1.0);
    for (int it = 0; it < 200; ++it) {
        double d1 = 0.0, d2 = 0.0;
        derivs(delta, d1, d2);
        if (std::abs(d1) <= tol) return delta;
        if (d1 > 0.0) lo = delta; else hi = delta;
        if (hi - lo < 1e-15) break;
        double next = d2 < 0.0 ? delta - d1 / d2 : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        delta = next;
    }
    return delta;
}

std::vector<double> optimal_fractions(const LognormalParams& params, int n) {
    if (const auto len = params.length(); len && n > *len) {
        throw InputError("horizon " + std::to_string(n) + " exceeds the " + std::to_string(*len) + " supplied periods");
    }
    std::vector<double> out(static_cast<std::size_t>(std::max(n, 0)));
    std::vector<std::string> errors(out.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (int k = 1; k <= n; ++k) {
        try {
            out[static_cast<std::size_t>(k - 1)] = optimal_fraction(params.mu(k), params.sigma(k));
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(k - 1)] = e.what();
        }
    }
    for (std::size_t k = 0; k < errors.size(); ++k) {
        if (!errors[k].empty()) throw NumericalError("period " + std::to_string(k + 1) + ": " + errors[k]);
    }
    return out;
}

double NumerairePath::terminal() const { return std::exp(log_terminal()); }

NumerairePath numeraire_path(const LognormalParams& params, std::span<const double> fractions,
                             std::span<const double> xi) {
    if (xi.size() < fractions.size()) throw InputError("realization shorter than the horizon");
    NumerairePath path;
    path.log_value.reserve(fractions.size() + 1);
    path.log_value.push_back(0.0);
    CompensatedSum sum;
    for (std::size_t k = 0; k < fractions.size(); ++k) {
        const int period = static_cast<int>(k) + 1;
        const double r = std::expm1(log_return(xi[k], params.mu(period), params.sigma(period)));
        sum.add(std::log1p(fractions[k] * r));
        path.log_value.push_back(sum.value());
    }
    return path;
}

NumerairePath numeraire_path(const LognormalParams& params, int n, std::span<const double> xi) {
    const auto fractions = optimal_fractions(params, n);
    return numeraire_path(params, fractions, xi);
}

DriftBand classify_drift(double mu, double sigma, double eps) {
    if (mu <= 0.0) return DriftBand::NonPositive;
    if (mu <= 0.5 * (1.0 + eps) * sigma * sigma) return DriftBand::Moderate;
    return DriftBand::Large;
}

std::string to_string(TriState t) {
    switch (t) {
        case TriState::True: return "true";
        case TriState::False: return "false";
        case TriState::Undetermined: return "undetermined";
    }
    return "?";
}

std::string to_string(SeriesBehavior s) {
    switch (s) {
        case SeriesBehavior::Converges: return "converges";
        case SeriesBehavior::Diverges: return "diverges";
        case SeriesBehavior::Unknown: return "unknown";
    }
    return "?";
}

std::string to_string(SeriesRule r) {
    switch (r) {
        case SeriesRule::FiniteSeries: return "finite-series";
        case SeriesRule::LargeDriftDivergence: return "large-drift-divergence";
        case SeriesRule::VanishingVolDivergence: return "vanishing-volatility-divergence";
        case SeriesRule::VanishingVolDichotomy: return "vanishing-volatility-dichotomy";
    }
    return "?";
}

SigmaSeries sigma_series(const LognormalParams& params, double eps, int n) {
    if (!(eps > 0.0)) throw InputError("eps must be positive");
    if (n < 1) throw InputError("number of terms must be at least 1");
    SigmaSeries s;
    s.eps = eps;
    CompensatedSum s1, s2;
    for (int k = 1; k <= n; ++k) {
        const double mu = params.mu(k);
        const double sigma = params.sigma(k);
        const DriftBand band = classify_drift(mu, sigma, eps);
        if (band == DriftBand::Moderate) s1.add((mu / sigma) * (mu / sigma));
        if (band == DriftBand::Large) s2.add(mu);
        s.band.push_back(band);
        s.sigma1.push_back(s1.value());
        s.sigma2.push_back(s2.value());
        s.sigma.push_back(s.sigma1.back() + s.sigma2.back());
    }
    if (params.symbolic()) {
        const auto asym = analyze(params.power_law(), eps);
        s.vanishing_volatility = asym.vanishing_volatility ? TriState::True : TriState::False;
        s.sigma1_behavior = behavior(asym.sigma1_converges);
        s.sigma2_behavior = behavior(asym.sigma2_converges);
        s.sigma_behavior = behavior(asym.sigma1_converges && asym.sigma2_converges);
    }
    return s;
}

bool SeriesVerdict::fired(SeriesRule r) const {
    return std::any_of(firing.begin(), firing.end(), [r](const RuleFiring& f) { return f.rule == r; });
}

SeriesVerdict series_verdict(const LognormalParams& params, int n_report) {
    if (!params.symbolic()) {
        throw InputError("verdict requires symbolic family; use sigma_series trend report");
    }
    const auto& pw = params.power_law();
    SeriesVerdict out;
    out.report = sigma_series(params, 1.0, std::max(n_report, 1));

    // Band assignment only changes with eps at the threshold where a = c b^2
    // (equal exponents); add points on both sides of it to the fixed grid.
    std::vector<double> candidates;
    for (int i = 1; i <= 9; ++i) candidates.push_back(0.1 * i);
    if (pw.a > 0.0 && 2.0 * pw.q == pw.p) {
        const double threshold = 2.0 * pw.a / (pw.b * pw.b) - 1.0;
        if (threshold > 0.0) candidates.push_back(0.5 * threshold);
        if (threshold > 0.0 && threshold < 1.0) {
            candidates.push_back(threshold);
            candidates.push_back(0.5 * (threshold + 1.0));
        }
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    out.eps_scanned = candidates;

    const auto at_one = analyze(pw, 1.0);
    if (at_one.sigma1_converges && at_one.sigma2_converges) {
        out.firing.push_back({SeriesRule::FiniteSeries, Verdict::NAA, 1.0, "Σ_∞(1) < ∞"});
    }
    for (double eps : candidates) {
        if (!analyze(pw, eps).sigma2_converges) {
            out.firing.push_back({SeriesRule::LargeDriftDivergence, Verdict::SAA, eps,
                                  "Σ²_∞(ε) = ∞ at ε = " + fmt_eps(eps)});
            break;
        }
    }
    for (double eps : candidates) {
        if (!(eps < 1.0)) continue;
        const auto a = analyze(pw, eps);
        if (a.vanishing_volatility && !a.sigma1_converges) {
            out.firing.push_back({SeriesRule::VanishingVolDivergence, Verdict::SAA, eps,
                                  "σ_k → 0 on moderate-drift periods and Σ¹_∞(ε) = ∞ at ε = " + fmt_eps(eps)});
            break;
        }
    }
    for (double eps : candidates) {
        if (!(eps < 1.0)) continue;
        const auto a = analyze(pw, eps);
        if (a.vanishing_volatility) {
            const bool finite = a.sigma1_converges && a.sigma2_converges;
            out.firing.push_back({SeriesRule::VanishingVolDichotomy, finite ? Verdict::NAA : Verdict::SAA, eps,
                                  std::string("σ_k → 0 on moderate-drift periods at ε = ") + fmt_eps(eps) +
                                      (finite ? " and Σ_∞(ε) < ∞" : " and Σ_∞(ε) = ∞")});
            break;
        }
    }

    if (out.firing.empty()) {
        out.basis = "no rule applies: Σ_∞(1) = ∞, Σ²_∞(ε) < ∞ and the vanishing-volatility condition fails on the ε grid";
        return out;
    }
    out.verdict = out.firing.front().verdict;
    out.basis = out.firing.front().detail;
    for (const auto& f : out.firing) {
        if (f.verdict != out.verdict) {
            throw NumericalError("inconsistent series rules: " + out.basis + " vs " + f.detail);
        }
    }
    return out;
}

double zeta(double xi, double mu, double sigma) {
    check_sigma(sigma);
    if (mu <= 0.0) return 1.0;
    if (mu <= sigma * sigma) {
        const double r = mu / sigma;
        return std::exp(-0.5 * r * r - r * xi);
    }
    return std::exp(-mu + 0.5 * sigma * sigma - sigma * xi);
}

double zeta_moment(double alpha, double mu, double sigma) {
    check_sigma(sigma);
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
    if (mu <= 0.0) return 1.0;
    if (mu <= sigma * sigma) {
        const double r = mu / sigma;
        return std::exp(-0.5 * alpha * (1.0 - alpha) * r * r);
    }
    return std::exp(-alpha * mu + 0.5 * alpha * (1.0 + alpha) * sigma * sigma);
}

double zeta_density_check(double mu, double sigma, double delta, int quad_order) {
    check_sigma(sigma);
    if (!(delta >= 0.0 && delta <= 1.0)) throw InputError("fraction must lie in [0, 1]");
    const auto res = gaussian_expectation_adaptive(
        [&](double x) { return (1.0 + delta * std::expm1(log_return(x, mu, sigma))) * zeta(x, mu, sigma); },
        quad_order, 1e-12);
    if (!res.converged) {
        std::ostringstream os;
        os << "Gauss-Hermite quadrature did not converge (achieved " << res.error << " at order " << res.order << ")";
        throw NumericalError(os.str());
    }
    return 1.0 - res.value;
}

double second_moment_return(double mu, double sigma) {
    return std::exp(2.0 * mu + sigma * sigma) - 2.0 * std::exp(mu) + 1.0;
}

GrowthTrend monte_carlo_growth(const LognormalParams& params, int n_max, int n_paths, std::uint64_t seed,
                               double plateau_tol) {
    if (n_max < 1 || n_paths < 1) throw InputError("n_max and n_paths must be positive");
    GrowthTrend out;
    for (int base = 1; base <= n_max; base *= 10) {
        for (int m : {1, 2, 5}) {
            if (base * m < n_max) out.checkpoints.push_back(base * m);
        }
    }
    out.checkpoints.push_back(n_max);

    const auto fractions = optimal_fractions(params, n_max);
    const std::size_t nc = out.checkpoints.size();
    std::vector<std::vector<double>> at(nc, std::vector<double>(static_cast<std::size_t>(n_paths)));
    std::vector<double> r2(static_cast<std::size_t>(n_paths));

#pragma omp parallel for schedule(static)
    for (int path = 0; path < n_paths; ++path) {
        PhiloxStream rng(seed, 3, static_cast<std::uint64_t>(path));
        std::normal_distribution<double> normal;
        CompensatedSum sum;
        std::size_t c = 0;
        for (int k = 1; k <= n_max; ++k) {
            const double r = std::expm1(log_return(normal(rng), params.mu(k), params.sigma(k)));
            if (k == 1) r2[static_cast<std::size_t>(path)] = r * r;
            sum.add(std::log1p(fractions[static_cast<std::size_t>(k - 1)] * r));
            if (k == out.checkpoints[c]) {
                at[c][static_cast<std::size_t>(path)] = sum.value();
                ++c;
            }
        }
    }

    CompensatedSum predicted;
    std::size_t c = 0;
    for (int k = 1; k <= n_max; ++k) {
        const double f = fractions[static_cast<std::size_t>(k - 1)];
        predicted.add(f == 0.0 ? 0.0 : expected_log_growth(f, params.mu(k), params.sigma(k)));
        if (k == out.checkpoints[c]) {
            out.predicted_mean.push_back(predicted.value());
            ++c;
        }
    }

    for (auto& v : at) {
        double mean = 0.0;
        for (double x : v) mean += x;
        out.mean.push_back(mean / static_cast<double>(v.size()));
        std::sort(v.begin(), v.end());
        out.median.push_back(quantile_sorted(v, 0.5));
        out.q1.push_back(quantile_sorted(v, 0.25));
        out.q3.push_back(quantile_sorted(v, 0.75));
    }

    // Late trend: regress median on ln n over checkpoints with n >= sqrt(n_max).
    const double cut = std::sqrt(static_cast<double>(n_max));
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (std::size_t i = 0; i < nc; ++i) {
        if (out.checkpoints[i] < cut) continue;
        const double x = std::log(static_cast<double>(out.checkpoints[i]));
        sx += x; sy += out.median[i]; sxx += x * x; sxy += x * out.median[i];
        ++cnt;
    }
    if (cnt >= 2 && sxx * cnt - sx * sx > 0.0) out.late_slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);

    std::size_t half = 0;
    for (std::size_t i = 0; i < nc; ++i) {
        if (std::abs(out.checkpoints[i] - n_max / 2.0) < std::abs(out.checkpoints[half] - n_max / 2.0)) half = i;
    }
    out.median_gain = out.median.back() - out.median[half];
    out.trend = std::abs(out.median_gain) <= plateau_tol ? "plateau" : (out.median_gain > 0 ? "growing" : "declining");

    out.r2_closed_form = second_moment_return(params.mu(1), params.sigma(1));
    double m = 0.0, ss = 0.0;
    for (double x : r2) m += x;
    m /= static_cast<double>(n_paths);
    for (double x : r2) ss += (x - m) * (x - m);
    out.r2_estimate = m;
    out.r2_se = n_paths > 1 ? std::sqrt(ss / (n_paths - 1.0) / n_paths) : 0.0;
    return out;
}

}  // namespace numeraire
