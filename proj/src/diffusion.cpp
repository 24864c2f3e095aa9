#include "numeraire/diffusion.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <sstream>

#include "numeraire/error.hpp"
#include "numeraire/rng.hpp"

namespace numeraire {

namespace {

constexpr double kRankTol = 1e-10;

double smallest_singular_value(const Eigen::MatrixXd& sigma) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sigma);
    const auto& sv = svd.singularValues();
    return sv.size() == 0 ? 0.0 : sv(sv.size() - 1);
}

// Probability and standard error of an indicator average.
Estimate indicator_mean(const std::vector<char>& hits) {
    const double n = static_cast<double>(hits.size());
    double k = 0.0;
    for (char h : hits) k += h ? 1.0 : 0.0;
    const double p = k / n;
    return {p, hits.size() > 1 ? std::sqrt(p * (1.0 - p) / (n - 1.0)) : 0.0};
}

// Mean and standard error of per-path differences.
Estimate paired_mean(const std::vector<double>& d) {
    const double n = static_cast<double>(d.size());
    double mean = 0.0;
    for (double x : d) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : d) ss += (x - mean) * (x - mean);
    return {mean, d.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0};
}

}  // namespace

Eigen::VectorXd market_price_of_risk(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& mu) {
    if (sigma.rows() != mu.size()) throw InputError("sigma has " + std::to_string(sigma.rows()) +
                                                    " rows but mu has " + std::to_string(mu.size()) + " entries");
    if (sigma.rows() > sigma.cols()) throw InputError("more stocks than Brownian drivers");
    const double smin = smallest_singular_value(sigma);
    if (!(smin > kRankTol)) {
        std::ostringstream os;
        os << "volatility matrix is rank deficient (smallest singular value " << smin << ")";
        throw NumericalError(os.str());
    }
    const Eigen::MatrixXd gram = sigma * sigma.transpose();
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    Eigen::VectorXd y = ldlt.solve(mu);
    // One round of iterative refinement.
    y += ldlt.solve(mu - gram * y);
    Eigen::VectorXd lambda = sigma.transpose() * y;
    const double resid = (sigma * lambda - mu).norm();
    if (resid > 1e-10 * mu.norm() && resid > 1e-300) {
        std::ostringstream os;
        os << "market price of risk residual " << resid << " exceeds 1e-10 |mu|";
        throw NumericalError(os.str());
    }
    return lambda;
}

DiffusionModelSpec DiffusionModelSpec::constant(Eigen::VectorXd mu, Eigen::MatrixXd sigma, double horizon,
                                                Eigen::VectorXd s0) {
    DiffusionModelSpec spec;
    spec.d = static_cast<int>(sigma.rows());
    spec.m = static_cast<int>(sigma.cols());
    spec.horizon = horizon;
    spec.s0 = s0.size() == 0 ? Eigen::VectorXd::Ones(spec.d) : std::move(s0);
    spec.mu = [mu](double, const Eigen::VectorXd&) { return mu; };
    spec.sigma = [sigma](double, const Eigen::VectorXd&) { return sigma; };
    spec.constant_coefficients = true;
    spec.validate();
    return spec;
}

void DiffusionModelSpec::validate() const {
    if (d < 1 || m < d) throw InputError("need 1 <= d <= m");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InputError("horizon must be positive");
    if (s0.size() != d) throw InputError("S0 must have d entries");
    if (!(s0.array() > 0.0).all()) throw InputError("S0 must be positive");
    if (!mu || !sigma) throw InputError("coefficient functions are missing");
    const Eigen::VectorXd mu0 = mu(0.0, s0);
    const Eigen::MatrixXd sigma0 = sigma(0.0, s0);
    if (mu0.size() != d) throw InputError("mu must return d entries");
    if (sigma0.rows() != d || sigma0.cols() != m) throw InputError("sigma must return a d x m matrix");
    market_price_of_risk(sigma0, mu0);
}

DiffusionModelSpec ScalarPowerFamily::member(int n) const {
    if (n < 1) throw InputError("family index starts at 1");
    Eigen::VectorXd mu(1);
    mu(0) = mu0 * std::pow(static_cast<double>(n), -p);
    Eigen::MatrixXd sigma(1, 1);
    sigma(0, 0) = sigma0;
    Eigen::VectorXd s(1);
    s(0) = s0;
    return DiffusionModelSpec::constant(mu, sigma, horizon(n), s);
}

double ScalarPowerFamily::lambda(int n) const { return mu0 * std::pow(static_cast<double>(n), -p) / sigma0; }

double ScalarPowerFamily::horizon(int n) const { return t0 * std::pow(static_cast<double>(n), r); }

Eigen::MatrixXd generate_increments(int m, int steps, double dt, std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t path) {
    PhiloxStream rng(seed, stream, path);
    std::normal_distribution<double> normal(0.0, std::sqrt(dt));
    Eigen::MatrixXd dw(steps, m);
    for (int k = 0; k < steps; ++k) {
        for (int j = 0; j < m; ++j) dw(k, j) = normal(rng);
    }
    return dw;
}

PathRecord simulate_path(const DiffusionModelSpec& spec, const Eigen::MatrixXd& dw) {
    const int steps = static_cast<int>(dw.rows());
    if (steps < 1 || dw.cols() != spec.m) throw InputError("increments must be steps x m with steps >= 1");
    const double dt = spec.horizon / steps;

    PathRecord rec;
    rec.dw = dw;
    rec.log_s.resize(steps + 1, spec.d);
    rec.lambda.resize(steps, spec.m);
    rec.log_v.assign(static_cast<std::size_t>(steps) + 1, 0.0);
    rec.lambda_integral.assign(static_cast<std::size_t>(steps) + 1, 0.0);
    rec.log_s.row(0) = spec.s0.array().log().matrix().transpose();

    Eigen::VectorXd s = spec.s0;
    Eigen::VectorXd mu = spec.mu(0.0, s);
    Eigen::MatrixXd sigma = spec.sigma(0.0, s);
    Eigen::VectorXd lambda = market_price_of_risk(sigma, mu);
    Eigen::VectorXd half_var = 0.5 * sigma.rowwise().squaredNorm();
    for (int k = 0; k < steps; ++k) {
        if (k > 0 && !spec.constant_coefficients) {
            const double t = k * dt;
            mu = spec.mu(t, s);
            sigma = spec.sigma(t, s);
            lambda = market_price_of_risk(sigma, mu);
            half_var = 0.5 * sigma.rowwise().squaredNorm();
        }
        const Eigen::VectorXd step_w = dw.row(k).transpose();
        rec.log_s.row(k + 1) = rec.log_s.row(k) + ((mu - half_var) * dt + sigma * step_w).transpose();
        rec.lambda.row(k) = lambda.transpose();
        const double l2 = lambda.squaredNorm();
        const auto ku = static_cast<std::size_t>(k);
        rec.log_v[ku + 1] = rec.log_v[ku] + 0.5 * l2 * dt + lambda.dot(step_w);
        rec.lambda_integral[ku + 1] = rec.lambda_integral[ku] + l2 * dt;
        s = rec.log_s.row(k + 1).transpose().array().exp().matrix();
        if (!std::isfinite(rec.log_v[ku + 1]) || !s.allFinite()) {
            throw NumericalError("path left the representable range at step " + std::to_string(k + 1));
        }
    }
    return rec;
}

PathBundle simulate(const DiffusionModelSpec& spec, int steps, int n_paths, std::uint64_t seed, bool keep_paths,
                    std::uint64_t stream) {
    if (steps < 1 || n_paths < 1) throw InputError("steps and paths must be at least 1");
    spec.validate();
    const double dt = spec.horizon / steps;

    std::vector<std::optional<PathRecord>> records(static_cast<std::size_t>(n_paths));
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n_paths; ++i) {
        const Eigen::MatrixXd dw = generate_increments(spec.m, steps, dt, seed, stream, static_cast<std::uint64_t>(i));
        try {
            records[static_cast<std::size_t>(i)] = simulate_path(spec, dw);
        } catch (const NumericalError&) {
            // counted below
        }
    }

    PathBundle bundle;
    bundle.seed = seed;
    bundle.stream = stream;
    bundle.steps = steps;
    bundle.dt = dt;
    for (auto& rec : records) {
        if (!rec) {
            ++bundle.excluded;
            continue;
        }
        bundle.log_v_terminal.push_back(rec->log_v.back());
        bundle.lambda_integral.push_back(rec->lambda_integral.back());
        bundle.s_terminal.push_back(rec->log_s.row(steps).transpose().array().exp().matrix());
        if (keep_paths) bundle.paths.push_back(std::move(*rec));
    }
    if (bundle.size() == 0) throw NumericalError("every simulated path was excluded");
    return bundle;
}

double replicate_log_numeraire(const DiffusionModelSpec& spec, const PathRecord& path) {
    const auto steps = path.dw.rows();
    const double dt = spec.horizon / static_cast<double>(steps);
    double log_v = 0.0;
    for (Eigen::Index k = 0; k < steps; ++k) {
        const Eigen::VectorXd s = path.log_s.row(k).transpose().array().exp().matrix();
        const Eigen::MatrixXd sigma = spec.sigma(k * dt, s);
        const Eigen::VectorXd mu = spec.mu(k * dt, s);
        const Eigen::VectorXd delta = (sigma * sigma.transpose()).ldlt().solve(mu);
        const Eigen::VectorXd ret = (path.log_s.row(k + 1) - path.log_s.row(k)).transpose().array().exp() - 1.0;
        const double growth = 1.0 + delta.dot(ret);
        if (!(growth > 0.0)) throw NumericalError("replicating wealth became nonpositive");
        log_v += std::log(growth);
    }
    return log_v;
}

DiffusionSequenceReport price_of_risk_diagnostic(const std::function<DiffusionModelSpec(int)>& family,
                                            const std::vector<int>& n_list, std::span<const double> m_grid,
                                            std::span<const double> alpha_grid, const MonteCarloConfig& mc,
                                            const Policy& policy) {
    if (n_list.empty()) throw InputError("n_list is empty");
    if (m_grid.empty()) throw InputError("M_grid is empty");
    DiffusionSequenceReport rep;
    rep.n = n_list;
    for (double m : m_grid) rep.integral_thresholds.push_back(std::log(m));

    std::vector<TerminalLaw> laws;
    Curve integral;
    integral.n = n_list;
    integral.grid = rep.integral_thresholds;
    for (int n : n_list) {
        const std::uint64_t stream = (static_cast<std::uint64_t>(n) << 8) | kDiffusionStream;
        const PathBundle bundle = simulate(family(n), mc.steps, mc.paths, mc.seed, false, stream);
        rep.excluded.push_back(bundle.excluded);
        laws.push_back(TerminalLaw::sample_log(bundle.log_v_terminal, n));
        std::vector<double> row, se;
        for (double thr : rep.integral_thresholds) {
            std::vector<char> hits;
            hits.reserve(bundle.size());
            for (double v : bundle.lambda_integral) hits.push_back(v >= thr);
            const Estimate e = indicator_mean(hits);
            row.push_back(e.value);
            se.push_back(e.se);
        }
        integral.value.push_back(std::move(row));
        integral.se.push_back(std::move(se));
    }

    static const std::vector<double> kDeltaGrid{0.01, 0.05, 0.1, 0.25, 0.5};
    rep.numeraire = build_diagnostics(laws, m_grid, alpha_grid, kDeltaGrid, policy);
    rep.integral.policy = policy;
    rep.integral.tail = std::move(integral);
    rep.integral.verdict = verdict(rep.integral, policy);
    rep.verdict = rep.integral.verdict.verdict;
    rep.curves_agree = rep.verdict == rep.numeraire.verdict.verdict;
    return rep;
}

ComparisonBoundSlacks verify_comparison_bounds(const PathBundle& bundle, double alpha, double m, double n) {
    if (bundle.size() == 0) throw InputError("bundle is empty");
    if (!(alpha > 0.0 && alpha < 1.0) || !(m > 0.0) || !(n > 0.0)) {
        throw InputError("need alpha in (0,1), M > 0, N > 0");
    }
    const std::size_t count = bundle.size();
    const double log_m = std::log(m);
    const double log_n = std::log(n);
    std::vector<double> d_tail(count), d_int(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double lv = bundle.log_v_terminal[i];
        const double li = bundle.lambda_integral[i];
        d_tail[i] = (li >= n ? 1.0 : 0.0) - (lv >= log_m ? 1.0 : 0.0);
        d_int[i] = (lv >= log_n ? 1.0 : 0.0) - (li >= m ? 1.0 : 0.0);
    }
    const Estimate tail = paired_mean(d_tail);
    const Estimate integ = paired_mean(d_int);
    ComparisonBoundSlacks out;
    out.tail_slack = std::exp(n) / m + tail.value;
    out.tail_se = tail.se;
    out.integral_slack = std::exp(alpha * log_n - 0.5 * alpha * (1.0 - alpha) * m) + integ.value;
    out.integral_se = integ.se;
    return out;
}

}  // namespace numeraire
