#include "numeraire/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "numeraire/error.hpp"

namespace numeraire {

namespace {

std::vector<double> logs_of(std::span<const double> values) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] > 0.0)) throw InputError("terminal law values must be strictly positive");
        out[i] = std::log(values[i]);
    }
    return out;
}

void check_grid(std::span<const double> grid, const char* name, bool unit_interval) {
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double g = grid[j];
        if (unit_interval ? !(g > 0.0 && g < 1.0) : !(g > 0.0)) {
            throw InputError(std::string(name) + (unit_interval ? " entries must lie in (0, 1)" : " entries must be positive"));
        }
        if (!unit_interval && j > 0 && !(grid[j] > grid[j - 1])) {
            throw InputError(std::string(name) + " must be strictly increasing");
        }
    }
}

Curve make_curve(std::span<const TerminalLaw> laws, std::span<const double> grid) {
    Curve c;
    c.grid.assign(grid.begin(), grid.end());
    for (const auto& law : laws) c.n.push_back(law.index());
    c.value.assign(laws.size(), std::vector<double>(grid.size(), 0.0));
    c.se.assign(laws.size(), std::vector<double>(grid.size(), 0.0));
    return c;
}

}  // namespace

TerminalLaw::TerminalLaw(Kind kind, std::vector<double> log_values, std::vector<double> probs, int index)
    : kind_(kind), log_values_(std::move(log_values)), probs_(std::move(probs)), index_(index) {
    if (log_values_.empty()) throw InputError("terminal law is empty");
    for (double l : log_values_) {
        if (std::isnan(l)) throw InputError("terminal law contains NaN");
    }
}

TerminalLaw TerminalLaw::exact(std::span<const double> values, std::span<const double> probs, int index) {
    return exact_log(logs_of(values), std::vector<double>(probs.begin(), probs.end()), index);
}

TerminalLaw TerminalLaw::exact_log(std::vector<double> log_values, std::vector<double> probs, int index) {
    if (log_values.size() != probs.size()) throw InputError("terminal law values and probabilities differ in size");
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw InputError("terminal law probabilities must be nonnegative");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InputError("terminal law probabilities must sum to 1");
    return TerminalLaw(Kind::Exact, std::move(log_values), std::move(probs), index);
}

TerminalLaw TerminalLaw::sample(std::span<const double> values, int index) {
    return sample_log(logs_of(values), index);
}

TerminalLaw TerminalLaw::sample_log(std::vector<double> log_values, int index) {
    if (log_values.empty()) throw InputError("terminal law is empty");
    std::vector<double> probs(log_values.size(), 1.0 / static_cast<double>(log_values.size()));
    return TerminalLaw(Kind::Sample, std::move(log_values), std::move(probs), index);
}

Estimate TerminalLaw::average(const std::vector<double>& g) const {
    Estimate e;
    if (kind_ == Kind::Sample) {
        for (double x : g) e.value += x;
        e.value /= static_cast<double>(g.size());
    } else {
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (probs_[i] != 0.0) e.value += probs_[i] * g[i];
        }
    }
    if (kind_ == Kind::Sample && g.size() > 1) {
        double ss = 0.0;
        for (double x : g) ss += (x - e.value) * (x - e.value);
        const auto n = static_cast<double>(g.size());
        e.se = std::sqrt(ss / (n - 1.0) / n);
    }
    return e;
}

Estimate TerminalLaw::prob_at_least(double m) const {
    const double lm = std::log(m);
    std::vector<double> g(size());
    for (std::size_t i = 0; i < size(); ++i) g[i] = log_values_[i] >= lm ? 1.0 : 0.0;
    return average(g);
}

Estimate TerminalLaw::prob_below(double m) const {
    Estimate e = prob_at_least(m);
    e.value = 1.0 - e.value;
    return e;
}

Estimate TerminalLaw::negative_moment(double alpha) const {
    std::vector<double> g(size());
    for (std::size_t i = 0; i < size(); ++i) g[i] = std::exp(-alpha * log_values_[i]);
    return average(g);
}

Curve tail_curve(std::span<const TerminalLaw> laws, std::span<const double> m_grid) {
    check_grid(m_grid, "M_grid", false);
    Curve c = make_curve(laws, m_grid);
    for (std::size_t i = 0; i < laws.size(); ++i) {
        for (std::size_t j = 0; j < m_grid.size(); ++j) {
            const auto e = laws[i].prob_at_least(m_grid[j]);
            c.value[i][j] = e.value;
            c.se[i][j] = e.se;
        }
    }
    return c;
}

Curve hellinger_curve(std::span<const TerminalLaw> laws, std::span<const double> alpha_grid) {
    check_grid(alpha_grid, "alpha_grid", true);
    Curve c = make_curve(laws, alpha_grid);
    for (std::size_t i = 0; i < laws.size(); ++i) {
        for (std::size_t j = 0; j < alpha_grid.size(); ++j) {
            const auto e = laws[i].negative_moment(alpha_grid[j]);
            c.value[i][j] = e.value;
            c.se[i][j] = e.se;
        }
    }
    return c;
}

std::vector<double> np_profile(std::span<const double> p, std::span<const double> q,
                               std::span<const double> delta_grid) {
    if (p.size() != q.size()) throw InputError("np_profile: measures live on different atoms");
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    // Free atoms (q = 0 < p) first, then decreasing p/q; ties broken by index.
    auto rank = [&](std::size_t i) {
        if (q[i] == 0.0) return p[i] > 0.0 ? std::numeric_limits<double>::infinity() : -1.0;
        return p[i] / q[i];
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rank(a) > rank(b); });

    std::vector<double> out;
    out.reserve(delta_grid.size());
    for (double delta : delta_grid) {
        double budget = std::max(delta, 0.0);
        double power = 0.0;
        for (std::size_t i : order) {
            if (q[i] == 0.0) {
                power += p[i];
                continue;
            }
            if (budget >= q[i]) {
                power += p[i];
                budget -= q[i];
            } else {
                power += p[i] * budget / q[i];
                break;
            }
        }
        out.push_back(power);
    }
    return out;
}

std::vector<double> np_profile(const SubProbabilityMeasure& p, const SubProbabilityMeasure& q,
                               std::span<const double> delta_grid) {
    return np_profile(p.weights(), q.weights(), delta_grid);
}

std::vector<double> np_profile(const TerminalLaw& law, std::span<const double> delta_grid) {
    std::vector<double> q(law.size());
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = law.probs()[i] * std::exp(-law.log_values()[i]);
    return np_profile(law.probs(), q, delta_grid);
}

bool InequalitySlacks::ok(double tol) const {
    for (const auto& s : {markov, hellinger, comparison}) {
        if (s && *s < -tol) return false;
    }
    return true;
}

InequalitySlacks inequality_check(const TerminalLaw& xi, std::span<const double> eta, double alpha, double m, double n) {
    if (!(alpha > 0.0 && alpha < 1.0) || !(m > 0.0) || !(n > 0.0)) {
        throw InputError("inequality_check requires alpha in (0,1), M > 0, N > 0");
    }
    constexpr double kPreTol = 1e-12;
    InequalitySlacks out;
    const double below = xi.prob_below(m).value;
    const double moment = xi.negative_moment(alpha).value;
    out.markov = std::pow(m, alpha) * moment - below;

    const double inv_mean = xi.negative_moment(1.0).value;
    if (inv_mean <= 1.0 + kPreTol) {
        out.hellinger = std::pow(m, -alpha) + std::pow(n, alpha - 1.0) + std::pow(n, alpha) * below - moment;
    } else {
        out.notices.push_back("E(1/xi) > 1: Hellinger bound skipped");
    }

    if (eta.empty()) {
        out.notices.push_back("no eta supplied: comparison bound skipped");
    } else if (eta.size() != xi.size()) {
        throw InputError("eta must be paired with the atoms of xi");
    } else {
        double ratio = 0.0;
        double eta_tail = 0.0;
        const double lm = std::log(m);
        double xi_tail = 0.0;
        for (std::size_t i = 0; i < xi.size(); ++i) {
            const double p = xi.probs()[i];
            if (!(eta[i] > 0.0)) throw InputError("eta must be strictly positive");
            ratio += p * std::exp(xi.log_values()[i]) / eta[i];
            if (eta[i] >= n) eta_tail += p;
            if (xi.log_values()[i] >= lm) xi_tail += p;
        }
        if (ratio <= 1.0 + kPreTol) {
            out.comparison = n / m + eta_tail - xi_tail;
        } else {
            out.notices.push_back("E(xi/eta) > 1: comparison bound skipped");
        }
    }
    return out;
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::NAA: return "NAA";
        case Verdict::SAA: return "SAA";
        case Verdict::Inconclusive: return "INCONCLUSIVE";
        case Verdict::NotApplicable: return "NOT_APPLICABLE";
    }
    return "?";
}

std::vector<double> Policy::default_m_grid() {
    std::vector<double> g;
    for (int k = 0; k <= 8; ++k) g.push_back(std::pow(10.0, 0.5 * k));
    return g;
}

std::vector<double> Policy::default_alpha_grid() { return {0.5, 0.25, 0.1, 0.05, 0.01}; }

std::size_t Policy::window_begin(std::size_t count) const {
    if (count == 0) return 0;
    const auto len = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(window_fraction * static_cast<double>(count))), 1, count);
    return count - len;
}

VerdictReport verdict(const SequenceDiagnostics& diag, const Policy& policy) {
    VerdictReport rep;
    const Curve& tail = diag.tail;
    if (tail.empty()) {
        rep.explanation = std::string("no tail evidence; ") + kFiniteEvidenceCaveat;
        return rep;
    }
    const std::size_t wb = policy.window_begin(tail.n.size());

    rep.min_tail_sup = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < tail.grid.size(); ++j) {
        double sup = 0.0;
        for (std::size_t i = wb; i < tail.n.size(); ++i) sup = std::max(sup, tail.value[i][j]);
        rep.min_tail_sup = std::min(rep.min_tail_sup, sup);
        if (j + 1 == tail.grid.size()) rep.tail_sup_at_max_m = sup;
    }

    const Curve& hel = diag.hellinger;
    const bool have_hellinger = !hel.empty();
    if (have_hellinger) {
        const auto jmin = static_cast<std::size_t>(
            std::min_element(hel.grid.begin(), hel.grid.end()) - hel.grid.begin());
        const std::size_t hwb = policy.window_begin(hel.n.size());
        rep.hellinger_inf_min_alpha = std::numeric_limits<double>::infinity();
        rep.hellinger_inf_min = std::numeric_limits<double>::infinity();
        for (std::size_t i = hwb; i < hel.n.size(); ++i) {
            rep.hellinger_inf_min_alpha = std::min(rep.hellinger_inf_min_alpha, hel.value[i][jmin]);
            for (double v : hel.value[i]) rep.hellinger_inf_min = std::min(rep.hellinger_inf_min, v);
        }
    }

    rep.naa_consistent = rep.tail_sup_at_max_m < policy.eps_naa &&
                         (!have_hellinger || rep.hellinger_inf_min_alpha > 1.0 - policy.eps_naa);
    rep.saa_consistent = rep.min_tail_sup > 1.0 - policy.eps_saa ||
                         (have_hellinger && rep.hellinger_inf_min < policy.eps_saa);

    if (rep.naa_consistent && !rep.saa_consistent) {
        rep.verdict = Verdict::NAA;
    } else if (rep.saa_consistent && !rep.naa_consistent) {
        rep.verdict = Verdict::SAA;
    } else {
        rep.verdict = Verdict::Inconclusive;
    }

    std::ostringstream os;
    os << "window n >= " << tail.n[wb] << ": sup P(V >= " << tail.grid.back() << ") = " << rep.tail_sup_at_max_m
       << ", min over M of sup P(V >= M) = " << rep.min_tail_sup;
    if (have_hellinger) {
        os << ", inf E V^-alpha at smallest alpha = " << rep.hellinger_inf_min_alpha
           << ", inf over alpha = " << rep.hellinger_inf_min;
    }
    os << "; " << kFiniteEvidenceCaveat;
    rep.explanation = os.str();
    return rep;
}

SequenceDiagnostics build_diagnostics(std::span<const TerminalLaw> laws, std::span<const double> m_grid,
                                      std::span<const double> alpha_grid, std::span<const double> delta_grid,
                                      const Policy& policy) {
    SequenceDiagnostics diag;
    diag.policy = policy;
    diag.tail = tail_curve(laws, m_grid);
    if (!alpha_grid.empty()) diag.hellinger = hellinger_curve(laws, alpha_grid);
    diag.np = make_curve(laws, delta_grid);
    for (std::size_t i = 0; i < laws.size(); ++i) diag.np.value[i] = np_profile(laws[i], delta_grid);
    diag.verdict = verdict(diag, policy);
    return diag;
}

AgreementReport agreement_checks(std::span<const TerminalLaw> laws, std::span<const double> alpha_grid,
                                 std::span<const double> m_grid, const Policy& policy,
                                 std::span<const WealthTriple> triples, double m, double n) {
    AgreementReport rep;
    if (laws.empty() || alpha_grid.empty() || m_grid.empty()) return rep;
    const double alpha = *std::min_element(alpha_grid.begin(), alpha_grid.end());
    const double m_max = *std::max_element(m_grid.begin(), m_grid.end());
    const std::size_t wb = policy.window_begin(laws.size());
    rep.hellinger_side = std::numeric_limits<double>::infinity();
    rep.tail_side = std::numeric_limits<double>::infinity();
    for (std::size_t i = wb; i < laws.size(); ++i) {
        rep.hellinger_side = std::min(rep.hellinger_side, laws[i].negative_moment(alpha).value);
        rep.tail_side = std::min(rep.tail_side, laws[i].prob_below(m_max).value);
    }
    rep.agree = std::abs(rep.hellinger_side - rep.tail_side) <= policy.agreement_tol;

    if (!triples.empty()) {
        double sup_x = 0.0, sup_v_n = 0.0, sup_inv_z = 0.0, sup_v_m = 0.0;
        for (std::size_t i = policy.window_begin(triples.size()); i < triples.size(); ++i) {
            const auto& tr = triples[i];
            double px = 0.0, pvn = 0.0, pz = 0.0, pvm = 0.0;
            for (std::size_t a = 0; a < tr.probs.size(); ++a) {
                if (tr.x[a] >= m) px += tr.probs[a];
                if (tr.v[a] >= n) pvn += tr.probs[a];
                if (1.0 / tr.z[a] >= n) pz += tr.probs[a];
                if (tr.v[a] >= m) pvm += tr.probs[a];
            }
            sup_x = std::max(sup_x, px);
            sup_v_n = std::max(sup_v_n, pvn);
            sup_inv_z = std::max(sup_inv_z, pz);
            sup_v_m = std::max(sup_v_m, pvm);
        }
        rep.wealth_vs_numeraire_slack = n / m + sup_v_n - sup_x;
        rep.numeraire_vs_density_slack = n / m + sup_inv_z - sup_v_m;
        rep.comparison_ok = rep.wealth_vs_numeraire_slack >= -1e-12 && rep.numeraire_vs_density_slack >= -1e-12;
    }
    return rep;
}

}  // namespace numeraire
