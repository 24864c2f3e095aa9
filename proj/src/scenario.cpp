#include "numeraire/scenario.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "numeraire/diffusion.hpp"
#include "numeraire/log_optimal.hpp"
#include "numeraire/lognormal.hpp"
#include "numeraire/market_io.hpp"

namespace numeraire {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<double> kDefaultDeltaGrid{0.01, 0.05, 0.1, 0.25, 0.5};

const json* find(const json& obj, const char* key) {
    if (!obj.is_object()) return nullptr;
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double number(const json& v, const std::string& field) {
    if (!v.is_number()) throw ConfigError(field, "expected a number");
    return v.get<double>();
}

double number(const json& obj, const char* key, const std::string& prefix, std::optional<double> fallback = {}) {
    const json* v = find(obj, key);
    if (!v) {
        if (fallback) return *fallback;
        throw ConfigError(prefix + key, "missing");
    }
    return number(*v, prefix + key);
}

int integer(const json& obj, const char* key, const std::string& prefix, std::optional<int> fallback = {}) {
    const json* v = find(obj, key);
    if (!v) {
        if (fallback) return *fallback;
        throw ConfigError(prefix + key, "missing");
    }
    if (!v->is_number_integer()) throw ConfigError(prefix + key, "expected an integer");
    return v->get<int>();
}

std::vector<double> number_array(const json& v, const std::string& field) {
    if (!v.is_array()) throw ConfigError(field, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], field + "[" + std::to_string(i) + "]"));
    return out;
}

template <class T>
void require_sorted_nonempty(const std::vector<T>& grid, const std::string& field) {
    if (grid.empty()) throw ConfigError(field, "must be nonempty");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i - 1] < grid[i])) throw ConfigError(field, "must be strictly increasing");
    }
}

std::vector<double> grid_or(const json& grids, const char* key, std::vector<double> fallback) {
    const json* v = find(grids, key);
    if (!v) return fallback;
    auto g = number_array(*v, std::string("grids.") + key);
    require_sorted_nonempty(g, std::string("grids.") + key);
    return g;
}

// Byte offset -> "line L, column C".
std::string position(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

FiniteMarket market_from_entry(const json& entry, const fs::path& base, const std::string& field) {
    try {
        if (entry.is_string()) {
            fs::path p = entry.get<std::string>();
            if (p.is_relative()) p = base / p;
            return load_market(p);
        }
        if (entry.is_object()) return market_from_json(entry);
    } catch (const InputError& e) {
        throw ConfigError(field, e.what());
    }
    throw ConfigError(field, "expected a file path or an inline market object");
}

void check_market_entry(const json& entry, const std::string& field) {
    if (!entry.is_string() && !entry.is_object()) {
        throw ConfigError(field, "expected a file path or an inline market object");
    }
}

void validate_model(ScenarioConfig& cfg) {
    const json& doc = cfg.raw;
    switch (cfg.kind) {
        case ScenarioKind::Tree: {
            const json* market = find(doc, "market");
            if (!market) throw ConfigError("market", "missing");
            check_market_entry(*market, "market");
            cfg.model = *market;
            break;
        }
        case ScenarioKind::TreeSequence: {
            const json* markets = find(doc, "markets");
            const json* iid = find(doc, "iid");
            if (markets && iid) throw ConfigError("markets", "give either markets or iid, not both");
            if (markets) {
                if (!markets->is_array() || markets->empty()) throw ConfigError("markets", "must be a nonempty array");
                for (std::size_t i = 0; i < markets->size(); ++i) {
                    check_market_entry((*markets)[i], "markets[" + std::to_string(i) + "]");
                }
                if (cfg.n_list.empty()) {
                    for (std::size_t i = 0; i < markets->size(); ++i) cfg.n_list.push_back(static_cast<int>(i) + 1);
                }
                if (cfg.n_list.size() != markets->size()) {
                    throw ConfigError("grids.n_list", "must have one entry per market");
                }
                cfg.model = json{{"markets", *markets}};
            } else if (iid) {
                const auto factors = number_array(find(*iid, "factors") ? (*iid)["factors"] : json(), "iid.factors");
                const auto probs = number_array(find(*iid, "probs") ? (*iid)["probs"] : json(), "iid.probs");
                if (factors.size() != probs.size() || factors.size() < 2) {
                    throw ConfigError("iid.factors", "need at least two factors with matching probs");
                }
                number(*iid, "s0", "iid.", 1.0);
                if (cfg.n_list.empty()) throw ConfigError("grids.n_list", "required for iid sequences (horizon = n)");
                for (int n : cfg.n_list) {
                    if (n < 1 || n > 16) throw ConfigError("grids.n_list", "iid horizons must lie in 1..16");
                }
                cfg.model = json{{"iid", *iid}};
            } else {
                throw ConfigError("markets", "missing (or give iid)");
            }
            break;
        }
        case ScenarioKind::Diffusion: {
            const json* model = find(doc, "diffusion");
            if (!model || !model->is_object()) throw ConfigError("diffusion", "missing or not an object");
            const json* type = find(*model, "type");
            if (!type || !type->is_string()) throw ConfigError("diffusion.type", "missing");
            const auto t = type->get<std::string>();
            if (t == "constant") {
                number_array(find(*model, "mu") ? (*model)["mu"] : json(), "diffusion.mu");
                const json* sigma = find(*model, "sigma");
                if (!sigma || !sigma->is_array() || sigma->empty()) {
                    throw ConfigError("diffusion.sigma", "expected a nonempty array of rows");
                }
                for (std::size_t i = 0; i < sigma->size(); ++i) {
                    number_array((*sigma)[i], "diffusion.sigma[" + std::to_string(i) + "]");
                }
                if (!(number(*model, "horizon", "diffusion.") > 0.0)) {
                    throw ConfigError("diffusion.horizon", "must be positive");
                }
            } else if (t == "scalar-power-family") {
                number(*model, "mu0", "diffusion.");
                number(*model, "p", "diffusion.", 0.0);
                if (!(number(*model, "sigma0", "diffusion.") > 0.0)) {
                    throw ConfigError("diffusion.sigma0", "must be positive");
                }
                if (!(number(*model, "t0", "diffusion.", 1.0) > 0.0)) {
                    throw ConfigError("diffusion.t0", "must be positive");
                }
                number(*model, "r", "diffusion.", 0.0);
            } else {
                throw ConfigError("diffusion.type", "unknown coefficient type '" + t + "'");
            }
            if (cfg.n_list.empty()) throw ConfigError("grids.n_list", "required for diffusion scenarios");
            if (cfg.n_list.front() < 1) throw ConfigError("grids.n_list", "entries must be >= 1");
            if (!cfg.has_mc) throw ConfigError("mc", "required for diffusion scenarios");
            cfg.model = *model;
            break;
        }
        case ScenarioKind::Lognormal: {
            const json* model = find(doc, "lognormal");
            if (!model || !model->is_object()) throw ConfigError("lognormal", "missing or not an object");
            const json* type = find(*model, "mode");
            if (!type || !type->is_string()) throw ConfigError("lognormal.mode", "missing");
            const auto t = type->get<std::string>();
            if (t == "power") {
                number(*model, "a", "lognormal.");
                if (number(*model, "p", "lognormal.") < 0.0) throw ConfigError("lognormal.p", "must be >= 0");
                if (!(number(*model, "b", "lognormal.") > 0.0)) throw ConfigError("lognormal.b", "must be positive");
                if (number(*model, "q", "lognormal.") < 0.0) throw ConfigError("lognormal.q", "must be >= 0");
            } else if (t == "numeric") {
                const auto mu = number_array(find(*model, "mu") ? (*model)["mu"] : json(), "lognormal.mu");
                const auto sigma = number_array(find(*model, "sigma") ? (*model)["sigma"] : json(), "lognormal.sigma");
                if (mu.empty() || mu.size() != sigma.size()) {
                    throw ConfigError("lognormal.sigma", "mu and sigma must be nonempty and of equal length");
                }
                for (double s : sigma) {
                    if (!(s > 0.0)) throw ConfigError("lognormal.sigma", "entries must be positive");
                }
            } else {
                throw ConfigError("lognormal.mode", "unknown parameter mode '" + t + "' (power | numeric)");
            }
            if (integer(*model, "n_report", "lognormal.", 1000) < 1) {
                throw ConfigError("lognormal.n_report", "must be positive");
            }
            if (const json* growth = find(*model, "growth")) {
                if (integer(*growth, "n_max", "lognormal.growth.") < 1) {
                    throw ConfigError("lognormal.growth.n_max", "must be positive");
                }
                if (!cfg.has_mc) throw ConfigError("mc", "required when lognormal.growth is requested");
            }
            if (const json* eps = find(*model, "eps")) {
                auto g = number_array(*eps, "lognormal.eps");
                require_sorted_nonempty(g, "lognormal.eps");
                if (!(g.front() > 0.0)) throw ConfigError("lognormal.eps", "entries must be positive");
            }
            cfg.model = *model;
            break;
        }
    }
}

LognormalParams lognormal_params(const json& model) {
    if (model["mode"] == "power") {
        return LognormalParams::power(model["a"].get<double>(), model["p"].get<double>(), model["b"].get<double>(),
                                      model["q"].get<double>());
    }
    return LognormalParams::numeric(model["mu"].get<std::vector<double>>(), model["sigma"].get<std::vector<double>>());
}

std::function<DiffusionModelSpec(int)> diffusion_family(const json& model) {
    if (model["type"] == "scalar-power-family") {
        ScalarPowerFamily fam;
        fam.mu0 = model["mu0"].get<double>();
        fam.p = model.value("p", 0.0);
        fam.sigma0 = model["sigma0"].get<double>();
        fam.t0 = model.value("t0", 1.0);
        fam.r = model.value("r", 0.0);
        fam.s0 = model.value("s0", 1.0);
        return [fam](int n) { return fam.member(n); };
    }
    const auto mu_v = model["mu"].get<std::vector<double>>();
    const auto rows = model["sigma"].get<std::vector<std::vector<double>>>();
    const auto d = static_cast<Eigen::Index>(rows.size());
    const auto m = static_cast<Eigen::Index>(rows.front().size());
    if (static_cast<Eigen::Index>(mu_v.size()) != d) throw ConfigError("diffusion.mu", "needs one entry per sigma row");
    Eigen::MatrixXd sigma(d, m);
    for (Eigen::Index i = 0; i < d; ++i) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != m) {
            throw ConfigError("diffusion.sigma", "rows differ in length");
        }
        for (Eigen::Index j = 0; j < m; ++j) sigma(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    const Eigen::VectorXd mu = Eigen::Map<const Eigen::VectorXd>(mu_v.data(), d);
    Eigen::VectorXd s0 = Eigen::VectorXd::Ones(d);
    if (model.contains("s0")) {
        const auto s = model["s0"].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(s.size()) != d) throw ConfigError("diffusion.s0", "needs one entry per stock");
        s0 = Eigen::Map<const Eigen::VectorXd>(s.data(), d);
    }
    const double horizon = model["horizon"].get<double>();
    try {
        auto spec = DiffusionModelSpec::constant(mu, sigma, horizon, s0);
        return [spec](int) { return spec; };
    } catch (const InputError& e) {
        throw ConfigError("diffusion", e.what());
    }
}

json policy_json(const Policy& p) {
    return {{"eps_naa", p.eps_naa}, {"eps_saa", p.eps_saa}, {"window_fraction", p.window_fraction},
            {"agreement_tol", p.agreement_tol}};
}

json verdict_json(const VerdictReport& v) {
    return {{"verdict", to_string(v.verdict)},
            {"naa_consistent", v.naa_consistent},
            {"saa_consistent", v.saa_consistent},
            {"tail_sup_at_max_m", v.tail_sup_at_max_m},
            {"min_tail_sup", v.min_tail_sup},
            {"hellinger_inf_min_alpha", v.hellinger_inf_min_alpha},
            {"hellinger_inf_min", v.hellinger_inf_min},
            {"explanation", v.explanation}};
}

struct CurveRows {
    std::ostringstream out;
    void add(const std::string& family, const Curve& c) {
        for (std::size_t i = 0; i < c.n.size(); ++i) {
            for (std::size_t j = 0; j < c.grid.size(); ++j) {
                const double se = i < c.se.size() && j < c.se[i].size() ? c.se[i][j] : 0.0;
                out << family << ',' << c.n[i] << ',' << c.grid[j] << ',' << c.value[i][j] << ',' << se << '\n';
            }
        }
    }
    void add(const std::string& family, int n, double x, double value, double se = 0.0) {
        out << family << ',' << n << ',' << x << ',' << value << ',' << se << '\n';
    }
};

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << text;
    if (!f) throw std::runtime_error("failed writing " + p.string());
}

Curve np_curve(const SequenceDiagnostics& d) { return d.np; }

json run_tree(const ScenarioConfig& cfg, CurveRows& rows, std::optional<SequenceDiagnostics>& plot) {
    const FiniteMarket market = market_from_entry(cfg.model, cfg.base_dir, "market");
    const NumeraireSolution sol = solve_log_optimal(market);
    const int samples = cfg.has_mc ? cfg.mc_paths : 200;
    const DualityReport dual = verify_duality(market, sol, samples, cfg.seed);

    const auto probs = market.leaf_probabilities();
    std::vector<TerminalLaw> laws{TerminalLaw::exact(sol.terminal, probs, 1)};
    SequenceDiagnostics diag = build_diagnostics(laws, cfg.m_grid, cfg.alpha_grid, cfg.delta_grid, cfg.policy);
    rows.add("tail", diag.tail);
    rows.add("hellinger", diag.hellinger);
    rows.add("np", np_curve(diag));
    plot = diag;

    json res = solution_to_json(market, sol);
    res["duality"] = {{"samples", dual.samples},
                      {"passed", dual.passed()},
                      {"martingale_slack", dual.martingale_slack},
                      {"qhat_entropy", dual.qhat_entropy},
                      {"min_sampled_entropy", dual.min_sampled_entropy},
                      {"worst_entropy_margin", dual.worst_entropy_margin},
                      {"worst_ratio_slack", dual.worst_ratio_slack},
                      {"max_ratio_expectation", dual.max_ratio_expectation}};
    res["verdict"] = to_string(Verdict::NotApplicable);
    return res;
}

json run_tree_sequence(const ScenarioConfig& cfg, CurveRows& rows, std::optional<SequenceDiagnostics>& plot) {
    std::vector<TerminalLaw> laws;
    json per_n = json::array();
    for (std::size_t i = 0; i < cfg.n_list.size(); ++i) {
        const int n = cfg.n_list[i];
        FiniteMarket market = [&] {
            if (cfg.model.contains("markets")) {
                return market_from_entry(cfg.model["markets"][i], cfg.base_dir, "markets[" + std::to_string(i) + "]");
            }
            const json& iid = cfg.model["iid"];
            const auto factors = iid["factors"].get<std::vector<double>>();
            const auto probs = iid["probs"].get<std::vector<double>>();
            try {
                return make_iid_tree(n, iid.value("s0", 1.0), factors, probs);
            } catch (const InputError& e) {
                throw ConfigError("iid", e.what());
            }
        }();
        const NumeraireSolution sol = solve_log_optimal(market);
        laws.push_back(TerminalLaw::exact(sol.terminal, market.leaf_probabilities(), n));
        per_n.push_back({{"n", n}, {"log_value", sol.log_value}, {"gap", sol.gap}, {"leaves", market.num_leaves()}});
    }
    SequenceDiagnostics diag = build_diagnostics(laws, cfg.m_grid, cfg.alpha_grid, cfg.delta_grid, cfg.policy);
    const AgreementReport cor = agreement_checks(laws, cfg.alpha_grid, cfg.m_grid, cfg.policy);
    rows.add("tail", diag.tail);
    rows.add("hellinger", diag.hellinger);
    rows.add("np", np_curve(diag));
    plot = diag;
    return {{"per_n", per_n},
            {"verdict", to_string(diag.verdict.verdict)},
            {"verdict_detail", verdict_json(diag.verdict)},
            {"hellinger_tail_agreement",
             {{"hellinger_side", cor.hellinger_side}, {"tail_side", cor.tail_side}, {"agree", cor.agree}}}};
}

json run_diffusion(const ScenarioConfig& cfg, CurveRows& rows, std::optional<SequenceDiagnostics>& plot) {
    const auto family = diffusion_family(cfg.model);
    MonteCarloConfig mc{cfg.mc_paths, cfg.mc_steps, cfg.seed};
    const DiffusionSequenceReport rep =
        price_of_risk_diagnostic(family, cfg.n_list, cfg.m_grid, cfg.alpha_grid, mc, cfg.policy);
    rows.add("tail", rep.numeraire.tail);
    rows.add("hellinger", rep.numeraire.hellinger);
    rows.add("np", rep.numeraire.np);
    rows.add("integral_tail", rep.integral.tail);
    plot = rep.numeraire;
    return {{"verdict", to_string(rep.verdict)},
            {"integral_verdict", verdict_json(rep.integral.verdict)},
            {"numeraire_verdict", verdict_json(rep.numeraire.verdict)},
            {"curves_agree", rep.curves_agree},
            {"integral_thresholds", rep.integral_thresholds},
            {"excluded_paths", rep.excluded}};
}

json run_lognormal(const ScenarioConfig& cfg, CurveRows& rows) {
    const LognormalParams params = lognormal_params(cfg.model);
    int n_report = cfg.model.value("n_report", 1000);
    if (auto len = params.length()) n_report = std::min(n_report, *len);
    json res;

    auto series_json = [](const SigmaSeries& s) {
        return json{{"eps", s.eps},
                    {"terms", s.sigma.size()},
                    {"sigma1", s.sigma1.back()},
                    {"sigma2", s.sigma2.back()},
                    {"sigma", s.sigma.back()},
                    {"sigma1_behavior", to_string(s.sigma1_behavior)},
                    {"sigma2_behavior", to_string(s.sigma2_behavior)},
                    {"sigma_behavior", to_string(s.sigma_behavior)},
                    {"vanishing_volatility", to_string(s.vanishing_volatility)}};
    };
    auto add_series_rows = [&](const SigmaSeries& s) {
        for (std::size_t k = 0; k < s.sigma.size(); ++k) {
            const int n = static_cast<int>(k) + 1;
            rows.add("sigma1", n, s.eps, s.sigma1[k]);
            rows.add("sigma2", n, s.eps, s.sigma2[k]);
            rows.add("sigma", n, s.eps, s.sigma[k]);
        }
    };

    if (params.symbolic()) {
        const SeriesVerdict v = series_verdict(params, n_report);
        json fired = json::array();
        for (const auto& f : v.firing) {
            fired.push_back({{"rule", to_string(f.rule)}, {"verdict", to_string(f.verdict)}, {"eps", f.eps},
                             {"detail", f.detail}});
        }
        res["verdict"] = to_string(v.verdict);
        res["basis"] = v.basis;
        res["rules_fired"] = fired;
        res["eps_scanned"] = v.eps_scanned;
        res["series"] = series_json(v.report);
        add_series_rows(v.report);
    } else {
        // Convergence cannot be decided from finitely many terms: report
        // partial sums and the increment over the second half.
        const std::vector<double> eps_grid = cfg.model.contains("eps")
                                                 ? cfg.model["eps"].get<std::vector<double>>()
                                                 : std::vector<double>{0.1, 0.5, 1.0};
        json trend = json::array();
        for (double eps : eps_grid) {
            const SigmaSeries s = sigma_series(params, eps, n_report);
            json j = series_json(s);
            const std::size_t half = s.sigma.size() / 2;
            j["second_half_increment"] = s.sigma.back() - (half > 0 ? s.sigma[half - 1] : 0.0);
            trend.push_back(j);
            add_series_rows(s);
        }
        res["verdict"] = to_string(Verdict::NotApplicable);
        res["basis"] = "numeric parameters: series trend report only";
        res["series_trend"] = trend;
    }

    if (cfg.model.contains("growth")) {
        int n_max = cfg.model["growth"]["n_max"].get<int>();
        if (auto len = params.length(); len && n_max > *len) {
            throw ConfigError("lognormal.growth.n_max", "exceeds the number of supplied periods");
        }
        const GrowthTrend g = monte_carlo_growth(params, n_max, cfg.mc_paths, cfg.seed);
        for (std::size_t i = 0; i < g.checkpoints.size(); ++i) {
            rows.add("growth_median", g.checkpoints[i], 0.5, g.median[i]);
            rows.add("growth_q1", g.checkpoints[i], 0.25, g.q1[i]);
            rows.add("growth_q3", g.checkpoints[i], 0.75, g.q3[i]);
            rows.add("growth_mean", g.checkpoints[i], 0.0, g.mean[i]);
            rows.add("growth_predicted_mean", g.checkpoints[i], 0.0, g.predicted_mean[i]);
        }
        res["growth"] = {{"checkpoints", g.checkpoints},
                         {"median", g.median},
                         {"late_slope", g.late_slope},
                         {"median_gain", g.median_gain},
                         {"trend", g.trend},
                         {"second_moment_return", {{"closed_form", g.r2_closed_form},
                                                   {"estimate", g.r2_estimate},
                                                   {"se", g.r2_se}}}};
    }
    return res;
}

}  // namespace

std::string to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::Tree: return "tree";
        case ScenarioKind::TreeSequence: return "tree-sequence";
        case ScenarioKind::Diffusion: return "diffusion";
        case ScenarioKind::Lognormal: return "lognormal";
    }
    return "?";
}

ScenarioConfig parse_config(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) throw ConfigError("<root>", "config must be an object");
    ScenarioConfig cfg;
    cfg.raw = doc;
    cfg.base_dir = base_dir;

    const json* kind = find(doc, "kind");
    if (!kind || !kind->is_string()) throw ConfigError("kind", "missing");
    const auto k = kind->get<std::string>();
    if (k == "tree") cfg.kind = ScenarioKind::Tree;
    else if (k == "tree-sequence") cfg.kind = ScenarioKind::TreeSequence;
    else if (k == "diffusion") cfg.kind = ScenarioKind::Diffusion;
    else if (k == "lognormal") cfg.kind = ScenarioKind::Lognormal;
    else throw ConfigError("kind", "unknown scenario kind '" + k + "' (tree | tree-sequence | diffusion | lognormal)");

    const json empty = json::object();
    const json* grids = find(doc, "grids");
    if (grids && !grids->is_object()) throw ConfigError("grids", "expected an object");
    const json& g = grids ? *grids : empty;
    cfg.m_grid = grid_or(g, "M_grid", Policy::default_m_grid());
    if (!(cfg.m_grid.front() > 0.0)) throw ConfigError("grids.M_grid", "entries must be positive");
    cfg.alpha_grid = grid_or(g, "alpha_grid", Policy::default_alpha_grid());
    if (!(cfg.alpha_grid.front() > 0.0) || !(cfg.alpha_grid.back() < 1.0)) {
        throw ConfigError("grids.alpha_grid", "entries must lie in (0, 1)");
    }
    cfg.delta_grid = grid_or(g, "delta_grid", kDefaultDeltaGrid);
    if (!(cfg.delta_grid.front() >= 0.0) || !(cfg.delta_grid.back() <= 1.0)) {
        throw ConfigError("grids.delta_grid", "entries must lie in [0, 1]");
    }
    if (const json* nl = find(g, "n_list")) {
        if (!nl->is_array()) throw ConfigError("grids.n_list", "expected an array of integers");
        for (const auto& v : *nl) {
            if (!v.is_number_integer()) throw ConfigError("grids.n_list", "expected an array of integers");
            cfg.n_list.push_back(v.get<int>());
        }
        require_sorted_nonempty(cfg.n_list, "grids.n_list");
    }

    if (const json* mc = find(doc, "mc")) {
        if (!mc->is_object()) throw ConfigError("mc", "expected an object");
        cfg.has_mc = true;
        cfg.mc_paths = integer(*mc, "paths", "mc.");
        cfg.mc_steps = integer(*mc, "steps", "mc.", 1);
        if (cfg.mc_paths < 1) throw ConfigError("mc.paths", "must be positive");
        if (cfg.mc_steps < 1) throw ConfigError("mc.steps", "must be positive");
        const json* seed = find(*mc, "seed");
        if (!seed) throw ConfigError("mc.seed", "missing (a seed is required whenever Monte Carlo is requested)");
        if (!seed->is_number_unsigned()) throw ConfigError("mc.seed", "expected a nonnegative integer");
        cfg.seed = seed->get<std::uint64_t>();
    }

    if (const json* pol = find(doc, "policy")) {
        if (!pol->is_object()) throw ConfigError("policy", "expected an object");
        cfg.policy.eps_naa = number(*pol, "eps_naa", "policy.", cfg.policy.eps_naa);
        cfg.policy.eps_saa = number(*pol, "eps_saa", "policy.", cfg.policy.eps_saa);
        cfg.policy.window_fraction = number(*pol, "window_fraction", "policy.", cfg.policy.window_fraction);
        cfg.policy.agreement_tol = number(*pol, "agreement_tol", "policy.", cfg.policy.agreement_tol);
        if (!(cfg.policy.eps_naa > 0.0 && cfg.policy.eps_naa < 0.5)) {
            throw ConfigError("policy.eps_naa", "must lie in (0, 0.5)");
        }
        if (!(cfg.policy.eps_saa > 0.0 && cfg.policy.eps_saa < 0.5)) {
            throw ConfigError("policy.eps_saa", "must lie in (0, 0.5)");
        }
        if (!(cfg.policy.window_fraction > 0.0 && cfg.policy.window_fraction <= 1.0)) {
            throw ConfigError("policy.window_fraction", "must lie in (0, 1]");
        }
    }

    if (const json* out = find(doc, "output")) {
        if (!out->is_object()) throw ConfigError("output", "expected an object");
        if (const json* dir = find(*out, "dir")) {
            if (!dir->is_string()) throw ConfigError("output.dir", "expected a string");
            cfg.output_dir = dir->get<std::string>();
        }
        if (const json* pd = find(*out, "plotdata")) {
            if (!pd->is_boolean()) throw ConfigError("output.plotdata", "expected a boolean");
            cfg.plotdata = pd->get<bool>();
        }
    }

    validate_model(cfg);
    return cfg;
}

ScenarioConfig load_config(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("config", "cannot read " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string text = ss.str();
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config", path.string() + ": " + position(text, e.byte > 0 ? e.byte - 1 : 0) +
                                        ": syntax error");
    }
    try {
        return parse_config(doc, path.parent_path());
    } catch (const ConfigError& e) {
        throw ConfigError(e.field(), path.string() + ": " + std::string(e.what()).substr(e.field().size() + 2));
    }
}

std::string config_hash(const json& doc) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : doc.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

PlotdataSummary emit_plotdata(const SequenceDiagnostics& diag, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

    PlotdataSummary sum;
    std::ostringstream tail, hel, np;
    tail << std::setprecision(17) << "n,M,probability,se\n";
    hel << std::setprecision(17) << "n,alpha,value,se\n";
    np << std::setprecision(17) << "n,delta,power\n";

    const Curve& t = diag.tail;
    for (std::size_t i = 0; i < t.n.size(); ++i) {
        for (std::size_t j = 0; j < t.grid.size(); ++j) {
            tail << t.n[i] << ',' << t.grid[j] << ',' << t.value[i][j] << ',' << t.se[i][j] << '\n';
            ++sum.tail_rows;
        }
    }
    const Curve& h = diag.hellinger;
    for (std::size_t i = 0; i < h.n.size(); ++i) {
        bool monotone = true;
        for (std::size_t j = 0; j < h.grid.size(); ++j) {
            const double v = h.value[i][j];
            const double slack = 3.0 * h.se[i][j] + 1e-12;
            if (!(v > 0.0) || v > 1.0 + slack) {
                std::ostringstream os;
                os << "Hellinger value " << v << " at n = " << h.n[i] << ", alpha = " << h.grid[j]
                   << " lies outside (0, 1]";
                throw NumericalError(os.str());
            }
            if (j > 0 && v > h.value[i][j - 1]) monotone = false;
            hel << h.n[i] << ',' << h.grid[j] << ',' << v << ',' << h.se[i][j] << '\n';
            ++sum.hellinger_rows;
        }
        sum.hellinger_monotone.push_back(monotone);
    }
    const Curve& p = diag.np;
    for (std::size_t i = 0; i < p.n.size(); ++i) {
        for (std::size_t j = 0; j < p.grid.size(); ++j) {
            np << p.n[i] << ',' << p.grid[j] << ',' << p.value[i][j] << '\n';
            ++sum.np_rows;
        }
    }
    write_text(dir / "tail_curve.csv", tail.str());
    write_text(dir / "hellinger_curve.csv", hel.str());
    write_text(dir / "np_profile.csv", np.str());
    return sum;
}

RunResult run_scenario(const ScenarioConfig& cfg, const std::optional<fs::path>& out_dir, int threads) {
    RunResult result;
    if (threads > 0) omp_set_num_threads(threads);
    const fs::path dir = out_dir ? *out_dir : cfg.output_dir;
    try {
        CurveRows rows;
        rows.out << std::setprecision(17) << "family,n,x,value,se\n";
        std::optional<SequenceDiagnostics> plot;
        json results;
        switch (cfg.kind) {
            case ScenarioKind::Tree: results = run_tree(cfg, rows, plot); break;
            case ScenarioKind::TreeSequence: results = run_tree_sequence(cfg, rows, plot); break;
            case ScenarioKind::Diffusion: results = run_diffusion(cfg, rows, plot); break;
            case ScenarioKind::Lognormal: results = run_lognormal(cfg, rows); break;
        }

        json report = {{"kind", to_string(cfg.kind)},
                       {"version", kVersion},
                       {"config_hash", config_hash(cfg.raw)},
                       {"seed", cfg.has_mc ? json(cfg.seed) : json(nullptr)},
                       {"policy", policy_json(cfg.policy)},
                       {"grids", {{"M_grid", cfg.m_grid}, {"alpha_grid", cfg.alpha_grid},
                                  {"delta_grid", cfg.delta_grid}, {"n_list", cfg.n_list}}},
                       {"results", results},
                       {"generated_at", utc_timestamp()}};
        if (cfg.has_mc) report["mc"] = {{"paths", cfg.mc_paths}, {"steps", cfg.mc_steps}};

        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw ConfigError("output.dir", "cannot create " + dir.string() + ": " + ec.message());
        write_text(dir / "report.json", report.dump(2) + "\n");
        write_text(dir / "curves.csv", rows.out.str());
        if (cfg.plotdata) emit_plotdata(plot ? *plot : SequenceDiagnostics{}, dir);

        result.exit_code = kExitOk;
        result.message = "wrote " + (dir / "report.json").string();
        result.report = std::move(report);
    } catch (const ConfigError& e) {
        result.exit_code = kExitConfig;
        result.message = e.what();
    } catch (const InputError& e) {
        result.exit_code = kExitConfig;
        result.message = e.what();
    } catch (const NumericalError& e) {
        result.exit_code = kExitNumerical;
        result.message = e.what();
    } catch (const std::exception& e) {
        result.exit_code = kExitNumerical;
        result.message = e.what();
    }
    return result;
}

}  // namespace numeraire
