#include "numeraire/market_io.hpp"

#include <fstream>

#include "numeraire/error.hpp"

namespace numeraire {

FiniteMarket market_from_json(const nlohmann::json& doc) {
    try {
        const int horizon = doc.at("T").get<int>();
        const int dim = doc.at("d").get<int>();
        std::vector<NodeSpec> nodes;
        for (const auto& n : doc.at("nodes")) {
            NodeSpec spec;
            spec.id = n.at("id").get<std::int64_t>();
            spec.t = n.at("t").get<int>();
            if (!n.at("parent").is_null()) spec.parent = n.at("parent").get<std::int64_t>();
            spec.prob = n.at("prob").get<double>();
            spec.prices = n.at("prices").get<std::vector<double>>();
            nodes.push_back(std::move(spec));
        }
        FiniteMarket market(horizon, dim, nodes);
        const auto report = validate_market(market);
        if (!report.ok()) {
            std::string msg = "invalid market:";
            for (const auto& v : report.violations) msg += "\n  " + v;
            throw InputError(msg);
        }
        return market;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed market document: ") + e.what());
    }
}

FiniteMarket load_market(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open market file " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    try {
        return market_from_json(doc);
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

nlohmann::json market_to_json(const FiniteMarket& m) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& spec : m.node_specs()) {
        nlohmann::json n;
        n["id"] = spec.id;
        n["t"] = spec.t;
        n["parent"] = spec.parent ? nlohmann::json(*spec.parent) : nlohmann::json(nullptr);
        n["prob"] = spec.prob;
        n["prices"] = spec.prices;
        nodes.push_back(std::move(n));
    }
    return {{"T", m.horizon()}, {"d", m.dim()}, {"nodes", std::move(nodes)}};
}

}  // namespace numeraire
