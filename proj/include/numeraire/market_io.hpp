#pragma once

#include <filesystem>

#include "json.hpp"
#include "numeraire/core_model.hpp"

namespace numeraire {

// Market document: {"T": int, "d": int, "nodes": [{"id", "t", "parent", "prob", "prices": [..]}]}
// with parent null (and prob 1) at the root. Parsing rejects documents that
// violate any EventTree or FiniteMarket invariant; the message lists every
// violation found.
FiniteMarket market_from_json(const nlohmann::json& doc);
FiniteMarket load_market(const std::filesystem::path& path);

nlohmann::json market_to_json(const FiniteMarket& m);

}  // namespace numeraire
