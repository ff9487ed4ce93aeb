#pragma once

#include <json.hpp>
#include <string>

#include "linex/extraction.hpp"
#include "linex/regions.hpp"

namespace linex {

using Json = nlohmann::json;

Json to_json(const Hyperplane& h);
Hyperplane hyperplane_from_json(const Json& j);

Json to_json(const ExtractionReport& r);

/// Audit dump of every typed constraint row of a model.
Json to_json(const UncertaintyModel& m);

Json norm_to_json(NormKind k);
NormKind norm_from_json(const Json& j);

/// One JSON object per line, fields seq/kind/input/output/label.
std::string ledger_to_jsonl(const QueryLedger& ledger);
QueryLedger ledger_from_jsonl(const std::string& text);

/// Deterministic serialization: objects with sorted keys, doubles printed
/// with 17 significant digits. No timestamps anywhere.
std::string canonical_dump(const Json& j, int indent = 0);

}  // namespace linex
