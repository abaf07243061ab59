#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace aac {

inline constexpr int kSchemaVersion = 1;

/// Checks `doc` against a JSON Schema subset: type, required, properties,
/// additionalProperties (boolean), items, enum, const, minimum, maximum,
/// minItems. Returns one message per violation, empty when valid.
std::vector<std::string> schema_violations(const nlohmann::json& doc, const nlohmann::json& schema);

/// Schema shipped in-repo for a document kind ("probe", "report", ...).
/// Throws aac::Error (schema) for an unknown kind.
const nlohmann::json& schema_for(const std::string& kind);
std::vector<std::string> schema_kinds();

/// Looks up the schema by the document's "kind" field and throws
/// aac::Error (schema) listing the violations, if any.
void validate_document(const nlohmann::json& doc);
void validate_document(const nlohmann::json& doc, const std::string& expected_kind);

} // namespace aac
