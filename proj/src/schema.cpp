#include "aac/schema.hpp"

#include <map>

#include "aac/error.hpp"
#include "schemas_embedded.hpp"

namespace aac {

using nlohmann::json;

namespace {

bool has_type(const json& v, const std::string& type) {
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "boolean") return v.is_boolean();
    if (type == "null") return v.is_null();
    if (type == "integer") return v.is_number_integer();
    if (type == "number") return v.is_number();
    return false;
}

void check(const json& v, const json& s, const std::string& path, std::vector<std::string>& out) {
    if (s.contains("type")) {
        const auto& t = s["type"];
        bool ok = false;
        if (t.is_string()) {
            ok = has_type(v, t.get<std::string>());
        } else {
            for (const auto& alt : t) {
                ok = ok || has_type(v, alt.get<std::string>());
            }
        }
        if (!ok) {
            out.push_back(path + ": expected type " + t.dump());
            return;
        }
    }
    if (s.contains("const") && v != s["const"]) {
        out.push_back(path + ": expected " + s["const"].dump());
    }
    if (s.contains("enum")) {
        bool found = false;
        for (const auto& e : s["enum"]) {
            found = found || e == v;
        }
        if (!found) {
            out.push_back(path + ": value " + v.dump() + " not in " + s["enum"].dump());
        }
    }
    if (v.is_number()) {
        const double x = v.get<double>();
        if (s.contains("minimum") && x < s["minimum"].get<double>()) {
            out.push_back(path + ": below minimum " + s["minimum"].dump());
        }
        if (s.contains("maximum") && x > s["maximum"].get<double>()) {
            out.push_back(path + ": above maximum " + s["maximum"].dump());
        }
    }
    if (v.is_array()) {
        if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>()) {
            out.push_back(path + ": fewer than " + s["minItems"].dump() + " items");
        }
        if (s.contains("items")) {
            for (std::size_t i = 0; i < v.size(); ++i) {
                check(v[i], s["items"], path + "[" + std::to_string(i) + "]", out);
            }
        }
    }
    if (v.is_object()) {
        if (s.contains("required")) {
            for (const auto& key : s["required"]) {
                if (!v.contains(key.get<std::string>())) {
                    out.push_back(path + ": missing field '" + key.get<std::string>() + "'");
                }
            }
        }
        const json props = s.value("properties", json::object());
        const bool closed = s.contains("additionalProperties") && s["additionalProperties"] == false;
        for (auto it = v.begin(); it != v.end(); ++it) {
            if (props.contains(it.key())) {
                check(it.value(), props[it.key()], path + "." + it.key(), out);
            } else if (closed) {
                out.push_back(path + ": unexpected field '" + it.key() + "'");
            }
        }
    }
}

const std::map<std::string, json>& registry() {
    static const std::map<std::string, json> schemas = [] {
        std::map<std::string, json> m;
        for (const auto& [name, text] : embedded_schemas()) {
            m.emplace(name, json::parse(text));
        }
        return m;
    }();
    return schemas;
}

} // namespace

std::vector<std::string> schema_violations(const json& doc, const json& schema) {
    std::vector<std::string> out;
    check(doc, schema, "$", out);
    return out;
}

const json& schema_for(const std::string& kind) {
    const auto& r = registry();
    auto it = r.find(kind);
    if (it == r.end()) {
        fail(ErrorKind::schema, "unknown_kind", "no schema for document kind '" + kind + "'");
    }
    return it->second;
}

std::vector<std::string> schema_kinds() {
    std::vector<std::string> out;
    for (const auto& [name, _] : registry()) {
        out.push_back(name);
    }
    return out;
}

void validate_document(const json& doc) {
    if (!doc.is_object() || !doc.contains("kind") || !doc["kind"].is_string()) {
        fail(ErrorKind::schema, "missing_kind", "document has no string 'kind' field");
    }
    std::string name = doc["kind"].get<std::string>();
    if (name == "report") {
        if (!doc.contains("suite") || !doc["suite"].is_string()) {
            fail(ErrorKind::schema, "missing_suite", "report document has no string 'suite' field");
        }
        name += "_" + doc["suite"].get<std::string>();
    }
    const auto violations = schema_violations(doc, schema_for(name));
    if (!violations.empty()) {
        std::string msg = doc["kind"].get<std::string>() + " document fails its schema:";
        for (const auto& v : violations) {
            msg += "\n  " + v;
        }
        fail(ErrorKind::schema, "schema_violation", msg);
    }
}

void validate_document(const json& doc, const std::string& expected_kind) {
    if (!doc.is_object() || doc.value("kind", std::string{}) != expected_kind) {
        fail(ErrorKind::schema, "wrong_kind", "expected a '" + expected_kind + "' document");
    }
    validate_document(doc);
}

} // namespace aac
