// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <json.hpp>

#include <string>

// Validator for the draft-07 subset the metrics schema uses: type, enum,
// const, minimum, required, properties, allOf and if/then. Returns an empty
// string on success, else a description of the first violation.
namespace schema_check {

inline bool type_matches(const std::string& type, const nlohmann::json& v) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "integer") return v.is_number_integer() || v.is_number_unsigned();
  if (type == "number") return v.is_number();
  if (type == "null") return v.is_null();
  return false;
}

inline std::string validate(const nlohmann::json& schema,
                            const nlohmann::json& value,
                            const std::string& path = "$") {
  if (schema.contains("type")) {
    const std::string type = schema["type"].get<std::string>();
    if (!type_matches(type, value))
      return path + ": expected " + type + ", got " + value.dump();
  }
  if (schema.contains("const") && value != schema["const"])
    return path + ": expected const " + schema["const"].dump();
  if (schema.contains("enum")) {
    bool hit = false;
    for (const auto& candidate : schema["enum"])
      if (value == candidate) hit = true;
    if (!hit) return path + ": " + value.dump() + " not in enum";
  }
  if (schema.contains("minimum") && value.is_number() &&
      value.get<double>() < schema["minimum"].get<double>())
    return path + ": " + value.dump() + " below minimum";
  if (schema.contains("required")) {
    if (!value.is_object()) return path + ": required on non-object";
    for (const auto& name : schema["required"])
      if (!value.contains(name.get<std::string>()))
        return path + ": missing required field " + name.get<std::string>();
  }
  if (schema.contains("properties") && value.is_object()) {
    for (const auto& [name, sub] : schema["properties"].items()) {
      if (!value.contains(name)) continue;
      const std::string err = validate(sub, value.at(name), path + "." + name);
      if (!err.empty()) return err;
    }
  }
  if (schema.contains("allOf")) {
    for (const auto& sub : schema["allOf"]) {
      const std::string err = validate(sub, value, path);
      if (!err.empty()) return err;
    }
  }
  if (schema.contains("if")) {
    const bool condition = validate(schema["if"], value, path).empty();
    if (condition && schema.contains("then")) {
      const std::string err = validate(schema["then"], value, path);
      if (!err.empty()) return err;
    }
  }
  return "";
}

}  // namespace schema_check
