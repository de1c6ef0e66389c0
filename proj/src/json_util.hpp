#pragma once

// Strict readers for JSON documents: unknown keys and mistyped values are
// SchemaErrors, never silently ignored.

#include <initializer_list>
#include <string>
#include <string_view>

#include "json.hpp"
#include "sentinel/core.hpp"

namespace sentinel::detail {

using nlohmann::json;

inline void require_object(const json& j, std::string_view where) {
  if (!j.is_object()) throw SchemaError(std::string(where) + ": expected an object");
}

inline void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (std::string_view k : allowed) known = known || it.key() == k;
    if (!known) throw SchemaError(std::string(where) + ": unknown field '" + it.key() + "'");
  }
}

inline const json& field(const json& j, std::string_view key, std::string_view where) {
  auto it = j.find(std::string(key));
  if (it == j.end()) throw SchemaError(std::string(where) + ": missing field '" + std::string(key) + "'");
  return *it;
}

inline double get_number(const json& j, std::string_view key, std::string_view where) {
  const json& v = field(j, key, where);
  if (!v.is_number()) throw SchemaError(std::string(where) + ": field '" + std::string(key) + "' must be a number");
  return v.get<double>();
}

inline double get_number_or(const json& j, std::string_view key, double fallback, std::string_view where) {
  if (!j.contains(std::string(key))) return fallback;
  return get_number(j, key, where);
}

inline std::uint64_t get_uint(const json& j, std::string_view key, std::string_view where) {
  const json& v = field(j, key, where);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw SchemaError(std::string(where) + ": field '" + std::string(key) + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline std::string get_string(const json& j, std::string_view key, std::string_view where) {
  const json& v = field(j, key, where);
  if (!v.is_string()) throw SchemaError(std::string(where) + ": field '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

inline bool get_bool_or(const json& j, std::string_view key, bool fallback, std::string_view where) {
  if (!j.contains(std::string(key))) return fallback;
  const json& v = j.at(std::string(key));
  if (!v.is_boolean()) throw SchemaError(std::string(where) + ": field '" + std::string(key) + "' must be a boolean");
  return v.get<bool>();
}

inline const json& get_array(const json& j, std::string_view key, std::string_view where) {
  const json& v = field(j, key, where);
  if (!v.is_array()) throw SchemaError(std::string(where) + ": field '" + std::string(key) + "' must be an array");
  return v;
}

}  // namespace sentinel::detail
