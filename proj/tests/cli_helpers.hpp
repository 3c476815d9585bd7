#pragma once

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace testutil {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

/// Run a shell command capturing stdout (stderr folded in).
inline CliResult run_command(const std::string& command) {
  CliResult result;
  FILE* pipe = ::popen((command + " 2>&1").c_str(), "r");
  if (!pipe) return result;
  std::array<char, 4096> buffer{};
  std::size_t got;
  while ((got = ::fread(buffer.data(), 1, buffer.size(), pipe)) > 0)
    result.output.append(buffer.data(), got);
  const int status = ::pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

/// Minimal JSON Schema checker covering the subset used by the shipped
/// schemas: type (string or array of strings), properties, required,
/// additionalProperties (boolean), items, enum.
inline bool matches_type(const nlohmann::json& value, const std::string& t) {
  if (t == "object") return value.is_object();
  if (t == "array") return value.is_array();
  if (t == "string") return value.is_string();
  if (t == "boolean") return value.is_boolean();
  if (t == "integer") return value.is_number_integer();
  if (t == "number") return value.is_number();
  if (t == "null") return value.is_null();
  return false;
}

inline bool validate_schema(const nlohmann::json& value,
                            const nlohmann::json& schema,
                            std::string* why = nullptr) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (schema.contains("type")) {
    const auto& t = schema.at("type");
    bool ok = false;
    if (t.is_string()) {
      ok = matches_type(value, t.get<std::string>());
    } else {
      for (const auto& alt : t)
        if (matches_type(value, alt.get<std::string>())) ok = true;
    }
    if (!ok) return fail("type mismatch: " + value.dump());
  }
  if (schema.contains("enum")) {
    bool ok = false;
    for (const auto& alt : schema.at("enum"))
      if (alt == value) ok = true;
    if (!ok) return fail("enum mismatch: " + value.dump());
  }
  if (value.is_object()) {
    if (schema.contains("required"))
      for (const auto& key : schema.at("required"))
        if (!value.contains(key.get<std::string>()))
          return fail("missing required key " + key.get<std::string>());
    const bool closed = schema.contains("additionalProperties") &&
                        schema.at("additionalProperties").is_boolean() &&
                        !schema.at("additionalProperties").get<bool>();
    for (const auto& [key, sub] : value.items()) {
      if (schema.contains("properties") &&
          schema.at("properties").contains(key)) {
        if (!validate_schema(sub, schema.at("properties").at(key), why))
          return false;
      } else if (closed) {
        return fail("unexpected key " + key);
      }
    }
  }
  if (value.is_array() && schema.contains("items"))
    for (const auto& item : value)
      if (!validate_schema(item, schema.at("items"), why)) return false;
  if (why) why->clear();
  return true;
}

}  // namespace testutil
