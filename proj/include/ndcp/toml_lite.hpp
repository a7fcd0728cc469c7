#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ndcp::toml {

/// Minimal TOML reader covering what experiment configs need: comments,
/// [section] tables, [[section]] table arrays, and scalar values (basic
/// strings, integers, floats, booleans). Anything else is rejected with a
/// line-numbered error.
struct Value {
  enum class Kind { String, Integer, Float, Boolean };
  Kind kind = Kind::String;
  std::string string_value;
  std::int64_t int_value = 0;
  double float_value = 0.0;
  bool bool_value = false;

  double as_number() const;
};

struct Table {
  std::map<std::string, Value> entries;

  bool has(const std::string& key) const { return entries.count(key) > 0; }
  const Value& at(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string require_string(const std::string& key) const;
};

struct Document {
  Table root;
  std::map<std::string, Table> tables;
  std::map<std::string, std::vector<Table>> table_arrays;

  const Table& table_or_empty(const std::string& name) const;
};

Document parse(std::string_view text);
Document parse_file(const std::string& path);

}  // namespace ndcp::toml
