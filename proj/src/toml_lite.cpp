#include "ndcp/toml_lite.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ndcp/error.hpp"

namespace ndcp::toml {

namespace {

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
  throw Error(ErrorCode::InvalidArgument,
              "config line " + std::to_string(line_no) + ": " + what);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

// Strips a trailing comment that is not inside a basic string.
std::string_view strip_comment(std::string_view s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
    if (s[i] == '#' && !in_string) return s.substr(0, i);
  }
  return s;
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

Value parse_scalar(std::string_view raw, std::size_t line_no) {
  Value v;
  if (raw.empty()) fail(line_no, "missing value");

  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"') fail(line_no, "unterminated string");
    v.kind = Value::Kind::String;
    const std::string_view body = raw.substr(1, raw.size() - 2);
    for (std::size_t i = 0; i < body.size(); ++i) {
      if (body[i] == '\\') {
        if (i + 1 >= body.size()) fail(line_no, "dangling escape");
        const char c = body[++i];
        switch (c) {
          case '"': v.string_value.push_back('"'); break;
          case '\\': v.string_value.push_back('\\'); break;
          case 'n': v.string_value.push_back('\n'); break;
          case 't': v.string_value.push_back('\t'); break;
          default: fail(line_no, std::string("unsupported escape \\") + c);
        }
      } else {
        v.string_value.push_back(body[i]);
      }
    }
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.kind = Value::Kind::Boolean;
    v.bool_value = raw == "true";
    return v;
  }

  const bool looks_float = raw.find('.') != std::string_view::npos ||
                           raw.find('e') != std::string_view::npos ||
                           raw.find('E') != std::string_view::npos;
  if (!looks_float) {
    std::int64_t iv = 0;
    auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), iv);
    if (ec == std::errc() && ptr == raw.data() + raw.size()) {
      v.kind = Value::Kind::Integer;
      v.int_value = iv;
      return v;
    }
  }
  double dv = 0.0;
  auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), dv);
  if (ec == std::errc() && ptr == raw.data() + raw.size()) {
    v.kind = Value::Kind::Float;
    v.float_value = dv;
    return v;
  }
  fail(line_no, "cannot parse value '" + std::string(raw) + "'");
}

}  // namespace

double Value::as_number() const {
  switch (kind) {
    case Kind::Integer: return static_cast<double>(int_value);
    case Kind::Float: return float_value;
    default:
      throw Error(ErrorCode::InvalidArgument, "config value is not a number");
  }
}

const Value& Table::at(const std::string& key) const {
  const auto it = entries.find(key);
  if (it == entries.end()) {
    throw Error(ErrorCode::InvalidArgument, "missing config key '" + key + "'");
  }
  return it->second;
}

std::string Table::get_string(const std::string& key, const std::string& fallback) const {
  if (!has(key)) return fallback;
  const Value& v = at(key);
  if (v.kind != Value::Kind::String) {
    throw Error(ErrorCode::InvalidArgument, "config key '" + key + "' must be a string");
  }
  return v.string_value;
}

std::int64_t Table::get_int(const std::string& key, std::int64_t fallback) const {
  if (!has(key)) return fallback;
  const Value& v = at(key);
  if (v.kind != Value::Kind::Integer) {
    throw Error(ErrorCode::InvalidArgument, "config key '" + key + "' must be an integer");
  }
  return v.int_value;
}

double Table::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  return at(key).as_number();
}

bool Table::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const Value& v = at(key);
  if (v.kind != Value::Kind::Boolean) {
    throw Error(ErrorCode::InvalidArgument, "config key '" + key + "' must be a boolean");
  }
  return v.bool_value;
}

std::string Table::require_string(const std::string& key) const {
  const Value& v = at(key);
  if (v.kind != Value::Kind::String) {
    throw Error(ErrorCode::InvalidArgument, "config key '" + key + "' must be a string");
  }
  return v.string_value;
}

const Table& Document::table_or_empty(const std::string& name) const {
  static const Table empty;
  const auto it = tables.find(name);
  return it == tables.end() ? empty : it->second;
}

Document parse(std::string_view text) {
  Document doc;
  Table* current = &doc.root;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    line = trim(strip_comment(line));
    if (line.empty()) continue;

    if (line.front() == '[') {
      const bool is_array = line.size() > 1 && line[1] == '[';
      const std::string_view closer = is_array ? "]]" : "]";
      if (line.substr(line.size() - closer.size()) != closer) {
        fail(line_no, "unterminated table header");
      }
      const std::string name(
          trim(line.substr(is_array ? 2 : 1, line.size() - 2 * (is_array ? 2 : 1))));
      if (!valid_key(name)) fail(line_no, "bad table name '" + name + "'");
      if (is_array) {
        doc.table_arrays[name].emplace_back();
        current = &doc.table_arrays[name].back();
      } else {
        if (doc.tables.count(name) > 0) fail(line_no, "duplicate table [" + name + "]");
        current = &doc.tables[name];
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (!valid_key(key)) fail(line_no, "bad key '" + key + "'");
    if (current->entries.count(key) > 0) fail(line_no, "duplicate key '" + key + "'");
    current->entries[key] = parse_scalar(trim(line.substr(eq + 1)), line_no);
  }
  return doc;
}

Document parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace ndcp::toml
