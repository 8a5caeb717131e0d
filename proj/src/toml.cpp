#include "decsal/toml.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "decsal/errors.hpp"

namespace decsal {

std::string TomlValue::type_name() const {
  switch (kind) {
    case Kind::kString: return "string";
    case Kind::kInteger: return "integer";
    case Kind::kFloat: return "float";
    case Kind::kBoolean: return "boolean";
    case Kind::kArray: return "array";
  }
  return "?";
}

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw ConfigError("config: line " + std::to_string(line) + ": " + what);
}

struct Cursor {
  const std::string& s;
  std::size_t i = 0;
  std::size_t line;

  bool done() const { return i >= s.size(); }
  char peek() const { return s[i]; }
  void skip_ws() {
    while (!done() && (s[i] == ' ' || s[i] == '\t')) ++i;
  }
};

bool is_bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

TomlValue parse_value(Cursor& cur);

TomlValue parse_string(Cursor& cur) {
  TomlValue v;
  v.kind = TomlValue::Kind::kString;
  ++cur.i;  // opening quote
  while (!cur.done() && cur.peek() != '"') {
    char c = cur.s[cur.i++];
    if (c == '\\') {
      if (cur.done()) fail(cur.line, "dangling escape in string");
      const char esc = cur.s[cur.i++];
      switch (esc) {
        case 'n': c = '\n'; break;
        case 't': c = '\t'; break;
        case 'r': c = '\r'; break;
        case '"': c = '"'; break;
        case '\\': c = '\\'; break;
        default: fail(cur.line, std::string("unsupported escape \\") + esc);
      }
    }
    v.str.push_back(c);
  }
  if (cur.done()) fail(cur.line, "unterminated string");
  ++cur.i;  // closing quote
  return v;
}

TomlValue parse_array(Cursor& cur) {
  TomlValue v;
  v.kind = TomlValue::Kind::kArray;
  ++cur.i;  // '['
  cur.skip_ws();
  if (!cur.done() && cur.peek() == ']') {
    ++cur.i;
    return v;
  }
  for (;;) {
    cur.skip_ws();
    v.array.push_back(parse_value(cur));
    cur.skip_ws();
    if (cur.done()) fail(cur.line, "unterminated array");
    const char c = cur.s[cur.i++];
    if (c == ']') break;
    if (c != ',') fail(cur.line, "expected ',' or ']' in array");
  }
  for (std::size_t k = 1; k < v.array.size(); ++k) {
    auto kind_a = v.array[k].kind, kind_b = v.array[0].kind;
    const bool numeric_a = kind_a == TomlValue::Kind::kInteger || kind_a == TomlValue::Kind::kFloat;
    const bool numeric_b = kind_b == TomlValue::Kind::kInteger || kind_b == TomlValue::Kind::kFloat;
    if (kind_a != kind_b && !(numeric_a && numeric_b)) {
      fail(cur.line, "arrays must be homogeneous");
    }
  }
  return v;
}

TomlValue parse_scalar(Cursor& cur) {
  std::size_t end = cur.i;
  while (end < cur.s.size() && cur.s[end] != ',' && cur.s[end] != ']' && cur.s[end] != '#' &&
         cur.s[end] != ' ' && cur.s[end] != '\t') {
    ++end;
  }
  std::string tok = cur.s.substr(cur.i, end - cur.i);
  if (tok.empty()) fail(cur.line, "expected a value");
  cur.i = end;
  TomlValue v;
  if (tok == "true" || tok == "false") {
    v.kind = TomlValue::Kind::kBoolean;
    v.boolean = tok == "true";
    return v;
  }
  const bool looks_float = tok.find('.') != std::string::npos ||
                           tok.find('e') != std::string::npos ||
                           tok.find('E') != std::string::npos;
  if (!looks_float) {
    std::int64_t iv = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), iv);
    if (ec == std::errc() && p == tok.data() + tok.size()) {
      v.kind = TomlValue::Kind::kInteger;
      v.integer = iv;
      return v;
    }
  }
  try {
    std::size_t used = 0;
    const double dv = std::stod(tok, &used);
    if (used == tok.size()) {
      v.kind = TomlValue::Kind::kFloat;
      v.number = dv;
      return v;
    }
  } catch (const std::exception&) {
  }
  fail(cur.line, "cannot parse value '" + tok + "'");
}

TomlValue parse_value(Cursor& cur) {
  if (cur.done()) fail(cur.line, "expected a value");
  const char c = cur.peek();
  if (c == '"') return parse_string(cur);
  if (c == '[') return parse_array(cur);
  return parse_scalar(cur);
}

}  // namespace

TomlTable parse_toml(const std::string& text) {
  TomlTable table;
  std::string section;
  table[section];
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    Cursor cur{line, 0, line_no};
    cur.skip_ws();
    if (cur.done() || cur.peek() == '#') continue;
    if (cur.peek() == '[') {
      ++cur.i;
      std::string name;
      while (!cur.done() && (is_bare_key_char(cur.peek()) || cur.peek() == '.')) {
        name.push_back(cur.s[cur.i++]);
      }
      if (cur.done() || cur.peek() != ']' || name.empty()) fail(line_no, "bad section header");
      ++cur.i;
      cur.skip_ws();
      if (!cur.done() && cur.peek() != '#') fail(line_no, "trailing text after section header");
      section = name;
      if (table.count(section)) fail(line_no, "duplicate section [" + section + "]");
      table[section];
      continue;
    }
    std::string key;
    while (!cur.done() && is_bare_key_char(cur.peek())) key.push_back(cur.s[cur.i++]);
    if (key.empty()) fail(line_no, "expected a key");
    cur.skip_ws();
    if (cur.done() || cur.peek() != '=') fail(line_no, "expected '=' after key '" + key + "'");
    ++cur.i;
    cur.skip_ws();
    TomlValue value = parse_value(cur);
    cur.skip_ws();
    if (!cur.done() && cur.peek() != '#') fail(line_no, "trailing text after value");
    if (table[section].count(key)) fail(line_no, "duplicate key '" + key + "'");
    table[section].emplace(std::move(key), std::move(value));
  }
  return table;
}

TomlTable parse_toml_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_toml(buf.str());
}

}  // namespace decsal
