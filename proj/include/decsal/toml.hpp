#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace decsal {

/// Minimal TOML reader covering what experiment configs use: [section]
/// headers, bare keys, strings, integers, floats, booleans, and single-line
/// homogeneous arrays. Parse failures carry line numbers.
struct TomlValue {
  enum class Kind { kString, kInteger, kFloat, kBoolean, kArray };
  Kind kind = Kind::kString;
  std::string str;
  std::int64_t integer = 0;
  double number = 0.0;
  bool boolean = false;
  std::vector<TomlValue> array;

  std::string type_name() const;
};

// section -> key -> value; keys before any [section] land under "".
using TomlTable = std::map<std::string, std::map<std::string, TomlValue>>;

TomlTable parse_toml(const std::string& text);
TomlTable parse_toml_file(const std::filesystem::path& path);

}  // namespace decsal
