#include "decsal/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "decsal/errors.hpp"
#include "json.hpp"

namespace decsal {

std::size_t Dataset::class_count() const {
  if (records.empty()) throw DataError("dataset: empty");
  int max_label = 0;
  std::set<int> seen;
  for (const auto& r : records) {
    if (r.label < 0) throw DataError("dataset: negative label " + std::to_string(r.label));
    max_label = std::max(max_label, r.label);
    seen.insert(r.label);
  }
  std::string missing;
  for (int c = 0; c <= max_label; ++c) {
    if (!seen.count(c)) missing += (missing.empty() ? "" : ", ") + std::to_string(c);
  }
  if (!missing.empty()) throw DataError("dataset: labels not dense, missing " + missing);
  return static_cast<std::size_t>(max_label) + 1;
}

std::vector<std::string> Dataset::texts() const {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.text);
  return out;
}

DataFormat data_format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".jsonl") return DataFormat::kJsonl;
  if (ext == ".csv") return DataFormat::kCsv;
  throw DataError("dataset: cannot infer format from '" + path.string() +
                  "' (expected .jsonl or .csv)");
}

namespace {

int parse_label(const std::string& raw, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw DataError("dataset: line " + std::to_string(line_no) + ": label '" + raw +
                    "' is not an integer");
  }
}

Dataset ingest_jsonl(std::istream& in) {
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("dataset: line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!row.contains("text") || !row["text"].is_string()) {
      throw DataError("dataset: line " + std::to_string(line_no) + ": missing string 'text'");
    }
    if (!row.contains("label") || !row["label"].is_number_integer()) {
      throw DataError("dataset: line " + std::to_string(line_no) + ": missing integer 'label'");
    }
    data.records.push_back({row["text"].get<std::string>(), row["label"].get<int>()});
  }
  return data;
}

// RFC-4180 quoting: quoted fields may contain commas, and "" inside quotes
// escapes a quote. Embedded newlines are not supported by this reader.
std::vector<std::string> split_csv_row(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      if (!cur.empty()) {
        throw DataError("dataset: line " + std::to_string(line_no) +
                        ": quote inside unquoted field");
      }
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) {
    throw DataError("dataset: line " + std::to_string(line_no) + ": unterminated quote");
  }
  fields.push_back(std::move(cur));
  return fields;
}

Dataset ingest_csv(std::istream& in) {
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError("dataset: empty csv");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv_row(line, line_no);
  std::ptrdiff_t text_col = -1, label_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "text") text_col = static_cast<std::ptrdiff_t>(i);
    if (header[i] == "label") label_col = static_cast<std::ptrdiff_t>(i);
  }
  if (text_col < 0 || label_col < 0) {
    throw DataError("dataset: csv header must include 'text' and 'label'");
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_row(line, line_no);
    if (fields.size() != header.size()) {
      throw DataError("dataset: line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    data.records.push_back({fields[static_cast<std::size_t>(text_col)],
                            parse_label(fields[static_cast<std::size_t>(label_col)], line_no)});
  }
  return data;
}

}  // namespace

Dataset ingest(const std::filesystem::path& path, DataFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("dataset: cannot read " + path.string());
  Dataset data = format == DataFormat::kJsonl ? ingest_jsonl(in) : ingest_csv(in);
  if (data.records.empty()) throw DataError("dataset: no records in " + path.string());
  return data;
}

Dataset ingest(const std::filesystem::path& path) {
  return ingest(path, data_format_from_path(path));
}

void write_jsonl(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("dataset: cannot write " + path.string());
  for (const auto& r : data.records) {
    nlohmann::ordered_json row{{"text", r.text}, {"label", r.label}};
    out << row.dump() << "\n";
  }
}

}  // namespace decsal
