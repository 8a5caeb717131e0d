#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace decsal {

struct DataRecord {
  std::string text;
  int label = 0;
};

struct Dataset {
  std::vector<DataRecord> records;

  std::size_t size() const { return records.size(); }
  // Highest label + 1; throws DataError listing any gap in 0..max.
  std::size_t class_count() const;
  std::vector<std::string> texts() const;
};

enum class DataFormat { kJsonl, kCsv };
DataFormat data_format_from_path(const std::filesystem::path& path);

// "text" and "label" fields are required; malformed rows report their line
// number. CSV follows RFC-4180 quoting.
Dataset ingest(const std::filesystem::path& path, DataFormat format);
Dataset ingest(const std::filesystem::path& path);

void write_jsonl(const Dataset& data, const std::filesystem::path& path);

}  // namespace decsal
