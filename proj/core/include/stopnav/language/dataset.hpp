#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace stopnav::language {

/// One navigation task: route node ids, instruction text, generator seed.
struct DatasetRecord {
  std::vector<std::int64_t> route;
  std::string text;
  std::uint64_t seed = 0;
  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

/// `id,id,...<TAB>text<TAB>seed`
std::string format_record(const DatasetRecord& record);
DatasetRecord parse_record(std::string_view line, std::size_t line_no = 0);

std::string save_dataset(const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> load_dataset(std::string_view document);

void write_dataset(const std::filesystem::path& path, const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path);

}  // namespace stopnav::language
