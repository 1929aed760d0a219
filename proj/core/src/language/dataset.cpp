#include "stopnav/language/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "stopnav/error.hpp"

namespace stopnav::language {

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::parse_error, "dataset line " + std::to_string(line) + ": " + what);
}

template <class T>
T parse_int(std::string_view s, std::size_t line, const char* what) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) {
    fail(line, std::string("bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::string format_record(const DatasetRecord& record) {
  if (record.text.find_first_of("\t\n\r") != std::string::npos) {
    throw Error(ErrorCode::invalid_argument, "dataset: instruction text contains a tab or newline");
  }
  std::string out;
  for (std::size_t i = 0; i < record.route.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(record.route[i]);
  }
  out += '\t';
  out += record.text;
  out += '\t';
  out += std::to_string(record.seed);
  return out;
}

DatasetRecord parse_record(std::string_view line, std::size_t line_no) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto t1 = line.find('\t');
  const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
  if (t2 == std::string_view::npos || line.find('\t', t2 + 1) != std::string_view::npos) {
    fail(line_no, "expected 3 tab-separated fields");
  }
  DatasetRecord rec;
  std::string_view ids = line.substr(0, t1);
  std::size_t pos = 0;
  while (pos <= ids.size()) {
    std::size_t end = ids.find(',', pos);
    if (end == std::string_view::npos) end = ids.size();
    rec.route.push_back(parse_int<std::int64_t>(ids.substr(pos, end - pos), line_no, "node id"));
    pos = end + 1;
  }
  rec.text = std::string(line.substr(t1 + 1, t2 - t1 - 1));
  if (rec.text.empty()) fail(line_no, "empty instruction text");
  rec.seed = parse_int<std::uint64_t>(line.substr(t2 + 1), line_no, "seed");
  return rec;
}

std::string save_dataset(const std::vector<DatasetRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += format_record(r);
    out += '\n';
  }
  return out;
}

std::vector<DatasetRecord> load_dataset(std::string_view document) {
  std::vector<DatasetRecord> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < document.size()) {
    std::size_t end = document.find('\n', pos);
    if (end == std::string_view::npos) end = document.size();
    ++line_no;
    const auto line = document.substr(pos, end - pos);
    if (!line.empty() && line != "\r") out.push_back(parse_record(line, line_no));
    pos = end + 1;
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const std::vector<DatasetRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + path.string() + " for writing");
  out << save_dataset(records);
  if (!out) throw Error(ErrorCode::io_error, "write failed: " + path.string());
}

std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::not_found, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_dataset(buf.str());
}

}  // namespace stopnav::language
