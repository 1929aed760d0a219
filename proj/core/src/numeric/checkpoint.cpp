#include "stopnav/numeric/checkpoint.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "stopnav/error.hpp"

namespace stopnav::numeric {

using nlohmann::json;

std::string save_checkpoint(const ParamStore& params) {
  json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["step"] = params.step();
  json list = json::array();
  for (const auto& e : params.entries()) {
    list.push_back({{"name", e.name},
                    {"shape", e.value.shape()},
                    {"value", e.value.values()},
                    {"first_moment", e.first_moment.values()},
                    {"second_moment", e.second_moment.values()}});
  }
  doc["parameters"] = std::move(list);
  return doc.dump(1);
}

ParamStore load_checkpoint(const std::string& document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("checkpoint: ") + e.what());
  }
  try {
    if (doc.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw Error(ErrorCode::parse_error, "checkpoint: unsupported format_version " + doc.at("format_version").dump());
    }
    ParamStore store;
    for (const auto& p : doc.at("parameters")) {
      const auto name = p.at("name").get<std::string>();
      const auto shape = p.at("shape").get<Shape>();
      const auto idx = store.add(name, Array(shape, p.at("value").get<std::vector<double>>()));
      auto& e = store.entry(idx);
      e.first_moment = Array(shape, p.at("first_moment").get<std::vector<double>>());
      e.second_moment = Array(shape, p.at("second_moment").get<std::vector<double>>());
    }
    store.set_step(doc.at("step").get<std::uint64_t>());
    return store;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("checkpoint: ") + e.what());
  }
}

void write_checkpoint(const ParamStore& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write checkpoint " + path.string());
  out << save_checkpoint(params) << '\n';
  if (!out) throw Error(ErrorCode::io_error, "failed writing checkpoint " + path.string());
}

ParamStore read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::not_found, "cannot open checkpoint " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_checkpoint(buffer.str());
}

}  // namespace stopnav::numeric
