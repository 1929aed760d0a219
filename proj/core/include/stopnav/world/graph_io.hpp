#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "stopnav/world/city_graph.hpp"

namespace stopnav::world {

/// Line-oriented text:
///   N <id> <x> <y> [<kind>:<bearing> ...]
///   E <src-id> <dst-id> <heading_deg>
/// Blank lines and text after '#' are ignored. Numbers are written in the
/// shortest form that reads back exactly.
std::string save_graph(const CityGraph& graph);

/// Throws parse_error with "line <n>: ..." for malformed lines, duplicate ids,
/// unknown edge endpoints and out-of-range headings, and for graph-level
/// defects (e.g. disconnection) naming the line of the offending node or edge.
CityGraph load_graph(std::string_view document, const GraphLimits& limits = {});

void write_graph(const std::filesystem::path& path, const CityGraph& graph);
CityGraph read_graph(const std::filesystem::path& path, const GraphLimits& limits = {});

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace stopnav::world
