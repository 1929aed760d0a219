#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "stopnav/world/city_graph.hpp"
#include "stopnav/world/navigation.hpp"

namespace stopnav::world {

struct RouteConfig {
  std::size_t min_length = 6;   // nodes, including start and goal
  std::size_t max_length = 16;
  std::size_t min_key_points = 1;
  std::size_t max_attempts = 2000;
};

void validate(const RouteConfig& config);

/// Random simple path that the heading rule can follow: the agent starts on
/// the first edge, goes forward everywhere except at key points, where it
/// picks uniformly among the unvisited nodes reachable by forward, left or
/// right. Key points are counted at decision positions (all but the goal).
/// Throws unsatisfiable after `max_attempts` failed walks.
std::vector<NodeIndex> sample_route(const CityGraph& graph, const RouteConfig& config, std::uint64_t seed);

/// Key points among route[0 .. n-2].
std::size_t count_route_key_points(const CityGraph& graph, std::span<const NodeIndex> route);

bool is_simple_path(const CityGraph& graph, std::span<const NodeIndex> route);

/// Actions that replay `route` from its start (directions, then STOP).
/// Throws invalid_argument if some hop is not reachable by the heading rule.
std::vector<Action> reference_actions(const CityGraph& graph, std::span<const NodeIndex> route);

/// Relative direction taken at each decision key point along the route.
std::vector<Action> key_point_turns(const CityGraph& graph, std::span<const NodeIndex> route);

}  // namespace stopnav::world
