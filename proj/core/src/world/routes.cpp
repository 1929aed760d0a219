#include "stopnav/world/routes.hpp"

#include <algorithm>
#include <string>
#include <unordered_set>

#include "stopnav/error.hpp"
#include "stopnav/rng.hpp"

namespace stopnav::world {

void validate(const RouteConfig& config) {
  if (config.min_length < 2) throw Error(ErrorCode::invalid_argument, "route: min_length must be at least 2");
  if (config.max_length < config.min_length) {
    throw Error(ErrorCode::invalid_argument, "route: max_length must be >= min_length");
  }
  if (config.max_attempts == 0) throw Error(ErrorCode::invalid_argument, "route: max_attempts must be positive");
}

std::size_t count_route_key_points(const CityGraph& graph, std::span<const NodeIndex> route) {
  std::size_t count = 0;
  for (std::size_t i = 0; i + 1 < route.size(); ++i) count += graph.is_key_point(route[i]) ? 1 : 0;
  return count;
}

bool is_simple_path(const CityGraph& graph, std::span<const NodeIndex> route) {
  if (route.empty()) return false;
  std::unordered_set<NodeIndex> seen;
  for (std::size_t i = 0; i < route.size(); ++i) {
    if (route[i] >= graph.size() || !seen.insert(route[i]).second) return false;
    if (i > 0 && !graph.adjacent(route[i - 1], route[i])) return false;
  }
  return true;
}

std::vector<NodeIndex> sample_route(const CityGraph& graph, const RouteConfig& config, std::uint64_t seed) {
  validate(config);
  Rng rng(seed, "route");
  std::size_t short_walks = 0, few_key_points = 0;
  for (std::size_t attempt = 0; attempt < config.max_attempts; ++attempt) {
    const std::size_t target =
        config.min_length + static_cast<std::size_t>(rng.below(config.max_length - config.min_length + 1));
    const auto start = static_cast<NodeIndex>(rng.below(graph.size()));
    const auto first_edges = graph.out_edges(start);
    const NodeIndex second = first_edges[rng.below(first_edges.size())].to;

    std::vector<NodeIndex> route{start, second};
    std::unordered_set<NodeIndex> visited{start, second};
    double heading = *graph.heading(start, second);
    while (route.size() < target) {
      const NodeIndex here = route.back();
      std::vector<NodeIndex> options;
      if (graph.is_key_point(here)) {
        for (Action a : kDirections) {
          const NodeIndex to = heading_rule(graph, here, heading, a);
          if (!visited.contains(to) && std::find(options.begin(), options.end(), to) == options.end()) {
            options.push_back(to);
          }
        }
      } else {
        const NodeIndex to = heading_rule(graph, here, heading, Action::forward);
        if (!visited.contains(to)) options.push_back(to);
      }
      if (options.empty()) break;
      const NodeIndex next = options[rng.below(options.size())];
      heading = *graph.heading(here, next);
      route.push_back(next);
      visited.insert(next);
    }
    if (route.size() < config.min_length) {
      ++short_walks;
      continue;
    }
    if (count_route_key_points(graph, route) < config.min_key_points) {
      ++few_key_points;
      continue;
    }
    return route;
  }
  throw Error(ErrorCode::unsatisfiable,
              "sample_route: no route of " + std::to_string(config.min_length) + "-" + std::to_string(config.max_length) +
                  " nodes with >= " + std::to_string(config.min_key_points) + " key points after " +
                  std::to_string(config.max_attempts) + " attempts (" + std::to_string(short_walks) +
                  " walks too short, " + std::to_string(few_key_points) + " with too few key points)");
}

std::vector<Action> reference_actions(const CityGraph& graph, std::span<const NodeIndex> route) {
  if (route.empty()) throw Error(ErrorCode::invalid_argument, "reference_actions: empty route");
  std::vector<Action> actions;
  actions.reserve(route.size());
  if (route.size() > 1) {
    auto h = graph.heading(route[0], route[1]);
    if (!h) throw Error(ErrorCode::invalid_argument, "reference_actions: route hop 0 is not an edge");
    double heading = *h;
    for (std::size_t i = 0; i + 1 < route.size(); ++i) {
      auto a = action_between(graph, route[i], heading, route[i + 1]);
      if (!a) {
        throw Error(ErrorCode::invalid_argument,
                    "reference_actions: hop " + std::to_string(i) + " is not reachable by the heading rule");
      }
      actions.push_back(*a);
      heading = *graph.heading(route[i], route[i + 1]);
    }
  }
  actions.push_back(Action::stop);
  return actions;
}

std::vector<Action> key_point_turns(const CityGraph& graph, std::span<const NodeIndex> route) {
  const auto actions = reference_actions(graph, route);
  std::vector<Action> turns;
  for (std::size_t i = 0; i + 1 < route.size(); ++i) {
    if (graph.is_key_point(route[i])) turns.push_back(actions[i]);
  }
  return turns;
}

}  // namespace stopnav::world
