#include "stopnav/world/navigation.hpp"

#include <cmath>
#include <limits>

#include "stopnav/error.hpp"

namespace stopnav::world {

std::string_view to_string(Action a) noexcept {
  switch (a) {
    case Action::forward: return "FORWARD";
    case Action::left: return "LEFT";
    case Action::right: return "RIGHT";
    case Action::stop: return "STOP";
  }
  return "?";
}

std::optional<Action> parse_action(std::string_view name) noexcept {
  for (Action a : {Action::forward, Action::left, Action::right, Action::stop}) {
    if (to_string(a) == name) return a;
  }
  return std::nullopt;
}

double relative_heading(double edge_heading, double incoming) noexcept {
  double r = std::fmod(edge_heading - incoming, 360.0);
  if (r <= -180.0) r += 360.0;
  if (r > 180.0) r -= 360.0;
  return r;
}

std::optional<Action> heading_bin(double relative) noexcept {
  if (relative >= -45.0 && relative <= 45.0) return Action::forward;
  if (relative > -135.0 && relative < -45.0) return Action::left;
  if (relative > 45.0 && relative < 135.0) return Action::right;
  return std::nullopt;
}

NodeIndex heading_rule(const CityGraph& graph, NodeIndex node, double incoming, Action direction) {
  if (!is_direction(direction)) throw Error(ErrorCode::invalid_argument, "heading_rule: STOP is not a direction");
  const double center = direction == Action::forward ? 0.0 : direction == Action::left ? -90.0 : 90.0;
  std::optional<NodeIndex> in_bin;
  double in_bin_gap = std::numeric_limits<double>::infinity();
  NodeIndex fallback = 0;
  double fallback_abs = std::numeric_limits<double>::infinity();
  for (const auto& e : graph.out_edges(node)) {
    const double rel = relative_heading(e.heading_deg, incoming);
    if (heading_bin(rel) == direction && std::fabs(rel - center) < in_bin_gap) {
      in_bin = e.to;
      in_bin_gap = std::fabs(rel - center);
    }
    if (std::fabs(rel) < fallback_abs) {
      fallback = e.to;
      fallback_abs = std::fabs(rel);
    }
  }
  return in_bin ? *in_bin : fallback;
}

std::optional<Action> action_between(const CityGraph& graph, NodeIndex node, double incoming, NodeIndex next) {
  // The edge's own bin names the turn; other actions reach it only by fallback.
  if (auto h = graph.heading(node, next)) {
    if (auto bin = heading_bin(relative_heading(*h, incoming))) {
      if (heading_rule(graph, node, incoming, *bin) == next) return bin;
    }
  }
  for (Action a : kDirections) {
    if (heading_rule(graph, node, incoming, a) == next) return a;
  }
  return std::nullopt;
}

EpisodeState start_episode(const CityGraph& graph, std::vector<NodeIndex> route, std::size_t t_max) {
  return start_episode(graph, std::make_shared<const std::vector<NodeIndex>>(std::move(route)), t_max);
}

EpisodeState start_episode(const CityGraph& graph, std::shared_ptr<const std::vector<NodeIndex>> route,
                           std::size_t t_max) {
  if (!route || route->empty()) throw Error(ErrorCode::invalid_argument, "start_episode: empty route");
  for (NodeIndex v : *route) {
    if (v >= graph.size()) throw Error(ErrorCode::invalid_argument, "start_episode: route node out of range");
  }
  if (t_max == 0) throw Error(ErrorCode::invalid_argument, "start_episode: t_max must be positive");
  EpisodeState s;
  s.graph = &graph;
  s.route = std::move(route);
  s.node = s.route->front();
  s.t_max = t_max;
  if (s.route->size() > 1) {
    auto h = graph.heading((*s.route)[0], (*s.route)[1]);
    if (!h) throw Error(ErrorCode::invalid_argument, "start_episode: first route edge is not in the graph");
    s.heading = *h;
  }
  return s;
}

EpisodeState step(const EpisodeState& state, Action action) {
  if (state.done) throw Error(ErrorCode::invalid_argument, "step: episode already done");
  EpisodeState next = state;
  if (action == Action::stop) {
    next.done = true;
    return next;
  }
  const NodeIndex to = heading_rule(*state.graph, state.node, state.heading, action);
  next.heading = *state.graph->heading(state.node, to);
  next.node = to;
  next.t = state.t + 1;
  if (next.t >= next.t_max) next.done = true;
  return next;
}

}  // namespace stopnav::world
