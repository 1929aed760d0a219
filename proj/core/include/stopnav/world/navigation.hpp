#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "stopnav/world/city_graph.hpp"

namespace stopnav::world {

/// The first three are the directions, in the order the direction head uses.
enum class Action : std::uint8_t { forward = 0, left = 1, right = 2, stop = 3 };

inline constexpr std::size_t kDirectionCount = 3;
inline constexpr std::size_t kActionCount = 4;
inline constexpr std::array<Action, kDirectionCount> kDirections = {Action::forward, Action::left, Action::right};

std::string_view to_string(Action a) noexcept;
std::optional<Action> parse_action(std::string_view name) noexcept;
inline bool is_direction(Action a) noexcept { return a != Action::stop; }

/// `edge_heading - incoming` folded into (-180, 180].
double relative_heading(double edge_heading, double incoming) noexcept;

/// Bin of a relative heading: forward [-45, 45], left (-135, -45),
/// right (45, 135); anything else is behind.
std::optional<Action> heading_bin(double relative) noexcept;

/// Destination of a directional action from `node` when facing `incoming`.
/// The candidate closest to the bin's center direction (0, -90, +90) wins;
/// an empty bin falls back to the edge with the smallest absolute relative
/// heading. Ties go to the lower node index.
NodeIndex heading_rule(const CityGraph& graph, NodeIndex node, double incoming, Action direction);

/// The direction that takes the agent to `next`: the bin of the edge's
/// relative heading when its heading rule picks that edge, else the first of
/// forward, left, right that reaches it by fallback; nullopt if none does.
std::optional<Action> action_between(const CityGraph& graph, NodeIndex node, double incoming, NodeIndex next);

struct EpisodeState {
  const CityGraph* graph = nullptr;
  std::shared_ptr<const std::vector<NodeIndex>> route;
  NodeIndex node = 0;
  double heading = 0.0;
  std::size_t t = 0;
  std::size_t t_max = 40;
  bool done = false;

  NodeIndex goal() const { return route->back(); }
  NodeIndex start() const { return route->front(); }
};

/// Fresh episode at the start of `route`, facing along its first edge. A
/// single-node route faces 0 degrees.
EpisodeState start_episode(const CityGraph& graph, std::vector<NodeIndex> route, std::size_t t_max = 40);
EpisodeState start_episode(const CityGraph& graph, std::shared_ptr<const std::vector<NodeIndex>> route,
                           std::size_t t_max = 40);

/// STOP ends the episode in place. A direction moves along the edge chosen
/// by the heading rule and advances t; reaching t_max ends the episode.
/// Throws invalid_argument when the episode is already done.
EpisodeState step(const EpisodeState& state, Action action);

}  // namespace stopnav::world
