#pragma once

#include <cstddef>
#include <vector>

#include "stopnav/numeric/array.hpp"
#include "stopnav/world/city_graph.hpp"
#include "stopnav/world/navigation.hpp"

namespace stopnav::world {

struct ObservationConfig {
  std::size_t grid = 15;          // cells per side; odd so a center column exists
  double view_range = 50.0;       // meters, circular field around the agent
  double landmark_offset = 6.0;   // meters from the node along the landmark bearing
  bool render_roads = true;       // extra channel with street segments
};

void validate(const ObservationConfig& config);

/// Channels: one per landmark kind, then the road channel when enabled.
std::size_t channel_count(const ObservationConfig& config) noexcept;

/// Shape of a rendered observation: [channels, grid, grid].
numeric::Shape observation_shape(const ObservationConfig& config);

/// Egocentric occupancy grid. Row 0 is the far edge ahead, the center cell is
/// the agent; column index grows to the agent's right. A world point at
/// forward distance f and rightward distance r lands in
/// row floor((R - f) / w), column floor((R + r) / w), w = 2R / grid, when it
/// lies strictly within the view range R.
///
/// Rotating the heading clockwise by 90 degrees maps cell (r, c) to
/// (grid-1-c, r).
class ObservationRenderer {
 public:
  ObservationRenderer(const CityGraph& graph, ObservationConfig config);

  const ObservationConfig& config() const noexcept { return config_; }
  numeric::Shape shape() const { return observation_shape(config_); }

  numeric::Array render(NodeIndex node, double heading) const;
  numeric::Array render(const EpisodeState& state) const { return render(state.node, state.heading); }
  /// Writes into `out` (size channels*grid*grid), overwriting it.
  void render_into(NodeIndex node, double heading, std::span<double> out) const;

 private:
  struct Mark {
    double dx;
    double dy;
    std::size_t channel;
  };

  ObservationConfig config_;
  std::size_t channels_;
  std::vector<std::vector<Mark>> marks_;  // per node, world offsets within range
};

}  // namespace stopnav::world
