#include "stopnav/world/observation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stopnav/error.hpp"

namespace stopnav::world {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

void validate(const ObservationConfig& config) {
  if (config.grid < 3 || config.grid % 2 == 0) {
    throw Error(ErrorCode::invalid_argument, "observation: grid must be odd and at least 3");
  }
  if (!(config.view_range > 0.0)) throw Error(ErrorCode::invalid_argument, "observation: view_range must be positive");
  if (!(config.landmark_offset >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "observation: landmark_offset must be nonnegative");
  }
}

std::size_t channel_count(const ObservationConfig& config) noexcept {
  return kLandmarkKindCount + (config.render_roads ? 1 : 0);
}

numeric::Shape observation_shape(const ObservationConfig& config) {
  return {channel_count(config), config.grid, config.grid};
}

ObservationRenderer::ObservationRenderer(const CityGraph& graph, ObservationConfig config)
    : config_(config), channels_(channel_count(config)) {
  validate(config_);
  const double range = config_.view_range;
  const double cell = 2.0 * range / static_cast<double>(config_.grid);
  const std::size_t n = graph.size();

  // World-frame landmark and road sample positions.
  std::vector<Mark> world;
  for (const auto& node : graph.nodes()) {
    for (const auto& lm : node.landmarks) {
      world.push_back({node.position.x + config_.landmark_offset * std::sin(lm.bearing_deg * kDeg),
                       node.position.y + config_.landmark_offset * std::cos(lm.bearing_deg * kDeg),
                       static_cast<std::size_t>(lm.kind)});
    }
  }
  if (config_.render_roads) {
    const double spacing = cell / 3.0;
    for (NodeIndex a = 0; a < n; ++a) {
      for (const auto& e : graph.out_edges(a)) {
        if (e.to < a) continue;
        const Vec2 p = graph.node(a).position;
        const Vec2 q = graph.node(e.to).position;
        const double len = std::hypot(q.x - p.x, q.y - p.y);
        const auto samples = static_cast<std::size_t>(std::ceil(len / spacing));
        for (std::size_t s = 0; s <= samples; ++s) {
          const double u = samples == 0 ? 0.0 : static_cast<double>(s) / static_cast<double>(samples);
          world.push_back({p.x + u * (q.x - p.x), p.y + u * (q.y - p.y), kLandmarkKindCount});
        }
      }
    }
  }

  marks_.resize(n);
  for (NodeIndex v = 0; v < n; ++v) {
    const Vec2 c = graph.node(v).position;
    for (const auto& m : world) {
      const double dx = m.dx - c.x;
      const double dy = m.dy - c.y;
      if (dx * dx + dy * dy < range * range) marks_[v].push_back({dx, dy, m.channel});
    }
  }
}

void ObservationRenderer::render_into(NodeIndex node, double heading, std::span<double> out) const {
  const std::size_t g = config_.grid;
  if (out.size() != channels_ * g * g) throw Error(ErrorCode::shape_mismatch, "observation: output buffer size");
  std::fill(out.begin(), out.end(), 0.0);
  const double range = config_.view_range;
  const double cell = 2.0 * range / static_cast<double>(g);
  const double sh = std::sin(heading * kDeg);
  const double ch = std::cos(heading * kDeg);
  for (const auto& m : marks_.at(node)) {
    const double fwd = m.dx * sh + m.dy * ch;
    const double right = m.dx * ch - m.dy * sh;
    const auto row = static_cast<std::ptrdiff_t>(std::floor((range - fwd) / cell));
    const auto col = static_cast<std::ptrdiff_t>(std::floor((range + right) / cell));
    if (row < 0 || col < 0 || row >= static_cast<std::ptrdiff_t>(g) || col >= static_cast<std::ptrdiff_t>(g)) continue;
    out[(m.channel * g + static_cast<std::size_t>(row)) * g + static_cast<std::size_t>(col)] = 1.0;
  }
}

numeric::Array ObservationRenderer::render(NodeIndex node, double heading) const {
  numeric::Array out(shape());
  render_into(node, heading, out.data());
  return out;
}

}  // namespace stopnav::world
