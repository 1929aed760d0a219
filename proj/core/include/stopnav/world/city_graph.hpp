#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace stopnav::world {

using NodeIndex = std::uint32_t;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Fixed catalog of renderable street objects; the instruction vocabulary
/// names them with the same words.
enum class LandmarkKind : std::uint8_t {
  hydrant,
  mailbox,
  awning,
  bench,
  scaffolding,
  tree,
  lamppost,
  bicycle,
};

inline constexpr std::size_t kLandmarkKindCount = 8;

std::string_view to_string(LandmarkKind kind) noexcept;
std::optional<LandmarkKind> parse_landmark_kind(std::string_view name) noexcept;
const std::array<LandmarkKind, kLandmarkKindCount>& all_landmark_kinds() noexcept;

/// A street object near a node; `bearing_deg` is the world-frame direction
/// from the node to the object, clockwise from +y.
struct Landmark {
  LandmarkKind kind = LandmarkKind::hydrant;
  double bearing_deg = 0.0;
  friend bool operator==(const Landmark&, const Landmark&) = default;
};

struct NodeRecord {
  std::int64_t id = 0;
  Vec2 position;
  std::vector<Landmark> landmarks;
  friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

/// Directed edge given by node indices (positions in the node list).
struct Edge {
  NodeIndex from = 0;
  NodeIndex to = 0;
  double heading_deg = 0.0;
};

struct OutEdge {
  NodeIndex to = 0;
  double heading_deg = 0.0;
  friend bool operator==(const OutEdge&, const OutEdge&) = default;
};

struct GraphLimits {
  std::size_t max_degree = 4;
};

/// First invariant violation found in a candidate graph. `node`/`edge` index
/// into the inputs so file loaders can point at the offending line.
struct GraphDefect {
  std::string message;
  std::optional<std::size_t> node;
  std::optional<std::size_t> edge;
};

std::optional<GraphDefect> find_defect(std::span<const NodeRecord> nodes, std::span<const Edge> edges,
                                       const GraphLimits& limits);

/// Heading of the straight segment a -> b in degrees [0, 360), clockwise from +y.
double heading_between(Vec2 a, Vec2 b) noexcept;

/// Reverse of a heading, in [0, 360).
double reverse_heading(double heading_deg) noexcept;

/// Immutable navigation graph. Invariants (checked on construction):
/// connected, at least two nodes, no self-loops, no parallel edges, every edge
/// has a reverse edge whose heading differs by 180 degrees, headings in
/// [0, 360), and every degree in [1, max_degree].
class CityGraph {
 public:
  static CityGraph build(std::vector<NodeRecord> nodes, std::span<const Edge> edges, const GraphLimits& limits = {});

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t directed_edge_count() const noexcept;

  const NodeRecord& node(NodeIndex v) const { return nodes_.at(v); }
  const std::vector<NodeRecord>& nodes() const noexcept { return nodes_; }
  std::span<const OutEdge> out_edges(NodeIndex v) const { return adjacency_.at(v); }

  std::size_t degree(NodeIndex v) const { return adjacency_.at(v).size(); }
  /// Intersections: nodes with more than two neighbors.
  bool is_key_point(NodeIndex v) const { return degree(v) > 2; }
  bool adjacent(NodeIndex a, NodeIndex b) const;
  std::optional<double> heading(NodeIndex from, NodeIndex to) const;
  std::optional<NodeIndex> index_of(std::int64_t id) const;

  /// Minimal hop count; served from an all-pairs table built on first use
  /// (breadth-first search from every node).
  std::size_t hops(NodeIndex a, NodeIndex b) const;

  friend bool operator==(const CityGraph& a, const CityGraph& b) {
    return a.nodes_ == b.nodes_ && a.adjacency_ == b.adjacency_;
  }

 private:
  struct DistanceCache;

  std::vector<NodeRecord> nodes_;
  std::vector<std::vector<OutEdge>> adjacency_;  // sorted by destination
  std::unordered_map<std::int64_t, NodeIndex> by_id_;
  std::shared_ptr<DistanceCache> distances_;
};

/// Nodes with undirected degree > 2, ascending.
std::vector<NodeIndex> key_points(const CityGraph& graph);

std::size_t shortest_path_len(const CityGraph& graph, NodeIndex a, NodeIndex b);

}  // namespace stopnav::world
