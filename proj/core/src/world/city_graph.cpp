#include "stopnav/world/city_graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

#include "stopnav/error.hpp"

namespace stopnav::world {

namespace {

constexpr std::array<LandmarkKind, kLandmarkKindCount> kKinds = {
    LandmarkKind::hydrant,     LandmarkKind::mailbox, LandmarkKind::awning,   LandmarkKind::bench,
    LandmarkKind::scaffolding, LandmarkKind::tree,    LandmarkKind::lamppost, LandmarkKind::bicycle,
};

constexpr double kHeadingTolerance = 1e-6;

double angular_gap(double a, double b) {
  const double d = std::fabs(std::fmod(a - b, 360.0));
  return std::min(d, 360.0 - d);
}

}  // namespace

std::string_view to_string(LandmarkKind kind) noexcept {
  switch (kind) {
    case LandmarkKind::hydrant: return "hydrant";
    case LandmarkKind::mailbox: return "mailbox";
    case LandmarkKind::awning: return "awning";
    case LandmarkKind::bench: return "bench";
    case LandmarkKind::scaffolding: return "scaffolding";
    case LandmarkKind::tree: return "tree";
    case LandmarkKind::lamppost: return "lamppost";
    case LandmarkKind::bicycle: return "bicycle";
  }
  return "unknown";
}

std::optional<LandmarkKind> parse_landmark_kind(std::string_view name) noexcept {
  for (auto k : kKinds) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

const std::array<LandmarkKind, kLandmarkKindCount>& all_landmark_kinds() noexcept { return kKinds; }

double heading_between(Vec2 a, Vec2 b) noexcept {
  double h = std::atan2(b.x - a.x, b.y - a.y) * 180.0 / std::numbers::pi;
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  return h;
}

double reverse_heading(double heading_deg) noexcept {
  double r = heading_deg + 180.0;
  if (r >= 360.0) r -= 360.0;
  return r;
}

std::optional<GraphDefect> find_defect(std::span<const NodeRecord> nodes, std::span<const Edge> edges,
                                       const GraphLimits& limits) {
  if (nodes.size() < 2) return GraphDefect{"graph needs at least two nodes", std::nullopt, std::nullopt};

  std::unordered_map<std::int64_t, std::size_t> ids;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!ids.emplace(nodes[i].id, i).second) {
      return GraphDefect{"duplicate node id " + std::to_string(nodes[i].id), i, std::nullopt};
    }
    if (!std::isfinite(nodes[i].position.x) || !std::isfinite(nodes[i].position.y)) {
      return GraphDefect{"non-finite position for node " + std::to_string(nodes[i].id), i, std::nullopt};
    }
    for (const auto& lm : nodes[i].landmarks) {
      if (!(lm.bearing_deg >= 0.0 && lm.bearing_deg < 360.0)) {
        return GraphDefect{"landmark bearing out of [0, 360) at node " + std::to_string(nodes[i].id), i, std::nullopt};
      }
    }
  }

  std::map<std::pair<NodeIndex, NodeIndex>, std::size_t> seen;
  std::vector<std::size_t> degree(nodes.size(), 0);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& edge = edges[e];
    if (edge.from >= nodes.size() || edge.to >= nodes.size()) {
      return GraphDefect{"edge endpoint out of range", std::nullopt, e};
    }
    const std::string label = std::to_string(nodes[edge.from].id) + " -> " + std::to_string(nodes[edge.to].id);
    if (edge.from == edge.to) return GraphDefect{"self-loop at node " + std::to_string(nodes[edge.from].id), std::nullopt, e};
    if (!(edge.heading_deg >= 0.0 && edge.heading_deg < 360.0)) {
      return GraphDefect{"heading out of [0, 360) on edge " + label, std::nullopt, e};
    }
    if (!seen.emplace(std::pair{edge.from, edge.to}, e).second) {
      return GraphDefect{"parallel edge " + label, std::nullopt, e};
    }
    ++degree[edge.from];
  }
  for (const auto& [key, e] : seen) {
    auto rev = seen.find({key.second, key.first});
    const std::string label = std::to_string(nodes[key.first].id) + " -> " + std::to_string(nodes[key.second].id);
    if (rev == seen.end()) return GraphDefect{"edge " + label + " has no reverse edge", std::nullopt, e};
    if (angular_gap(edges[e].heading_deg, reverse_heading(edges[rev->second].heading_deg)) > kHeadingTolerance) {
      return GraphDefect{"edge " + label + " heading is not the reverse of its twin", std::nullopt, e};
    }
  }
  for (std::size_t v = 0; v < nodes.size(); ++v) {
    if (degree[v] == 0 || degree[v] > limits.max_degree) {
      return GraphDefect{"node " + std::to_string(nodes[v].id) + " has degree " + std::to_string(degree[v]) +
                             " outside [1, " + std::to_string(limits.max_degree) + "]",
                         v, std::nullopt};
    }
  }

  std::vector<std::vector<NodeIndex>> adj(nodes.size());
  for (const auto& edge : edges) adj[edge.from].push_back(edge.to);
  std::vector<bool> reached(nodes.size(), false);
  std::deque<NodeIndex> queue{0};
  reached[0] = true;
  while (!queue.empty()) {
    const NodeIndex v = queue.front();
    queue.pop_front();
    for (NodeIndex w : adj[v]) {
      if (!reached[w]) {
        reached[w] = true;
        queue.push_back(w);
      }
    }
  }
  for (std::size_t v = 0; v < nodes.size(); ++v) {
    if (!reached[v]) {
      return GraphDefect{"graph is disconnected: node " + std::to_string(nodes[v].id) + " is unreachable from node " +
                             std::to_string(nodes[0].id),
                         v, std::nullopt};
    }
  }
  return std::nullopt;
}

struct CityGraph::DistanceCache {
  std::once_flag once;
  std::vector<std::uint16_t> table;  // row-major n x n
};

CityGraph CityGraph::build(std::vector<NodeRecord> nodes, std::span<const Edge> edges, const GraphLimits& limits) {
  if (auto defect = find_defect(nodes, edges, limits)) throw Error(ErrorCode::invalid_argument, "CityGraph: " + defect->message);
  CityGraph g;
  g.adjacency_.resize(nodes.size());
  for (const auto& e : edges) g.adjacency_[e.from].push_back(OutEdge{e.to, e.heading_deg});
  for (auto& list : g.adjacency_) {
    std::sort(list.begin(), list.end(), [](const OutEdge& a, const OutEdge& b) { return a.to < b.to; });
  }
  for (NodeIndex i = 0; i < nodes.size(); ++i) g.by_id_.emplace(nodes[i].id, i);
  g.nodes_ = std::move(nodes);
  g.distances_ = std::make_shared<DistanceCache>();
  return g;
}

std::size_t CityGraph::directed_edge_count() const noexcept {
  std::size_t total = 0;
  for (const auto& list : adjacency_) total += list.size();
  return total;
}

bool CityGraph::adjacent(NodeIndex a, NodeIndex b) const { return heading(a, b).has_value(); }

std::optional<double> CityGraph::heading(NodeIndex from, NodeIndex to) const {
  const auto& list = adjacency_.at(from);
  auto it = std::lower_bound(list.begin(), list.end(), to, [](const OutEdge& e, NodeIndex t) { return e.to < t; });
  if (it == list.end() || it->to != to) return std::nullopt;
  return it->heading_deg;
}

std::optional<NodeIndex> CityGraph::index_of(std::int64_t id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::size_t CityGraph::hops(NodeIndex a, NodeIndex b) const {
  const std::size_t n = nodes_.size();
  if (a >= n || b >= n) throw Error(ErrorCode::invalid_argument, "hops: node index out of range");
  std::call_once(distances_->once, [&] {
    if (n > std::numeric_limits<std::uint16_t>::max()) {
      throw Error(ErrorCode::invalid_argument, "hops: graph too large for the all-pairs table");
    }
    auto& table = distances_->table;
    table.assign(n * n, std::numeric_limits<std::uint16_t>::max());
    std::vector<NodeIndex> queue(n);
    for (NodeIndex s = 0; s < n; ++s) {
      std::uint16_t* row = table.data() + static_cast<std::size_t>(s) * n;
      row[s] = 0;
      std::size_t head = 0, tail = 0;
      queue[tail++] = s;
      while (head < tail) {
        const NodeIndex v = queue[head++];
        for (const auto& e : adjacency_[v]) {
          if (row[e.to] == std::numeric_limits<std::uint16_t>::max()) {
            row[e.to] = static_cast<std::uint16_t>(row[v] + 1);
            queue[tail++] = e.to;
          }
        }
      }
    }
  });
  return distances_->table[static_cast<std::size_t>(a) * n + b];
}

std::vector<NodeIndex> key_points(const CityGraph& graph) {
  std::vector<NodeIndex> out;
  for (NodeIndex v = 0; v < graph.size(); ++v) {
    if (graph.is_key_point(v)) out.push_back(v);
  }
  return out;
}

std::size_t shortest_path_len(const CityGraph& graph, NodeIndex a, NodeIndex b) { return graph.hops(a, b); }

}  // namespace stopnav::world
