#include "stopnav/world/city_gen.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "stopnav/error.hpp"
#include "stopnav/rng.hpp"

namespace stopnav::world {

namespace {

using Cell = std::pair<std::int64_t, std::int64_t>;

bool on_street(Cell c, std::int64_t block) {
  auto mod = [block](std::int64_t v) { return ((v % block) + block) % block; };
  return mod(c.first) == 0 || mod(c.second) == 0;
}

std::vector<Cell> street_cells(std::size_t count, std::int64_t block) {
  static constexpr std::array<Cell, 4> kSteps = {Cell{1, 0}, Cell{0, 1}, Cell{-1, 0}, Cell{0, -1}};
  std::vector<Cell> order;
  std::set<Cell> seen{{0, 0}};
  std::deque<Cell> queue{{0, 0}};
  while (!queue.empty() && order.size() < count) {
    const Cell c = queue.front();
    queue.pop_front();
    order.push_back(c);
    for (auto [dx, dy] : kSteps) {
      const Cell next{c.first + dx, c.second + dy};
      if (on_street(next, block) && seen.insert(next).second) queue.push_back(next);
    }
  }
  return order;
}

struct UndirectedEdge {
  NodeIndex a;
  NodeIndex b;
};

bool connected_without(std::size_t n, const std::vector<UndirectedEdge>& edges, const std::vector<bool>& alive,
                       std::size_t skip) {
  std::vector<std::vector<NodeIndex>> adj(n);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (!alive[i] || i == skip) continue;
    adj[edges[i].a].push_back(edges[i].b);
    adj[edges[i].b].push_back(edges[i].a);
  }
  std::vector<bool> reached(n, false);
  std::vector<NodeIndex> stack{0};
  reached[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const NodeIndex v = stack.back();
    stack.pop_back();
    for (NodeIndex w : adj[v]) {
      if (!reached[w]) {
        reached[w] = true;
        ++count;
        stack.push_back(w);
      }
    }
  }
  return count == n;
}

}  // namespace

void validate(const CityConfig& config) {
  if (config.node_count < 2) throw Error(ErrorCode::invalid_argument, "city: node_count must be at least 2");
  if (!(config.spacing > 0.0)) throw Error(ErrorCode::invalid_argument, "city: spacing must be positive");
  if (config.block_length < 1) throw Error(ErrorCode::invalid_argument, "city: block_length must be at least 1");
  if (!(config.jitter >= 0.0 && config.jitter < 0.25)) throw Error(ErrorCode::invalid_argument, "city: jitter must lie in [0, 0.25)");
  for (double p : {config.edge_drop, config.landmark_density, config.distractor_bias}) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::invalid_argument, "city: probabilities must lie in [0, 1]");
  }
  if (config.max_degree < 1) throw Error(ErrorCode::unsatisfiable, "city: max_degree must be at least 1");
  if (config.node_count > 2 && config.max_degree < 2) {
    throw Error(ErrorCode::unsatisfiable, "city: a connected graph on more than two nodes needs max_degree >= 2");
  }
}

CityGraph generate_city(const CityConfig& config, std::uint64_t seed) {
  validate(config);
  const auto block = static_cast<std::int64_t>(config.block_length);
  const std::vector<Cell> cells = street_cells(config.node_count, block);
  const std::size_t n = cells.size();

  std::map<Cell, NodeIndex> index;
  for (NodeIndex i = 0; i < n; ++i) index.emplace(cells[i], i);

  std::vector<UndirectedEdge> edges;
  for (NodeIndex i = 0; i < n; ++i) {
    for (Cell step : {Cell{1, 0}, Cell{0, 1}}) {
      auto it = index.find({cells[i].first + step.first, cells[i].second + step.second});
      if (it != index.end()) edges.push_back({i, it->second});
    }
  }
  std::vector<bool> alive(edges.size(), true);
  std::vector<std::size_t> degree(n, 0);
  for (const auto& e : edges) {
    ++degree[e.a];
    ++degree[e.b];
  }

  Rng topology(seed, "city:topology");
  std::vector<std::size_t> order(edges.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  topology.shuffle(order.begin(), order.end());
  for (std::size_t i : order) {
    if (!topology.bernoulli(config.edge_drop)) continue;
    const auto& e = edges[i];
    if (degree[e.a] < 2 || degree[e.b] < 2) continue;
    if (!connected_without(n, edges, alive, i)) continue;
    alive[i] = false;
    --degree[e.a];
    --degree[e.b];
  }
  for (std::size_t i : order) {
    const auto& e = edges[i];
    if (!alive[i] || (degree[e.a] <= config.max_degree && degree[e.b] <= config.max_degree)) continue;
    if (degree[e.a] < 2 || degree[e.b] < 2 || !connected_without(n, edges, alive, i)) continue;
    alive[i] = false;
    --degree[e.a];
    --degree[e.b];
  }
  for (NodeIndex v = 0; v < n; ++v) {
    if (degree[v] > config.max_degree) {
      throw Error(ErrorCode::unsatisfiable, "city: cannot satisfy max_degree " + std::to_string(config.max_degree) +
                                                " while keeping the street graph connected");
    }
  }

  Rng placement(seed, "city:positions");
  std::vector<NodeRecord> nodes(n);
  for (NodeIndex i = 0; i < n; ++i) {
    nodes[i].id = i;
    const double jx = placement.uniform(-config.jitter, config.jitter);
    const double jy = placement.uniform(-config.jitter, config.jitter);
    nodes[i].position = {(static_cast<double>(cells[i].first) + jx) * config.spacing,
                         (static_cast<double>(cells[i].second) + jy) * config.spacing};
  }

  std::vector<std::vector<NodeIndex>> adj(n);
  std::vector<Edge> directed;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (!alive[i]) continue;
    const auto [a, b] = edges[i];
    const double h = heading_between(nodes[a].position, nodes[b].position);
    directed.push_back({a, b, h});
    directed.push_back({b, a, reverse_heading(h)});
    adj[a].push_back(b);
    adj[b].push_back(a);
  }

  Rng landmarks(seed, "city:landmarks");
  constexpr std::size_t kMaxPerNode = 2;
  auto place = [&](NodeIndex v, LandmarkKind kind) {
    if (nodes[v].landmarks.size() >= kMaxPerNode) return;
    nodes[v].landmarks.push_back({kind, landmarks.uniform(0.0, 360.0)});
  };
  for (NodeIndex v = 0; v < n; ++v) {
    if (!landmarks.bernoulli(config.landmark_density)) continue;
    const auto kind = all_landmark_kinds()[landmarks.below(kLandmarkKindCount)];
    place(v, kind);
    if (!landmarks.bernoulli(config.distractor_bias)) continue;
    // Same-kind twin two or three hops away.
    std::vector<std::size_t> dist(n, SIZE_MAX);
    std::deque<NodeIndex> queue{v};
    dist[v] = 0;
    std::vector<NodeIndex> ring;
    while (!queue.empty()) {
      const NodeIndex u = queue.front();
      queue.pop_front();
      if (dist[u] >= 2) ring.push_back(u);
      if (dist[u] == 3) continue;
      for (NodeIndex w : adj[u]) {
        if (dist[w] == SIZE_MAX) {
          dist[w] = dist[u] + 1;
          queue.push_back(w);
        }
      }
    }
    if (!ring.empty()) place(ring[landmarks.below(ring.size())], kind);
  }
  for (auto& node : nodes) {
    for (auto& lm : node.landmarks) {
      if (lm.bearing_deg >= 360.0) lm.bearing_deg = 0.0;
    }
  }

  return CityGraph::build(std::move(nodes), directed, GraphLimits{config.max_degree});
}

}  // namespace stopnav::world
