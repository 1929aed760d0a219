#pragma once

#include <cstddef>
#include <cstdint>

#include "stopnav/world/city_graph.hpp"

namespace stopnav::world {

/// Street-lattice city. Nodes sit on a square lattice with `spacing` meters
/// between neighbors; streets run along every `block_length`-th row and
/// column, so intersections are `block_length` hops apart with degree-2
/// mid-block nodes in between.
struct CityConfig {
  std::size_t node_count = 300;
  double spacing = 20.0;             // meters between adjacent lattice nodes
  std::size_t block_length = 3;      // hops between parallel streets
  double jitter = 0.1;               // position noise as a fraction of spacing
  double edge_drop = 0.1;            // chance to drop a street segment (connectivity kept)
  double landmark_density = 0.3;     // chance a node carries a landmark
  double distractor_bias = 0.5;      // chance a landmark gets a same-kind twin 2-3 hops away
  std::size_t max_degree = 4;
};

void validate(const CityConfig& config);

/// Deterministic in (config, seed). The first `node_count` street cells in
/// breadth-first order from the origin form the node set; lattice-adjacent
/// street cells are joined; segments are then dropped at random without
/// disconnecting the graph or stranding a node, and excess degree is trimmed
/// to `max_degree`. Throws unsatisfiable when the degree bound cannot be met.
CityGraph generate_city(const CityConfig& config, std::uint64_t seed);

}  // namespace stopnav::world
