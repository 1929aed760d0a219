#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stopnav/language/vocabulary.hpp"
#include "stopnav/world/city_graph.hpp"
#include "stopnav/world/navigation.hpp"

namespace stopnav::language {

struct InstructionConfig {
  double ordinal_prob = 0.5;   // ordinal-intersection clause vs landmark clause
  double preamble_prob = 0.5;
  std::size_t max_length = 64;  // tokens, including BOS/EOS
};

void validate(const InstructionConfig& config);

/// Words the templates below can produce, in a fixed order.
std::vector<std::string> generator_lexicon();

/// Templated text for a route: an optional preamble, one clause per key point
/// at positions 0..n-2 in route order (landmark form, or ordinal form counting
/// intersections from the start), then a stop
/// clause. The stop clause names a landmark at the node before the goal
/// ("stop just past the ..."), else one at the goal ("stop at the ..."), else
/// counts steps after the last intersection. Only direction clauses use the
/// words left, right and straight. The preamble is dropped when the text would
/// exceed max_length tokens; throws invalid_argument if it still does not fit.
std::string generate_instruction_text(const world::CityGraph& graph, std::span<const world::NodeIndex> route,
                                      std::uint64_t seed, const InstructionConfig& config = {});

Instruction generate_instruction(const world::CityGraph& graph, std::span<const world::NodeIndex> route,
                                 std::uint64_t seed, const InstructionConfig& config = {},
                                 std::uint64_t route_id = 0);

/// Direction words in order of appearance (left, right, straight -> FORWARD).
std::vector<world::Action> turn_sequence(const Instruction& instruction,
                                         const Vocabulary& vocab = instruction_vocabulary());

}  // namespace stopnav::language
