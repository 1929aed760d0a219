#include "stopnav/language/instructions.hpp"

#include <algorithm>
#include <array>
#include <unordered_set>

#include "stopnav/error.hpp"
#include "stopnav/rng.hpp"
#include "stopnav/world/routes.hpp"

namespace stopnav::language {

namespace {

using world::Action;

// {d} direction word, {o} ordinal, {k} landmark kind, {n} count
constexpr std::array kTurnOrdinal = {
    "turn {d} at the {o} intersection",
    "take a {d} at the {o} intersection",
    "make a {d} at the {o} intersection",
};
constexpr std::array kStraightOrdinal = {
    "go straight through the {o} intersection",
    "go straight at the {o} intersection",
    "keep going straight through the {o} intersection",
};
constexpr std::array kTurnLandmark = {
    "at the {k} turn {d}",
    "when you reach the {k} turn {d}",
    "take a {d} at the {k}",
};
constexpr std::array kStraightLandmark = {
    "at the {k} go straight",
    "go straight past the {k}",
    "when you reach the {k} keep going straight",
};
constexpr std::array kPreamble = {
    "walk down the street",
    "head along the road",
    "follow the street",
    "start walking forward",
};
constexpr std::array kStopPast = {
    "stop just past the {k}",
    "stop just after the {k}",
    "stop once you pass the {k}",
};
constexpr std::array kStopAt = {
    "stop at the {k}",
    "stop when you reach the {k}",
    "stop beside the {k}",
};
constexpr std::array kStopCountAfter = {
    "stop {n} steps after the last intersection",
    "walk {n} more steps after the last intersection and stop",
};
constexpr std::array kStopCount = {
    "stop after {n} steps",
    "walk {n} steps and stop",
};
constexpr std::array kJoin = {". ", ", then ", " and then ", ". after that, "};

constexpr std::array kOrdinals = {"first",   "second", "third",    "fourth",     "fifth",
                                  "sixth",   "seventh", "eighth",  "ninth",      "tenth",
                                  "eleventh", "twelfth", "thirteenth", "fourteenth", "fifteenth"};
constexpr std::array kNumbers = {"one",    "two",     "three",    "four",     "five",    "six",     "seven",
                                 "eight",  "nine",    "ten",      "eleven",   "twelve",  "thirteen", "fourteen",
                                 "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty"};

std::string direction_word(Action a) { return a == Action::left ? "left" : "right"; }

std::string ordinal(std::size_t k) { return k >= 1 && k <= kOrdinals.size() ? kOrdinals[k - 1] : "next"; }

std::string number(std::size_t k) {
  if (k >= 1 && k <= kNumbers.size()) return kNumbers[k - 1];
  throw Error(ErrorCode::invalid_argument, "instruction: step count " + std::to_string(k) + " has no number word");
}

std::string fill(std::string_view tpl, std::string_view key, const std::string& value) {
  std::string out(tpl);
  if (auto p = out.find(key); p != std::string::npos) out.replace(p, key.size(), value);
  return out;
}

std::string fill_count(std::string_view tpl, std::size_t n) {
  std::string out = fill(tpl, "{n}", number(n));
  if (n == 1) {
    if (auto p = out.find("steps"); p != std::string::npos) out.erase(p + 4, 1);
  }
  return out;
}

template <std::size_t N>
std::string_view pick(const std::array<const char*, N>& options, Rng& rng) {
  return options[rng.below(N)];
}

void add_words(std::string_view text, std::vector<std::string>& out, std::unordered_set<std::string>& seen) {
  const std::string norm = normalize(text);
  std::size_t pos = 0;
  while (pos < norm.size()) {
    std::size_t end = norm.find(' ', pos);
    if (end == std::string::npos) end = norm.size();
    std::string w = norm.substr(pos, end - pos);
    if (w != "d" && w != "o" && w != "k" && w != "n" && seen.insert(w).second) out.push_back(w);
    pos = end + 1;
  }
}

std::string build_text(const world::CityGraph& graph, std::span<const world::NodeIndex> route, std::uint64_t seed,
                       const InstructionConfig& config, bool with_preamble) {
  Rng rng(seed, "instruction");
  const auto actions = world::reference_actions(graph, route);
  const bool preamble = rng.bernoulli(config.preamble_prob);
  std::vector<std::string> clauses;
  if (preamble) clauses.emplace_back(pick(kPreamble, rng));

  std::size_t key_index = 0;
  std::size_t last_key = route.size();
  for (std::size_t i = 0; i + 1 < route.size(); ++i) {
    if (!graph.is_key_point(route[i])) continue;
    ++key_index;
    last_key = i;
    const Action a = actions[i];
    const auto& lms = graph.node(route[i]).landmarks;
    const bool ordinal_form = lms.empty() || rng.bernoulli(config.ordinal_prob);
    std::string clause;
    if (ordinal_form) {
      clause = a == Action::forward ? std::string(pick(kStraightOrdinal, rng))
                                    : fill(pick(kTurnOrdinal, rng), "{d}", direction_word(a));
      clause = fill(clause, "{o}", ordinal(key_index));
    } else {
      const auto& lm = lms[rng.below(lms.size())];
      clause = a == Action::forward ? std::string(pick(kStraightLandmark, rng))
                                    : fill(pick(kTurnLandmark, rng), "{d}", direction_word(a));
      clause = fill(clause, "{k}", std::string(world::to_string(lm.kind)));
    }
    clauses.push_back(std::move(clause));
  }

  const std::size_t n = route.size();
  std::string stop;
  if (n >= 2 && !graph.node(route[n - 2]).landmarks.empty()) {
    const auto& lms = graph.node(route[n - 2]).landmarks;
    stop = fill(pick(kStopPast, rng), "{k}", std::string(world::to_string(lms[rng.below(lms.size())].kind)));
  } else if (!graph.node(route[n - 1]).landmarks.empty()) {
    const auto& lms = graph.node(route[n - 1]).landmarks;
    stop = fill(pick(kStopAt, rng), "{k}", std::string(world::to_string(lms[rng.below(lms.size())].kind)));
  } else if (last_key < n) {
    stop = fill_count(pick(kStopCountAfter, rng), n - 1 - last_key);
  } else {
    stop = fill_count(pick(kStopCount, rng), n - 1);
  }
  clauses.push_back(std::move(stop));

  if (!with_preamble && preamble) clauses.erase(clauses.begin());
  std::string text = clauses.front();
  for (std::size_t i = 1; i < clauses.size(); ++i) {
    text += pick(kJoin, rng);
    text += clauses[i];
  }
  text += '.';
  if (!text.empty()) text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
  return text;
}

}  // namespace

void validate(const InstructionConfig& config) {
  if (!(config.ordinal_prob >= 0.0 && config.ordinal_prob <= 1.0) ||
      !(config.preamble_prob >= 0.0 && config.preamble_prob <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "instruction: probabilities must lie in [0, 1]");
  }
  if (config.max_length < 3) throw Error(ErrorCode::invalid_argument, "instruction: max_length must be at least 3");
}

std::vector<std::string> generator_lexicon() {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  auto add_all = [&](const auto& list) {
    for (const char* s : list) add_words(s, out, seen);
  };
  add_all(kTurnOrdinal);
  add_all(kStraightOrdinal);
  add_all(kTurnLandmark);
  add_all(kStraightLandmark);
  add_all(kPreamble);
  add_all(kStopPast);
  add_all(kStopAt);
  add_all(kStopCountAfter);
  add_all(kStopCount);
  add_all(kJoin);
  add_words("left right next step", out, seen);
  add_all(kOrdinals);
  add_all(kNumbers);
  for (auto k : world::all_landmark_kinds()) add_words(world::to_string(k), out, seen);
  return out;
}

std::string generate_instruction_text(const world::CityGraph& graph, std::span<const world::NodeIndex> route,
                                      std::uint64_t seed, const InstructionConfig& config) {
  validate(config);
  std::string text = build_text(graph, route, seed, config, true);
  if (tokenize(text).tokens.size() > config.max_length) text = build_text(graph, route, seed, config, false);
  const std::size_t count = tokenize(text).tokens.size();
  if (count > config.max_length) {
    throw Error(ErrorCode::invalid_argument, "instruction: " + std::to_string(count) + " tokens exceed max_length " +
                                                 std::to_string(config.max_length));
  }
  return text;
}

Instruction generate_instruction(const world::CityGraph& graph, std::span<const world::NodeIndex> route,
                                 std::uint64_t seed, const InstructionConfig& config, std::uint64_t route_id) {
  Instruction ins = tokenize(generate_instruction_text(graph, route, seed, config));
  ins.route_id = route_id;
  return ins;
}

std::vector<world::Action> turn_sequence(const Instruction& instruction, const Vocabulary& vocab) {
  const TokenId left = vocab.index("left"), right = vocab.index("right"), straight = vocab.index("straight");
  std::vector<world::Action> out;
  for (TokenId id : instruction.tokens) {
    if (id == left) out.push_back(Action::left);
    else if (id == right) out.push_back(Action::right);
    else if (id == straight) out.push_back(Action::forward);
  }
  return out;
}

}  // namespace stopnav::language
