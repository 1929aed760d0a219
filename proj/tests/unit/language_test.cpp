#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "stopnav/error.hpp"
#include "stopnav/language/dataset.hpp"
#include "stopnav/language/instructions.hpp"
#include "stopnav/language/vocabulary.hpp"
#include "stopnav/world/city_gen.hpp"
#include "stopnav/world/routes.hpp"

namespace {

using namespace stopnav;
using namespace stopnav::language;
using world::Action;
using world::NodeIndex;

const world::CityGraph& seed3_city() {
  static const world::CityGraph g = [] {
    world::CityConfig c;
    c.node_count = 200;
    return world::generate_city(c, 3);
  }();
  return g;
}

// Turn at each key point from raw edge headings: the relative angle of the
// outgoing edge against the incoming one, binned.
std::vector<Action> turn_oracle(const world::CityGraph& g, const std::vector<NodeIndex>& r) {
  std::vector<Action> out;
  double incoming = *g.heading(r[0], r[1]);
  for (std::size_t i = 0; i + 1 < r.size(); ++i) {
    const double outgoing = *g.heading(r[i], r[i + 1]);
    if (g.degree(r[i]) > 2) {
      double rel = std::fmod(outgoing - incoming + 540.0, 360.0) - 180.0;
      if (rel == -180.0) rel = 180.0;
      if (rel >= -45.0 && rel <= 45.0) out.push_back(Action::forward);
      else if (rel < -45.0 && rel > -135.0) out.push_back(Action::left);
      else if (rel > 45.0 && rel < 135.0) out.push_back(Action::right);
      else out.push_back(Action::stop);  // not representable; never expected
    }
    incoming = outgoing;
  }
  return out;
}

std::size_t count_word(const std::string& text, const std::string& word) {
  const auto ins = tokenize(text);
  const auto id = instruction_vocabulary().index(word);
  return static_cast<std::size_t>(std::count(ins.tokens.begin(), ins.tokens.end(), id));
}

TEST(Vocabulary, ReservedIndicesAndBijection) {
  const auto& v = instruction_vocabulary();
  EXPECT_EQ(v.word(kPad), "<pad>");
  EXPECT_EQ(v.word(kUnk), "<unk>");
  EXPECT_EQ(v.word(kBos), "<bos>");
  EXPECT_EQ(v.word(kEos), "<eos>");
  std::set<std::string> seen;
  for (TokenId i = 0; i < static_cast<TokenId>(v.size()); ++i) {
    EXPECT_EQ(v.index(v.word(i)), i);
    EXPECT_TRUE(seen.insert(v.word(i)).second);
  }
  for (auto kind : world::all_landmark_kinds()) EXPECT_TRUE(v.contains(world::to_string(kind)));
}

TEST(Tokenize, Examples) {
  const auto& v = instruction_vocabulary();
  const auto ins = tokenize("Turn left.");
  EXPECT_EQ(ins.tokens, (std::vector<TokenId>{kBos, v.index("turn"), v.index("left"), kEos}));
  const auto oov = tokenize("turn zeppelin left");
  ASSERT_EQ(oov.tokens.size(), 5u);
  EXPECT_EQ(oov.tokens[2], kUnk);
  EXPECT_THROW(tokenize(""), Error);
  EXPECT_THROW(tokenize("  ,. "), Error);
}

TEST(Generate, NoKeyPointsGivesOnlyAStopClause) {
  const auto g = testkit::path_graph(6);
  const std::vector<NodeIndex> route = {0, 1, 2, 3, 4};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto text = generate_instruction_text(g, route, seed);
    const auto ins = generate_instruction(g, route, seed);
    EXPECT_TRUE(turn_sequence(ins).empty()) << text;
    EXPECT_EQ(count_word(text, "stop"), 1u) << text;
    EXPECT_EQ(count_word(text, "intersection"), 0u) << text;
    EXPECT_NE(text.find("four steps"), std::string::npos) << text;
  }
}

TEST(Generate, SingularStep) {
  const auto g = testkit::path_graph(3);
  const std::vector<NodeIndex> route = {0, 1};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto text = generate_instruction_text(g, route, seed);
    EXPECT_NE(text.find("one step"), std::string::npos) << text;
    EXPECT_EQ(text.find("one steps"), std::string::npos) << text;
  }
}

TEST(Generate, DeterministicPerSeed) {
  const auto& g = seed3_city();
  const auto r = world::sample_route(g, {}, 5);
  EXPECT_EQ(generate_instruction(g, r, 9), generate_instruction(g, r, 9));
}

TEST(Generate, LeftBeforeRightFixture) {
  const auto& g = seed3_city();
  std::vector<NodeIndex> route;
  for (std::uint64_t seed = 0; seed < 5000 && route.empty(); ++seed) {
    auto r = world::sample_route(g, {}, seed);
    if (turn_oracle(g, r) == std::vector<Action>{Action::left, Action::right}) route = r;
  }
  ASSERT_FALSE(route.empty()) << "no LEFT,RIGHT route in the seed-3 city";
  EXPECT_EQ(world::key_point_turns(g, route), (std::vector<Action>{Action::left, Action::right}));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto text = generate_instruction_text(g, route, seed);
    const auto left = text.find("left");
    const auto right = text.find("right");
    ASSERT_NE(left, std::string::npos) << text;
    ASSERT_NE(right, std::string::npos) << text;
    EXPECT_LT(left, right) << text;
  }
}

TEST(Generate, TurnClausesMatchHeadingRuleAndStayInVocabulary) {
  const auto& g = seed3_city();
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const auto r = world::sample_route(g, {}, seed);
    const auto ins = generate_instruction(g, r, seed);
    EXPECT_EQ(turn_sequence(ins), turn_oracle(g, r)) << generate_instruction_text(g, r, seed);
    EXPECT_EQ(std::count(ins.tokens.begin(), ins.tokens.end(), kUnk), 0);
    EXPECT_GE(ins.tokens.size(), 3u);
    EXPECT_LE(ins.tokens.size(), 64u);
  }
}

TEST(Generate, StopClauseNamesALandmarkNearTheGoalWhenPresent) {
  const auto& g = seed3_city();
  std::size_t landmark_routes = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto r = world::sample_route(g, {}, seed);
    const auto text = generate_instruction_text(g, r, seed);
    const auto stop_at = text.rfind("stop");
    ASSERT_NE(stop_at, std::string::npos);
    const auto& before_goal = g.node(r[r.size() - 2]).landmarks;
    const auto& goal = g.node(r.back()).landmarks;
    const auto& named = before_goal.empty() ? goal : before_goal;
    const std::string tail = text.substr(text.rfind(',') == std::string::npos ? 0 : text.rfind(','));
    if (named.empty()) {
      EXPECT_NE(tail.find("step"), std::string::npos) << text;
      continue;
    }
    ++landmark_routes;
    bool found = false;
    for (const auto& lm : named) found |= tail.find(world::to_string(lm.kind)) != std::string::npos;
    EXPECT_TRUE(found) << text;
  }
  EXPECT_GT(landmark_routes, 0u);
}

TEST(Tokenize, RoundTripOfGeneratedInstructions) {
  const auto& g = seed3_city();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto r = world::sample_route(g, {}, seed + 1000);
    const auto text = generate_instruction_text(g, r, seed);
    EXPECT_EQ(detokenize(tokenize(text)), normalize(text));
  }
}

TEST(Dataset, RecordRoundTrip) {
  const std::vector<DatasetRecord> recs = {{{1, 2, 3}, "go straight and stop", 7},
                                           {{42, 41}, "stop after 1 step", 18446744073709551615ull}};
  const auto doc = save_dataset(recs);
  EXPECT_EQ(load_dataset(doc), recs);
  EXPECT_EQ(format_record(recs[0]), "1,2,3\tgo straight and stop\t7");
}

TEST(Dataset, MalformedLinesAreRejected) {
  EXPECT_THROW(parse_record("1,2\tno seed"), Error);
  EXPECT_THROW(parse_record("1,x\ttext\t3"), Error);
  EXPECT_THROW(parse_record("\ttext\t3"), Error);
  try {
    load_dataset("1,2\tok\t1\nbad line\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::parse_error);
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
}

}  // namespace
