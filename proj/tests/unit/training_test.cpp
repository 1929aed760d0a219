#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <memory>

#include "oracles.hpp"
#include "stopnav/error.hpp"
#include "stopnav/language/instructions.hpp"
#include "stopnav/language/vocabulary.hpp"
#include "stopnav/training/losses.hpp"
#include "stopnav/training/trainer.hpp"
#include "stopnav/world/city_gen.hpp"
#include "stopnav/world/observation.hpp"
#include "stopnav/world/routes.hpp"

namespace {

using namespace stopnav;
using namespace stopnav::training;
using world::Action;
using world::NodeIndex;

TEST(DirectionLoss, Examples) {
  const std::vector<std::vector<double>> uniform = {{1.0 / 3, 1.0 / 3, 1.0 / 3}};
  const std::vector<std::optional<std::size_t>> q1 = {2};
  EXPECT_NEAR(direction_loss(uniform, q1), std::log(3.0), 1e-15);
  const std::vector<std::vector<double>> exact = {{0, 1, 0}};
  EXPECT_EQ(direction_loss(exact, std::vector<std::optional<std::size_t>>{1}), 0.0);
  const std::vector<std::vector<double>> two = {{0.7, 0.2, 0.1}, {0.1, 0.8, 0.1}};
  const std::vector<std::optional<std::size_t>> q2 = {0, 1};
  EXPECT_NEAR(direction_loss(two, q2), -std::log(0.7) - std::log(0.8), 1e-15);
  EXPECT_NEAR(direction_loss(two, q2), 0.5798, 5e-5);
  // Unsupervised steps are skipped.
  const std::vector<std::optional<std::size_t>> q3 = {std::nullopt, 1};
  EXPECT_NEAR(direction_loss(two, q3), -std::log(0.8), 1e-15);
}

TEST(DirectionLoss, ZeroProbabilityIsClampedAndCounted) {
  const std::vector<std::vector<double>> p = {{1, 0, 0}};
  std::size_t clamps = 0;
  const double l = direction_loss(p, std::vector<std::optional<std::size_t>>{1}, &clamps);
  EXPECT_EQ(clamps, 1u);
  EXPECT_NEAR(l, -std::log(kLogEpsilon), 1e-12);
  EXPECT_TRUE(std::isfinite(l));
}

TEST(StopLoss, Examples) {
  const std::vector<std::array<double, 2>> s(3, {0.5, 0.5});
  const std::vector<int> o = {1, 1, 0};
  EXPECT_NEAR(stop_loss(s, o, 1.0), 3 * std::log(2.0), 1e-14);
  EXPECT_NEAR(stop_loss(s, o, 1.0), 2.0794, 5e-5);
  EXPECT_NEAR(stop_loss(s, o, 20.0), 22 * std::log(2.0), 1e-13);
  EXPECT_NEAR(stop_loss(s, o, 20.0), 15.2492, 5e-5);
}

TEST(StopLoss, LambdaZeroIgnoresTheStopStep) {
  std::vector<std::array<double, 2>> s = {{0.9, 0.1}, {0.8, 0.2}, {0.7, 0.3}};
  const std::vector<int> o = {1, 1, 0};
  const double base = stop_loss(s, o, 0.0);
  s[2] = {0.01, 0.99};
  EXPECT_EQ(stop_loss(s, o, 0.0), base);
  s[2] = {1.0, 0.0};
  std::size_t clamps = 0;
  EXPECT_EQ(stop_loss(s, o, 0.0, &clamps), base);
}

TEST(StopLoss, StrictlyIncreasingInLambda) {
  const std::vector<std::array<double, 2>> s = {{0.6, 0.4}, {0.3, 0.7}};
  const std::vector<int> o = {1, 0};
  double prev = stop_loss(s, o, 0.0);
  for (double lam : {0.5, 1.0, 2.0, 20.0, 100.0}) {
    const double cur = stop_loss(s, o, lam);
    EXPECT_GT(cur, prev);
    prev = cur;
  }
}

TEST(StopLoss, LambdaOneIsCrossEntropyBitForBit) {
  Rng rng(1, "traces");
  for (int trace = 0; trace < 100; ++trace) {
    const std::size_t n = 1 + rng.below(30);
    std::vector<std::array<double, 2>> s(n);
    std::vector<int> o(n, 1);
    std::vector<std::size_t> labels(n, 0);
    for (auto& v : s) {
      const double x = rng.uniform();
      v = {1.0 - x, x};
    }
    o.back() = 0;
    labels.back() = 1;
    EXPECT_EQ(stop_loss(s, o, 1.0), cross_entropy(s, labels));
  }
}

TEST(TotalLoss, ExamplesAndEndpoints) {
  EXPECT_NEAR(total_loss(1.0, 2.0, 0.6), 1.4, 1e-15);
  Rng rng(2, "total");
  for (int i = 0; i < 100; ++i) {
    const double d = rng.uniform(0, 10), s = rng.uniform(0, 10);
    EXPECT_EQ(total_loss(d, s, 1.0), d);
    EXPECT_EQ(total_loss(d, s, 0.0), s);
  }
}

TEST(LossConfig, Validation) {
  EXPECT_NO_THROW(validate(LossConfig{0.0, 0.0}));
  EXPECT_NO_THROW(validate(LossConfig{20.0, 1.0}));
  EXPECT_THROW(validate(LossConfig{-1.0, 0.5}), Error);
  EXPECT_THROW(validate(LossConfig{1.0, 1.5}), Error);
  EXPECT_THROW(validate(LossConfig{1.0, -0.1}), Error);
  EXPECT_THROW(validate(LossConfig{std::nan(""), 0.5}), Error);
}

// Shared small world: the seed-3 city, its renderer, and a few episodes.
struct World {
  world::CityGraph graph;
  std::unique_ptr<world::ObservationRenderer> renderer;
  Environment env;
  std::vector<Episode> episodes;

  explicit World(world::CityGraph g, std::size_t count = 20) : graph(std::move(g)) {
    renderer = std::make_unique<world::ObservationRenderer>(graph, world::ObservationConfig{});
    env = {&graph, renderer.get(), 40};
    for (std::uint64_t s = 0; s < count; ++s) {
      auto r = world::sample_route(graph, {}, s);
      episodes.push_back({std::make_shared<const std::vector<NodeIndex>>(r),
                          language::generate_instruction(graph, r, s).tokens});
    }
  }

  model::ModelConfig config(model::Variant v = model::Variant::shared_enc_dec) const {
    model::ModelConfig c = model::desk_preset();
    c.vocab_size = language::instruction_vocabulary().size();
    c.obs_channels = renderer->shape()[0];
    c.obs_grid = renderer->shape()[1];
    c.t_max = env.t_max;
    c.variant = v;
    return c;
  }
};

const World& city_world() {
  static const World w = [] {
    world::CityConfig c;
    c.node_count = 200;
    return World(world::generate_city(c, 3));
  }();
  return w;
}

TEST(Trace, StopSignalAndDirectionDomain) {
  const auto& w = city_world();
  for (const auto& ep : w.episodes) {
    const auto& r = *ep.route;
    for (bool gating : {true, false}) {
      const auto t = make_trace(w.graph, r, gating);
      ASSERT_EQ(t.actions.size(), r.size());
      ASSERT_EQ(t.o.size(), r.size());
      EXPECT_EQ(std::count(t.o.begin(), t.o.end(), 0), 1);
      EXPECT_EQ(t.o.back(), 0);
      EXPECT_EQ(t.actions.back(), Action::stop);
      EXPECT_EQ(t.actions, world::reference_actions(w.graph, r));
      for (std::size_t i = 0; i < r.size(); ++i) {
        const bool last = i + 1 == r.size();
        EXPECT_EQ(t.key_point[i], w.graph.is_key_point(r[i]));
        const bool supervised = !last && (!gating || w.graph.is_key_point(r[i]));
        EXPECT_EQ(t.q[i].has_value(), supervised);
        if (supervised) {
          EXPECT_EQ(*t.q[i], static_cast<std::size_t>(t.actions[i]));
        }
      }
    }
  }
}

// Which parameter groups receive gradient from the episode loss.
struct Groups {
  bool direction_only = false;  // parameters used by the direction branch only
  bool stop_only = false;
  bool any = false;
};

Groups reach(model::Variant v, double gamma) {
  const auto& w = city_world();
  const auto c = w.config(v);
  const auto params = model::init_params(c, 3);
  numeric::Tape tape(params);
  const auto loss = record_episode_loss(tape, c, w.env, w.episodes[1], {20.0, gamma});
  tape.backward(loss.total);
  const bool separate_enc = v == model::Variant::shared_dec || v == model::Variant::separate_enc_dec;
  const bool separate_dec = v == model::Variant::shared_enc || v == model::Variant::separate_enc_dec;
  Groups g;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.entry(i).name;
    bool nonzero = false;
    for (double x : tape.param_grad(i)) nonzero |= x != 0.0;
    if (!nonzero) continue;
    g.any = true;
    const bool stop_only = name.starts_with("stop_head.") || name.starts_with("stop_encoder.") ||
                           name.starts_with("stop_decoder.");
    const bool dir_only = name.starts_with("direction_head.") || (separate_enc && name.starts_with("encoder.")) ||
                          (separate_dec && name.starts_with("decoder."));
    g.stop_only |= stop_only;
    g.direction_only |= dir_only;
  }
  return g;
}

TEST(GradientSeparation, GammaEndpointsSilenceTheOtherBranch) {
  for (auto v : {model::Variant::shared_enc_dec, model::Variant::shared_enc, model::Variant::shared_dec,
                 model::Variant::separate_enc_dec}) {
    const auto dir = reach(v, 1.0);
    EXPECT_TRUE(dir.direction_only) << to_string(v);
    EXPECT_FALSE(dir.stop_only) << to_string(v);
    const auto stop = reach(v, 0.0);
    EXPECT_TRUE(stop.stop_only) << to_string(v);
    EXPECT_FALSE(stop.direction_only) << to_string(v);
  }
}

TEST(EpisodeLoss, ComponentsCombineAndOneBranchUsesFourWayHead) {
  const auto& w = city_world();
  for (auto v : {model::Variant::shared_enc_dec, model::Variant::one_branch}) {
    const auto c = w.config(v);
    const auto params = model::init_params(c, 5);
    numeric::Tape tape(params);
    const auto l = record_episode_loss(tape, c, w.env, w.episodes[2], {20.0, 0.6});
    EXPECT_GT(l.direction, 0.0);
    EXPECT_GT(l.stop, 0.0);
    EXPECT_EQ(l.value, total_loss(l.direction, l.stop, 0.6));
    EXPECT_EQ(tape.scalar(l.total), l.value);
  }
}

TEST(EpisodeLoss, OneBranchStopTermScalesWithLambda) {
  const auto& w = city_world();
  const auto c = w.config(model::Variant::one_branch);
  const auto params = model::init_params(c, 5);
  numeric::Tape t1(params), t20(params);
  const auto a = record_episode_loss(t1, c, w.env, w.episodes[3], {1.0, 0.6});
  const auto b = record_episode_loss(t20, c, w.env, w.episodes[3], {20.0, 0.6});
  EXPECT_EQ(a.direction, b.direction);
  EXPECT_NEAR(b.stop, 20.0 * a.stop, 1e-12 * b.stop);
}

TEST(TrainEpoch, DeterministicPerSeed) {
  const auto& w = city_world();
  const auto c = w.config();
  std::span<const Episode> few(w.episodes.data(), 4);
  Model a{c, model::init_params(c, 1)}, b{c, model::init_params(c, 1)};
  const auto sa = train_epoch(a, w.env, few, {}, {}, 7, 1);
  const auto sb = train_epoch(b, w.env, few, {}, {}, 7, 1);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(sa.total, sb.total);
  Model d{c, model::init_params(c, 1)};
  train_epoch(d, w.env, few, {}, {}, 8, 1);
  EXPECT_FALSE(d.params == a.params);
  EXPECT_THROW(train_epoch(d, w.env, std::span<const Episode>{}, {}, {}, 8, 1), Error);
}

TEST(TrainEpoch, DivergenceLeavesParametersUntouched) {
  const auto& w = city_world();
  const auto c = w.config();
  Model m{c, model::init_params(c, 1)};
  m.params.value("stop_head.bias")[0] = std::numeric_limits<double>::quiet_NaN();
  const auto before = m.params.value("decoder.lstm.weight");
  try {
    train_epoch(m, w.env, std::span<const Episode>(w.episodes.data(), 2), {}, {}, 1, 1);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::divergence);
  }
  EXPECT_EQ(m.params.value("decoder.lstm.weight"), before);
  EXPECT_EQ(m.params.step(), 0u);
}

// A model whose heads always say "forward, keep going".
Model forward_model(const model::ModelConfig& c) {
  Model m{c, model::init_params(c, 2)};
  m.params.value("direction_head.weight").fill(0.0);
  m.params.value("direction_head.bias") = numeric::Array({3}, {50.0, 0.0, 0.0});
  m.params.value("stop_head.weight").fill(0.0);
  m.params.value("stop_head.bias") = numeric::Array({2}, {50.0, 0.0});
  return m;
}

TEST(Rollout, OracleStopOnStraightRouteSucceeds) {
  const World w(testkit::path_graph(8), 0);
  const std::vector<NodeIndex> route = {0, 1, 2, 3, 4};
  const Episode ep{std::make_shared<const std::vector<NodeIndex>>(route),
                   language::generate_instruction(w.graph, route, 1).tokens};
  const auto m = forward_model(w.config());
  const auto plain = rollout(m, w.env, ep, 0.5);
  EXPECT_NE(plain.path.back(), 4u);
  const auto r = rollout(m, w.env, ep, 0.5, OracleMode::stop);
  EXPECT_EQ(r.path, route);
  EXPECT_EQ(r.actions.back(), Action::stop);
  const std::vector<eval::TrajectoryPair> pairs = {{r.path, route}};
  EXPECT_EQ(eval::evaluate(w.graph, pairs).mean.tc, 1.0);
}

TEST(Rollout, CombinedOracleModeIsRejected) {
  EXPECT_THROW(validate(static_cast<OracleMode>(3)), Error);
  const auto& w = city_world();
  const auto c = w.config();
  const Model m{c, model::init_params(c, 1)};
  EXPECT_THROW(rollout(m, w.env, w.episodes[0], 0.5, static_cast<OracleMode>(3)), Error);
}

TEST(Rollout, TauAboveOneRunsToTheStepLimit) {
  const auto& w = city_world();
  const auto c = w.config();
  Model m{c, model::init_params(c, 1)};
  m.params.value("stop_head.weight").fill(0.0);
  m.params.value("stop_head.bias") = numeric::Array({2}, {-50.0, 50.0});  // s1 ~ 1
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(rollout(m, w.env, w.episodes[i], 0.5).actions.size(), 1u);
    const auto r = rollout(m, w.env, w.episodes[i], 1.0 + 1e-9);
    EXPECT_EQ(r.actions.size(), w.env.t_max);
    EXPECT_EQ(std::count(r.actions.begin(), r.actions.end(), Action::stop), 0);
    for (std::size_t k = 0; k + 1 < r.path.size(); ++k) EXPECT_TRUE(w.graph.adjacent(r.path[k], r.path[k + 1]));
  }
}

TEST(Rollout, GatingAndOracleStopInvariantsOnRandomModels) {
  const auto& w = city_world();
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto c = w.config();
    const Model m{c, model::init_params(c, seed)};
    for (const auto& ep : w.episodes) {
      const auto r = rollout(m, w.env, ep, 0.9);
      ASSERT_EQ(r.actions.size(), r.key_point.size());
      for (std::size_t k = 0; k < r.actions.size(); ++k) {
        if (!r.key_point[k]) {
          EXPECT_NE(r.actions[k], Action::left);
          EXPECT_NE(r.actions[k], Action::right);
        }
        EXPECT_EQ(r.key_point[k], w.graph.is_key_point(r.path[k]));
      }
      const auto o = rollout(m, w.env, ep, 0.9, OracleMode::stop);
      const NodeIndex goal = ep.route->back();
      if (std::find(o.path.begin(), o.path.end(), goal) != o.path.end()) {
        EXPECT_EQ(o.path.back(), goal);
        EXPECT_EQ(o.actions.back(), Action::stop);
      } else {
        EXPECT_EQ(o.actions.size(), w.env.t_max);
      }
    }
  }
}

TEST(Rollout, OracleDirectionFollowsTheRouteUntilTheModelStops) {
  const auto& w = city_world();
  const auto c = w.config();
  const Model m = forward_model(c);  // never stops
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& route = *w.episodes[i].route;
    const auto r = rollout(m, w.env, w.episodes[i], 0.5, OracleMode::direction);
    ASSERT_GE(r.path.size(), route.size());
    EXPECT_TRUE(std::equal(route.begin(), route.end(), r.path.begin()));
  }
}

TEST(Evaluate, ModeNoneMatchesPlainAndOracleStopDominates) {
  const auto& w = city_world();
  const auto c = w.config();
  const Model m{c, model::init_params(c, 4)};
  const auto plain = evaluate_model(m, w.env, w.episodes, 0.5);
  const auto none = evaluate_model(m, w.env, w.episodes, 0.5, OracleMode::none);
  EXPECT_EQ(plain.report, none.report);
  const auto stop = evaluate_model(m, w.env, w.episodes, 0.5, OracleMode::stop);
  EXPECT_GE(stop.report.mean.tc, plain.report.mean.tc);
}

}  // namespace
