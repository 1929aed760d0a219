#include <benchmark/benchmark.h>

#include <memory>

#include "stopnav/eval/metrics.hpp"
#include "stopnav/language/instructions.hpp"
#include "stopnav/language/vocabulary.hpp"
#include "stopnav/training/trainer.hpp"
#include "stopnav/world/city_gen.hpp"
#include "stopnav/world/observation.hpp"
#include "stopnav/world/routes.hpp"

namespace {

using namespace stopnav;

struct World {
  world::CityGraph graph;
  std::unique_ptr<world::ObservationRenderer> renderer;
  training::Environment env;
  std::vector<training::Episode> episodes;
};

const World& desk_world() {
  static const World w = [] {
    World out;
    out.graph = world::generate_city(world::CityConfig{}, 1);
    out.renderer = std::make_unique<world::ObservationRenderer>(out.graph, world::ObservationConfig{});
    out.env = {&out.graph, out.renderer.get(), 40};
    for (std::uint64_t k = 0; k < 16; ++k) {
      auto r = world::sample_route(out.graph, world::RouteConfig{}, k);
      out.episodes.push_back({std::make_shared<const std::vector<world::NodeIndex>>(r),
                              language::generate_instruction(out.graph, r, k).tokens});
    }
    return out;
  }();
  return w;
}

model::ModelConfig desk_model(model::Variant v) {
  const auto& w = desk_world();
  auto c = model::desk_preset();
  c.vocab_size = language::instruction_vocabulary().size();
  c.obs_channels = w.renderer->shape()[0];
  c.obs_grid = w.renderer->shape()[1];
  c.t_max = w.env.t_max;
  c.variant = v;
  return c;
}

void BM_GenerateCity(benchmark::State& state) {
  world::CityConfig c;
  c.node_count = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(world::generate_city(c, ++seed));
}
BENCHMARK(BM_GenerateCity)->Arg(100)->Arg(400)->Arg(1600);

void BM_RenderObservation(benchmark::State& state) {
  const auto& w = desk_world();
  std::vector<double> out(numeric::element_count(w.renderer->shape()));
  world::NodeIndex node = 0;
  for (auto _ : state) {
    w.renderer->render_into(node, 0.0, out);
    node = (node + 1) % w.graph.size();
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_RenderObservation);

void BM_EpisodeForwardBackward(benchmark::State& state) {
  const auto v = static_cast<model::Variant>(state.range(0));
  const auto& w = desk_world();
  const auto c = desk_model(v);
  const auto params = model::init_params(c, 1);
  numeric::Tape tape(params);
  std::size_t k = 0;
  for (auto _ : state) {
    tape.clear();
    const auto loss = training::record_episode_loss(tape, c, w.env, w.episodes[k++ % w.episodes.size()], {});
    tape.backward(loss.total);
  }
  state.SetLabel(std::string(model::to_string(v)));
}
BENCHMARK(BM_EpisodeForwardBackward)->DenseRange(0, 4)->Unit(benchmark::kMillisecond);

void BM_Rollout(benchmark::State& state) {
  const auto& w = desk_world();
  const auto c = desk_model(model::Variant::shared_enc_dec);
  const training::Model m{c, model::init_params(c, 1)};
  std::size_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(training::rollout(m, w.env, w.episodes[k++ % w.episodes.size()], 0.5));
}
BENCHMARK(BM_Rollout)->Unit(benchmark::kMillisecond);

void BM_ScoreEpisode(benchmark::State& state) {
  const auto& w = desk_world();
  std::vector<eval::TrajectoryPair> pairs;
  for (std::size_t k = 0; k + 1 < w.episodes.size(); ++k) {
    pairs.push_back({*w.episodes[k].route, *w.episodes[k + 1].route});
  }
  std::size_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(eval::score(w.graph, pairs[k++ % pairs.size()]));
}
BENCHMARK(BM_ScoreEpisode);

}  // namespace

BENCHMARK_MAIN();
