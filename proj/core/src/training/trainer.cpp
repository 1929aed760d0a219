#include "stopnav/training/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "stopnav/error.hpp"
#include "stopnav/rng.hpp"
#include "stopnav/world/routes.hpp"

namespace stopnav::training {

using numeric::Tape;
using numeric::Var;

SupervisionTrace make_trace(const world::CityGraph& graph, std::span<const NodeIndex> route, bool key_point_gating) {
  SupervisionTrace tr;
  tr.actions = world::reference_actions(graph, route);
  const std::size_t n = route.size();
  tr.q.resize(n);
  tr.o.assign(n, 1);
  tr.o[n - 1] = 0;
  tr.key_point.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    tr.key_point[t] = graph.is_key_point(route[t]);
    if (t + 1 < n && (tr.key_point[t] || !key_point_gating)) tr.q[t] = static_cast<std::size_t>(tr.actions[t]);
  }
  return tr;
}

namespace {

Var add_term(Tape& tape, Var acc, Var term) { return acc.valid() ? tape.add(acc, term) : term; }

Var weighted_nll(Tape& tape, Var probs, std::size_t index, double weight) {
  return tape.scale(tape.log(tape.pick(probs, index)), -weight);
}

}  // namespace

EpisodeLoss record_episode_loss(Tape& tape, const model::ModelConfig& config, const Environment& env,
                                const Episode& episode, const LossConfig& loss) {
  const auto& route = *episode.route;
  const SupervisionTrace trace = make_trace(*env.graph, route, config.key_point_gating);
  const bool one_branch = config.variant == model::Variant::one_branch;
  const std::size_t n = route.size();
  if (n > env.t_max) throw Error(ErrorCode::invalid_argument, "record_episode_loss: route longer than t_max");

  model::EpisodeGraph net(tape, config, episode.tokens);
  std::vector<double> obs(env.renderer->config().grid * env.renderer->config().grid *
                          world::channel_count(env.renderer->config()));
  auto state = world::start_episode(*env.graph, episode.route, env.t_max);
  Var dir_sum, stop_sum;
  std::optional<Action> prev;
  for (std::size_t t = 0; t < n; ++t) {
    env.renderer->render_into(state.node, state.heading, obs);
    const model::StepVars out = net.step(obs, prev, state.t);
    if (one_branch) {
      if (t + 1 < n) {
        dir_sum = add_term(tape, dir_sum, weighted_nll(tape, out.direction, static_cast<std::size_t>(trace.actions[t]), 1.0));
      } else {
        stop_sum = add_term(tape, stop_sum,
                            weighted_nll(tape, out.direction, static_cast<std::size_t>(Action::stop), loss.lambda));
      }
    } else {
      if (trace.q[t]) dir_sum = add_term(tape, dir_sum, weighted_nll(tape, out.direction, *trace.q[t], 1.0));
      const double o = trace.o[t];
      if (o != 0.0) stop_sum = add_term(tape, stop_sum, weighted_nll(tape, out.stop, 0, o));
      if (loss.lambda * (1.0 - o) != 0.0) {
        stop_sum = add_term(tape, stop_sum, weighted_nll(tape, out.stop, 1, loss.lambda * (1.0 - o)));
      }
    }
    const Action a = trace.actions[t];
    state = world::step(state, a);
    prev = a;
  }
  const std::vector<double> zero{0.0};
  if (!dir_sum.valid()) dir_sum = tape.constant(zero, {1});
  if (!stop_sum.valid()) stop_sum = tape.constant(zero, {1});
  EpisodeLoss result;
  result.total = tape.add(tape.scale(dir_sum, loss.gamma), tape.scale(stop_sum, 1.0 - loss.gamma));
  result.direction = tape.scalar(dir_sum);
  result.stop = tape.scalar(stop_sum);
  result.value = tape.scalar(result.total);
  return result;
}

EpochStats train_epoch(Model& model, const Environment& env, std::span<const Episode> episodes, const LossConfig& loss,
                       const numeric::AdamConfig& adam, std::uint64_t seed, std::size_t epoch) {
  if (episodes.empty()) throw Error(ErrorCode::invalid_argument, "train_epoch: empty dataset");
  validate(loss);
  numeric::validate(adam);
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::size_t> order(episodes.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed, "shuffle:" + std::to_string(epoch));
  rng.shuffle(order.begin(), order.end());

  EpochStats stats;
  stats.epoch = epoch;
  Tape tape(model.params);
  std::vector<std::span<const double>> grads(model.params.size());
  for (std::size_t i : order) {
    tape.clear();
    const EpisodeLoss l = record_episode_loss(tape, model.config, env, episodes[i], loss);
    if (!std::isfinite(l.value)) {
      throw Error(ErrorCode::divergence, "non-finite loss at epoch " + std::to_string(epoch) + ", episode " +
                                             std::to_string(i));
    }
    tape.backward(l.total);
    for (std::size_t p = 0; p < grads.size(); ++p) {
      grads[p] = tape.param_grad(p);
      for (double g : grads[p]) {
        if (!std::isfinite(g)) {
          throw Error(ErrorCode::divergence, "non-finite gradient for " + model.params.entry(p).name + " at epoch " +
                                                 std::to_string(epoch));
        }
      }
    }
    numeric::adam_step(model.params, grads, adam);
    stats.direction += l.direction;
    stats.stop += l.stop;
    stats.total += l.value;
  }
  const double n = static_cast<double>(episodes.size());
  stats.direction /= n;
  stats.stop /= n;
  stats.total /= n;
  stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return stats;
}

std::string_view to_string(OracleMode mode) noexcept {
  switch (mode) {
    case OracleMode::none: return "NONE";
    case OracleMode::direction: return "ORACLE_DIRECTION";
    case OracleMode::stop: return "ORACLE_STOP";
  }
  return "ORACLE_DIRECTION+ORACLE_STOP";
}

void validate(OracleMode mode) {
  const auto bits = static_cast<unsigned>(mode);
  if (bits > 2) throw Error(ErrorCode::invalid_argument, "oracle: ORACLE_DIRECTION and ORACLE_STOP cannot be combined");
}

RolloutResult rollout(const Model& model, const Environment& env, const Episode& episode, double tau, OracleMode mode) {
  validate(mode);
  const auto& cfg = model.config;
  const auto& graph = *env.graph;
  const auto& route = *episode.route;
  Tape tape(model.params);
  model::EpisodeGraph net(tape, cfg, episode.tokens);
  std::vector<double> obs(env.renderer->config().grid * env.renderer->config().grid *
                          world::channel_count(env.renderer->config()));

  RolloutResult res;
  auto state = world::start_episode(graph, episode.route, env.t_max);
  res.path.push_back(state.node);
  std::optional<Action> prev;
  while (!state.done) {
    env.renderer->render_into(state.node, state.heading, obs);
    const model::StepVars vars = net.step(obs, prev, state.t);
    model::PolicyOutput out = model::read_output(tape, vars);
    const bool key = graph.is_key_point(state.node);

    Action a;
    if (mode == OracleMode::stop) {
      if (state.node == state.goal()) {
        a = Action::stop;
      } else {
        model::PolicyOutput no_stop = out;
        no_stop.s = {1.0, 0.0};
        if (no_stop.p.size() == world::kActionCount) no_stop.p[3] = -1.0;
        a = model::act(no_stop, key, tau, cfg.key_point_gating);
      }
    } else {
      a = model::act(out, key, tau, cfg.key_point_gating);
      if (mode == OracleMode::direction && a != Action::stop) {
        const auto it = std::find(route.begin(), route.end(), state.node);
        if (it != route.end() && it + 1 != route.end()) {
          if (auto ref = world::action_between(graph, state.node, state.heading, *(it + 1))) a = *ref;
        }
      }
    }
    res.outputs.push_back(std::move(out));
    res.actions.push_back(a);
    res.key_point.push_back(key);
    state = world::step(state, a);
    if (a != Action::stop) res.path.push_back(state.node);
    prev = a;
  }
  return res;
}

Evaluation evaluate_model(const Model& model, const Environment& env, std::span<const Episode> episodes, double tau,
                          OracleMode mode, const eval::MetricsConfig& metrics) {
  if (episodes.empty()) throw Error(ErrorCode::invalid_argument, "evaluate_model: no episodes");
  Evaluation ev;
  ev.pairs.reserve(episodes.size());
  for (const auto& e : episodes) {
    auto r = rollout(model, env, e, tau, mode);
    ev.pairs.push_back({std::move(r.path), *e.route});
  }
  ev.report = eval::evaluate(*env.graph, ev.pairs, metrics);
  return ev;
}

TrainResult train(Model& model, const Environment& env, std::span<const Episode> train_set,
                  std::span<const Episode> dev_set, const TrainConfig& config, std::uint64_t seed,
                  const std::function<void(const EpochStats&)>& on_epoch) {
  if (config.epochs == 0) throw Error(ErrorCode::invalid_argument, "train: epochs must be positive");
  if (!(config.tau >= 0.0 && config.tau <= 1.0)) throw Error(ErrorCode::invalid_argument, "train: tau must lie in [0, 1]");
  TrainResult result;
  numeric::ParamStore best = model.params;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochStats stats;
    try {
      stats = train_epoch(model, env, train_set, config.loss, config.adam, seed, epoch);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::divergence) throw;
      result.diverged = true;
      result.divergence = e.what();
      break;
    }
    const auto start = std::chrono::steady_clock::now();
    const Evaluation dev = evaluate_model(model, env, dev_set, config.tau, OracleMode::none, config.metrics);
    stats.dev_tc = dev.report.mean.tc;
    stats.dev_sed = dev.report.mean.sed;
    stats.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (stats.dev_tc > result.best_dev_tc) {
      result.best_dev_tc = stats.dev_tc;
      result.best_epoch = epoch;
      best = model.params;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  if (result.best_epoch > 0) model.params = std::move(best);
  return result;
}

}  // namespace stopnav::training
