#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stopnav/eval/metrics.hpp"
#include "stopnav/language/vocabulary.hpp"
#include "stopnav/model/network.hpp"
#include "stopnav/numeric/adam.hpp"
#include "stopnav/training/losses.hpp"
#include "stopnav/world/observation.hpp"

namespace stopnav::training {

using world::Action;
using world::NodeIndex;

struct Environment {
  const world::CityGraph* graph = nullptr;
  const world::ObservationRenderer* renderer = nullptr;
  std::size_t t_max = 40;
};

struct Episode {
  std::shared_ptr<const std::vector<NodeIndex>> route;
  std::vector<language::TokenId> tokens;
};

struct Model {
  model::ModelConfig config;
  numeric::ParamStore params;
};

/// Ground truth for one route: the reference actions, direction labels q
/// (forward/left/right index where direction supervision applies) and the
/// non-stop signal o (1 = continue, 0 only at the final step).
struct SupervisionTrace {
  std::vector<Action> actions;
  std::vector<std::optional<std::size_t>> q;
  std::vector<int> o;
  std::vector<bool> key_point;
};

/// With gating, q is set at key-point steps only; without, at every step
/// before the last.
SupervisionTrace make_trace(const world::CityGraph& graph, std::span<const NodeIndex> route, bool key_point_gating);

struct EpisodeLoss {
  numeric::Var total;
  double direction = 0.0;
  double stop = 0.0;
  double value = 0.0;
};

/// Drives the environment along the reference actions, records the network
/// and the loss on `tape`. Two-branch: L_dir over q, L_stop over o with the
/// stop step weighted by lambda. ONE_BRANCH: L_dir is the 4-way
/// cross-entropy of the moves, L_stop lambda times that of the final STOP.
/// Total = gamma L_dir + (1 - gamma) L_stop.
EpisodeLoss record_episode_loss(numeric::Tape& tape, const model::ModelConfig& config, const Environment& env,
                                const Episode& episode, const LossConfig& loss);

struct EpochStats {
  std::size_t epoch = 0;
  double direction = 0.0;  // means over episodes
  double stop = 0.0;
  double total = 0.0;
  double dev_tc = 0.0;
  double dev_sed = 0.0;
  double seconds = 0.0;
};

/// One pass over `episodes` in a shuffled order fixed by (seed, epoch), one
/// optimizer step per episode. A non-finite loss or gradient throws
/// divergence before the parameters are touched.
EpochStats train_epoch(Model& model, const Environment& env, std::span<const Episode> episodes, const LossConfig& loss,
                       const numeric::AdamConfig& adam, std::uint64_t seed, std::size_t epoch);

enum class OracleMode : std::uint8_t { none = 0, direction = 1, stop = 2 };

std::string_view to_string(OracleMode mode) noexcept;
/// Rejects combined flags.
void validate(OracleMode mode);

struct RolloutResult {
  std::vector<NodeIndex> path;  // visited nodes, start included
  std::vector<Action> actions;
  std::vector<model::PolicyOutput> outputs;
  std::vector<bool> key_point;  // per action, whether it was taken at a key point
};

/// Greedy execution. ORACLE_DIRECTION replaces the move with the reference
/// action whenever the agent is on the route before the goal and the heading
/// rule can reach the next route node; ORACLE_STOP stops exactly at the goal
/// and never elsewhere.
RolloutResult rollout(const Model& model, const Environment& env, const Episode& episode, double tau,
                      OracleMode mode = OracleMode::none);

struct Evaluation {
  eval::MetricsReport report;
  std::vector<eval::TrajectoryPair> pairs;
};

Evaluation evaluate_model(const Model& model, const Environment& env, std::span<const Episode> episodes, double tau,
                          OracleMode mode = OracleMode::none, const eval::MetricsConfig& metrics = {});

struct TrainConfig {
  LossConfig loss;
  numeric::AdamConfig adam;
  std::size_t epochs = 40;
  std::size_t patience = 10;
  double tau = 0.5;
  eval::MetricsConfig metrics;
};

struct TrainResult {
  std::vector<EpochStats> log;
  std::size_t best_epoch = 0;  // 1-based; 0 if no epoch finished
  double best_dev_tc = -1.0;
  bool diverged = false;
  std::string divergence;
};

/// Epochs of train_epoch with dev-TC early stopping; the best parameters
/// (first epoch reaching the highest dev TC) are restored on return. A
/// divergence stops training and keeps the best parameters seen so far.
TrainResult train(Model& model, const Environment& env, std::span<const Episode> train_set,
                  std::span<const Episode> dev_set, const TrainConfig& config, std::uint64_t seed,
                  const std::function<void(const EpochStats&)>& on_epoch = {});

}  // namespace stopnav::training
