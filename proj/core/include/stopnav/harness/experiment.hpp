#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "stopnav/eval/metrics.hpp"
#include "stopnav/harness/config.hpp"
#include "stopnav/language/dataset.hpp"
#include "stopnav/training/trainer.hpp"
#include "stopnav/world/city_graph.hpp"
#include "stopnav/world/observation.hpp"

namespace stopnav::harness {

std::string_view version() noexcept;

enum class Split : std::uint8_t { train, dev, test };
std::string_view to_string(Split s) noexcept;

/// The generated city and the three dataset splits, plus the episodes built
/// from them. Routes are disjoint across splits.
class Workspace {
 public:
  explicit Workspace(const ExperimentConfig& config);

  const ExperimentConfig& config() const noexcept { return config_; }
  const world::CityGraph& graph() const noexcept { return *graph_; }
  training::Environment environment() const noexcept { return {graph_.get(), renderer_.get(), config_.t_max}; }
  const std::vector<language::DatasetRecord>& records(Split s) const { return records_[static_cast<int>(s)]; }
  const std::vector<training::Episode>& episodes(Split s) const { return episodes_[static_cast<int>(s)]; }

  /// city.graph, train.tsv, dev.tsv, test.tsv.
  void write(const std::filesystem::path& dir) const;

 private:
  ExperimentConfig config_;
  std::unique_ptr<world::CityGraph> graph_;
  std::unique_ptr<world::ObservationRenderer> renderer_;
  std::array<std::vector<language::DatasetRecord>, 3> records_;
  std::array<std::vector<training::Episode>, 3> episodes_;
};

using RouteSet = std::set<std::vector<world::NodeIndex>>;

/// Route + instruction records for one split; `taken` holds routes already
/// used by earlier splits and is extended. Record i of a split is generated
/// from derive_seed(data.seed, "<split>:<k>") for the k-th attempt.
std::vector<language::DatasetRecord> sample_split(const ExperimentConfig& config, const world::CityGraph& graph,
                                                  Split split, std::size_t count, RouteSet& taken);

std::vector<training::Episode> make_episodes(const world::CityGraph& graph,
                                             std::span<const language::DatasetRecord> records);

/// Writes the dataset files and returns the record counts per split.
std::array<std::size_t, 3> make_dataset(const ExperimentConfig& config, const std::filesystem::path& out);

struct Summary {
  eval::EpisodeMetrics mean;  // mean over seeds of the per-seed means
  double tc_min = 0.0;
  double tc_max = 0.0;
};
Summary summarize(std::span<const eval::EpisodeMetrics> per_seed);

struct SeedResult {
  std::uint64_t seed = 0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  bool diverged = false;
  std::string divergence;
  eval::MetricsReport dev;
  eval::MetricsReport test;
  double wall_seconds = 0.0;
};

struct RunManifest {
  std::string config_text;
  std::string version;
  std::vector<SeedResult> seeds;
  Summary dev;
  Summary test;
  double wall_seconds = 0.0;
};

using Logger = std::function<void(const std::string&)>;

/// Per seed: initialize from the seed, train with dev-TC early stopping,
/// evaluate dev and test, and write seed_<s>/{checkpoint.json, model.cfg,
/// train_log.tsv, {dev,test}_report.{csv,jsonl}, {dev,test}_trajectories.tsv}.
/// Writes data/ and manifest.json under `out`. A diverged seed is recorded
/// and the run continues. `config` supplies model, loss and training
/// settings; the data come from `ws`.
RunManifest run_experiment(const Workspace& ws, const ExperimentConfig& config, std::span<const std::uint64_t> seeds,
                           const std::filesystem::path& out, const Logger& log = {});
RunManifest run_experiment(const ExperimentConfig& config, std::span<const std::uint64_t> seeds,
                           const std::filesystem::path& out, const Logger& log = {});

std::string manifest_json(const RunManifest& manifest);
std::string train_log_tsv(std::span<const training::EpochStats> log);

/// Loads seed_<s>/model.cfg and checkpoint.json; not_found if missing.
training::Model load_model(const std::filesystem::path& seed_dir);
std::filesystem::path seed_dir(const std::filesystem::path& out, std::uint64_t seed);

enum class Ablation : std::uint8_t { full, one_branch, no_key_points, no_weighting };
std::string_view to_string(Ablation a) noexcept;
std::optional<Ablation> parse_ablation(std::string_view name) noexcept;
/// FULL unchanged; ONE_BRANCH 4-way head; NO_KEY_POINTS gating off;
/// NO_WEIGHTING lambda = 1.
ExperimentConfig ablation_config(const ExperimentConfig& base, Ablation a);

struct TableRow {
  std::string label;
  Summary dev;
  Summary test;
};

/// CSV with header `<label>,split,tc,tc_min,tc_max,spd,sed,cls,sdtw`; one
/// dev row per entry, then one test row per entry when requested.
std::string table_csv(std::string_view label_name, std::span<const TableRow> rows, bool include_test);

/// Trains every variant on the same workspace and seeds under out/<VARIANT>/
/// and writes out/ablation.csv.
std::vector<TableRow> ablate(const ExperimentConfig& config, std::span<const Ablation> variants,
                             std::span<const std::uint64_t> seeds, const std::filesystem::path& out,
                             const Logger& log = {});

/// Dev and test evaluation of a trained model under an oracle mode.
struct OracleResult {
  eval::MetricsReport dev;
  eval::MetricsReport test;
};
OracleResult oracle_eval(const Workspace& ws, const training::Model& model, training::OracleMode mode);

/// Evaluates seed_<s> checkpoints under `checkpoints` for every mode, writes
/// reports under out/oracle_<mode>/seed_<s>/ and out/oracle.csv.
std::vector<TableRow> run_oracle_eval(const ExperimentConfig& config, std::span<const std::uint64_t> seeds,
                                      const std::filesystem::path& checkpoints,
                                      std::span<const training::OracleMode> modes, const std::filesystem::path& out,
                                      const Logger& log = {});

enum class SweepParam : std::uint8_t { tau, gamma, lambda };
std::string_view to_string(SweepParam p) noexcept;
std::optional<SweepParam> parse_sweep_param(std::string_view name) noexcept;
/// Rejects an empty list and out-of-domain values.
void check_sweep_values(SweepParam p, std::span<const double> values);

/// tau: one checkpoint per seed (out/seed_<s>, trained only if absent),
/// inference only. gamma/lambda: retrain per value under
/// out/sweep_<param>_<value>/. Writes out/sweep_<param>.csv (dev metrics).
std::vector<TableRow> sweep(const ExperimentConfig& config, SweepParam param, std::span<const double> values,
                            std::span<const std::uint64_t> seeds, const std::filesystem::path& out,
                            const Logger& log = {});

/// Evaluates existing seed_<s> checkpoints on dev and test and writes
/// eval_{dev,test}_report.csv next to them.
std::vector<SeedResult> evaluate_checkpoints(const ExperimentConfig& config, std::span<const std::uint64_t> seeds,
                                             const std::filesystem::path& out, const Logger& log = {});

}  // namespace stopnav::harness
