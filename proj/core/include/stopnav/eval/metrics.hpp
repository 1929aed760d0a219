#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stopnav/world/city_graph.hpp"

namespace stopnav::eval {

using world::CityGraph;
using world::NodeIndex;

struct MetricsConfig {
  std::size_t tc_radius = 1;    // hops from the goal that still count as success
  double dtw_threshold = 2.0;   // hops
  double cls_theta = 2.0;       // hops
};

void validate(const MetricsConfig& config);

/// Predicted path P and reference R; both nonempty with consecutive nodes
/// adjacent.
struct TrajectoryPair {
  std::vector<NodeIndex> predicted;
  std::vector<NodeIndex> reference;
  friend bool operator==(const TrajectoryPair&, const TrajectoryPair&) = default;
};

/// Throws invalid_argument on an empty or non-adjacent sequence.
void check_pair(const CityGraph& graph, const TrajectoryPair& pair);

int task_completion(const CityGraph& graph, const TrajectoryPair& pair, std::size_t radius = 1);
std::size_t spd(const CityGraph& graph, const TrajectoryPair& pair);

/// Levenshtein distance with unit costs.
template <class T>
std::size_t edit_distance(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

double sed(const CityGraph& graph, const TrajectoryPair& pair, std::size_t radius = 1);

/// Classic DTW with hop distance as the per-pair cost.
double dtw(const CityGraph& graph, std::span<const NodeIndex> p, std::span<const NodeIndex> r);
double sdtw(const CityGraph& graph, const TrajectoryPair& pair, double d_th = 2.0, std::size_t radius = 1);
double cls(const CityGraph& graph, const TrajectoryPair& pair, double theta = 2.0);

struct EpisodeMetrics {
  double tc = 0.0;
  double spd = 0.0;
  double sed = 0.0;
  double cls = 0.0;
  double sdtw = 0.0;
  friend bool operator==(const EpisodeMetrics&, const EpisodeMetrics&) = default;
};

EpisodeMetrics score(const CityGraph& graph, const TrajectoryPair& pair, const MetricsConfig& config = {});

struct MetricsReport {
  std::vector<EpisodeMetrics> episodes;
  EpisodeMetrics mean;
  std::size_t count() const noexcept { return episodes.size(); }
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Arithmetic means in episode order.
EpisodeMetrics mean_of(std::span<const EpisodeMetrics> episodes);
MetricsReport make_report(std::vector<EpisodeMetrics> episodes);
/// Throws invalid_argument on an empty set.
MetricsReport evaluate(const CityGraph& graph, std::span<const TrajectoryPair> pairs, const MetricsConfig& config = {});

/// Header `episode,tc,spd,sed,cls,sdtw`, one row per episode, then a `mean`
/// row; values with 4 decimals.
std::string report_csv(const MetricsReport& report);
/// One JSON object per episode at full precision; means are recomputed on load.
std::string report_json_lines(const MetricsReport& report);
MetricsReport parse_report_json_lines(std::string_view document);

/// Per line: predicted ids, TAB, reference ids (comma-separated node ids).
std::string save_trajectories(const CityGraph& graph, std::span<const TrajectoryPair> pairs);
std::vector<TrajectoryPair> load_trajectories(const CityGraph& graph, std::string_view document);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace stopnav::eval
