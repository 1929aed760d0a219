#include "stopnav/eval/metrics.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <json.hpp>
#include <sstream>

#include "stopnav/error.hpp"

namespace stopnav::eval {

void validate(const MetricsConfig& config) {
  if (!(config.dtw_threshold > 0.0)) throw Error(ErrorCode::invalid_argument, "metrics: dtw_threshold must be positive");
  if (!(config.cls_theta > 0.0)) throw Error(ErrorCode::invalid_argument, "metrics: cls_theta must be positive");
}

void check_pair(const CityGraph& graph, const TrajectoryPair& pair) {
  for (const auto* seq : {&pair.predicted, &pair.reference}) {
    if (seq->empty()) throw Error(ErrorCode::invalid_argument, "metrics: empty trajectory");
    for (std::size_t i = 0; i < seq->size(); ++i) {
      if ((*seq)[i] >= graph.size()) throw Error(ErrorCode::invalid_argument, "metrics: node out of range");
      if (i > 0 && !graph.adjacent((*seq)[i - 1], (*seq)[i])) {
        throw Error(ErrorCode::invalid_argument, "metrics: trajectory step " + std::to_string(i) + " is not an edge");
      }
    }
  }
}

int task_completion(const CityGraph& graph, const TrajectoryPair& pair, std::size_t radius) {
  return graph.hops(pair.predicted.back(), pair.reference.back()) <= radius ? 1 : 0;
}

std::size_t spd(const CityGraph& graph, const TrajectoryPair& pair) {
  return graph.hops(pair.predicted.back(), pair.reference.back());
}

double sed(const CityGraph& graph, const TrajectoryPair& pair, std::size_t radius) {
  if (!task_completion(graph, pair, radius)) return 0.0;
  const double ed = static_cast<double>(
      edit_distance<NodeIndex>(std::span<const NodeIndex>(pair.predicted), std::span<const NodeIndex>(pair.reference)));
  const double norm = static_cast<double>(std::max(pair.predicted.size(), pair.reference.size()));
  return std::max(0.0, 1.0 - ed / norm);
}

double dtw(const CityGraph& graph, std::span<const NodeIndex> p, std::span<const NodeIndex> r) {
  if (p.empty() || r.empty()) throw Error(ErrorCode::invalid_argument, "dtw: empty sequence");
  const std::size_t m = r.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= p.size(); ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= m; ++j) {
      const double cost = static_cast<double>(graph.hops(p[i - 1], r[j - 1]));
      cur[j] = cost + std::min({prev[j], cur[j - 1], prev[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double sdtw(const CityGraph& graph, const TrajectoryPair& pair, double d_th, std::size_t radius) {
  if (!(d_th > 0.0)) throw Error(ErrorCode::invalid_argument, "sdtw: threshold must be positive");
  if (!task_completion(graph, pair, radius)) return 0.0;
  const double cost = dtw(graph, pair.predicted, pair.reference);
  return std::exp(-cost / (static_cast<double>(pair.reference.size()) * d_th));
}

double cls(const CityGraph& graph, const TrajectoryPair& pair, double theta) {
  if (!(theta > 0.0)) throw Error(ErrorCode::invalid_argument, "cls: theta must be positive");
  double coverage = 0.0;
  for (NodeIndex r : pair.reference) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (NodeIndex p : pair.predicted) best = std::min(best, graph.hops(r, p));
    coverage += std::exp(-static_cast<double>(best) / theta);
  }
  const double pc = coverage / static_cast<double>(pair.reference.size());
  const double epl = pc * static_cast<double>(pair.reference.size());
  const double denom = epl + std::fabs(epl - static_cast<double>(pair.predicted.size()));
  if (denom <= 0.0) return 0.0;
  return pc * (epl / denom);
}

EpisodeMetrics score(const CityGraph& graph, const TrajectoryPair& pair, const MetricsConfig& config) {
  check_pair(graph, pair);
  EpisodeMetrics m;
  m.tc = task_completion(graph, pair, config.tc_radius);
  m.spd = static_cast<double>(spd(graph, pair));
  m.sed = sed(graph, pair, config.tc_radius);
  m.cls = cls(graph, pair, config.cls_theta);
  m.sdtw = sdtw(graph, pair, config.dtw_threshold, config.tc_radius);
  return m;
}

EpisodeMetrics mean_of(std::span<const EpisodeMetrics> episodes) {
  EpisodeMetrics m;
  if (episodes.empty()) return m;
  for (const auto& e : episodes) {
    m.tc += e.tc;
    m.spd += e.spd;
    m.sed += e.sed;
    m.cls += e.cls;
    m.sdtw += e.sdtw;
  }
  const double n = static_cast<double>(episodes.size());
  m.tc /= n;
  m.spd /= n;
  m.sed /= n;
  m.cls /= n;
  m.sdtw /= n;
  return m;
}

MetricsReport make_report(std::vector<EpisodeMetrics> episodes) {
  MetricsReport r;
  r.episodes = std::move(episodes);
  r.mean = mean_of(r.episodes);
  return r;
}

MetricsReport evaluate(const CityGraph& graph, std::span<const TrajectoryPair> pairs, const MetricsConfig& config) {
  validate(config);
  if (pairs.empty()) throw Error(ErrorCode::invalid_argument, "evaluate: no episodes");
  std::vector<EpisodeMetrics> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(score(graph, p, config));
  return make_report(std::move(out));
}

namespace {

std::string csv_row(const std::string& label, const EpisodeMetrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f,%.4f,%.4f,%.4f\n", label.c_str(), m.tc, m.spd, m.sed, m.cls, m.sdtw);
  return buf;
}

std::string ids_text(std::span<const NodeIndex> seq, const CityGraph& graph) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(graph.node(seq[i]).id);
  }
  return out;
}

std::vector<NodeIndex> parse_ids(std::string_view text, const CityGraph& graph, std::size_t line) {
  std::vector<NodeIndex> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto tok = text.substr(pos, end - pos);
    std::int64_t id = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), id);
    if (tok.empty() || ec != std::errc{} || p != tok.data() + tok.size()) {
      throw Error(ErrorCode::parse_error, "trajectory line " + std::to_string(line) + ": bad node id '" +
                                              std::string(tok) + "'");
    }
    auto idx = graph.index_of(id);
    if (!idx) {
      throw Error(ErrorCode::parse_error, "trajectory line " + std::to_string(line) + ": unknown node " + std::to_string(id));
    }
    out.push_back(*idx);
    pos = end + 1;
  }
  return out;
}

}  // namespace

std::string report_csv(const MetricsReport& report) {
  if (report.episodes.empty()) throw Error(ErrorCode::invalid_argument, "report_csv: empty report");
  std::string out = "episode,tc,spd,sed,cls,sdtw\n";
  for (std::size_t i = 0; i < report.episodes.size(); ++i) out += csv_row(std::to_string(i), report.episodes[i]);
  out += csv_row("mean", report.mean);
  return out;
}

std::string report_json_lines(const MetricsReport& report) {
  if (report.episodes.empty()) throw Error(ErrorCode::invalid_argument, "report_json_lines: empty report");
  std::string out;
  for (std::size_t i = 0; i < report.episodes.size(); ++i) {
    const auto& m = report.episodes[i];
    nlohmann::ordered_json j;
    j["episode"] = i;
    j["tc"] = m.tc;
    j["spd"] = m.spd;
    j["sed"] = m.sed;
    j["cls"] = m.cls;
    j["sdtw"] = m.sdtw;
    out += j.dump();
    out += '\n';
  }
  return out;
}

MetricsReport parse_report_json_lines(std::string_view document) {
  std::vector<EpisodeMetrics> eps;
  std::size_t pos = 0, line = 0;
  while (pos < document.size()) {
    std::size_t end = document.find('\n', pos);
    if (end == std::string_view::npos) end = document.size();
    ++line;
    const auto text = document.substr(pos, end - pos);
    pos = end + 1;
    if (text.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(text);
      eps.push_back({j.at("tc").get<double>(), j.at("spd").get<double>(), j.at("sed").get<double>(),
                     j.at("cls").get<double>(), j.at("sdtw").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse_error, "report line " + std::to_string(line) + ": " + e.what());
    }
  }
  return make_report(std::move(eps));
}

std::string save_trajectories(const CityGraph& graph, std::span<const TrajectoryPair> pairs) {
  std::string out;
  for (const auto& p : pairs) {
    out += ids_text(p.predicted, graph);
    out += '\t';
    out += ids_text(p.reference, graph);
    out += '\n';
  }
  return out;
}

std::vector<TrajectoryPair> load_trajectories(const CityGraph& graph, std::string_view document) {
  std::vector<TrajectoryPair> out;
  std::size_t pos = 0, line = 0;
  while (pos < document.size()) {
    std::size_t end = document.find('\n', pos);
    if (end == std::string_view::npos) end = document.size();
    ++line;
    const auto text = document.substr(pos, end - pos);
    pos = end + 1;
    if (text.empty()) continue;
    const auto tab = text.find('\t');
    if (tab == std::string_view::npos) {
      throw Error(ErrorCode::parse_error, "trajectory line " + std::to_string(line) + ": expected 2 tab-separated fields");
    }
    TrajectoryPair p{parse_ids(text.substr(0, tab), graph, line), parse_ids(text.substr(tab + 1), graph, line)};
    check_pair(graph, p);
    out.push_back(std::move(p));
  }
  return out;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::io_error, "write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::not_found, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace stopnav::eval
