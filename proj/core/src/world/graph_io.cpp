#include "stopnav/world/graph_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <vector>

#include "stopnav/error.hpp"

namespace stopnav::world {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t j = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > j) out.push_back(line.substr(j, i - j));
  }
  return out;
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::parse_error, "line " + std::to_string(line) + ": " + what);
}

double parse_real(std::string_view s, std::size_t line, const char* what) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) fail(line, std::string("bad ") + what + " '" + std::string(s) + "'");
  return v;
}

std::int64_t parse_id(std::string_view s, std::size_t line) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) fail(line, "bad node id '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, p);
}

std::string save_graph(const CityGraph& graph) {
  std::string out = "# nodes " + std::to_string(graph.size()) + ", directed edges " +
                    std::to_string(graph.directed_edge_count()) + "\n";
  for (const auto& node : graph.nodes()) {
    out += "N " + std::to_string(node.id) + ' ' + format_double(node.position.x) + ' ' + format_double(node.position.y);
    for (const auto& lm : node.landmarks) {
      out += ' ';
      out += to_string(lm.kind);
      out += ':' + format_double(lm.bearing_deg);
    }
    out += '\n';
  }
  for (NodeIndex v = 0; v < graph.size(); ++v) {
    for (const auto& e : graph.out_edges(v)) {
      out += "E " + std::to_string(graph.node(v).id) + ' ' + std::to_string(graph.node(e.to).id) + ' ' +
             format_double(e.heading_deg) + '\n';
    }
  }
  return out;
}

CityGraph load_graph(std::string_view document, const GraphLimits& limits) {
  std::vector<NodeRecord> nodes;
  std::vector<std::size_t> node_lines;
  std::unordered_map<std::int64_t, NodeIndex> ids;
  struct PendingEdge {
    std::int64_t src, dst;
    double heading;
    std::size_t line;
  };
  std::vector<PendingEdge> pending;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= document.size()) {
    std::size_t end = document.find('\n', pos);
    if (end == std::string_view::npos) end = document.size();
    std::string_view line = document.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = split_ws(line);
    if (tok.empty()) {
      if (end == document.size()) break;
      continue;
    }
    if (tok[0] == "N") {
      if (tok.size() < 4) fail(line_no, "node line needs: N <id> <x> <y> [kind:bearing ...]");
      NodeRecord rec;
      rec.id = parse_id(tok[1], line_no);
      rec.position = {parse_real(tok[2], line_no, "x"), parse_real(tok[3], line_no, "y")};
      for (std::size_t i = 4; i < tok.size(); ++i) {
        const auto colon = tok[i].find(':');
        if (colon == std::string_view::npos) fail(line_no, "landmark must be kind:bearing, got '" + std::string(tok[i]) + "'");
        auto kind = parse_landmark_kind(tok[i].substr(0, colon));
        if (!kind) fail(line_no, "unknown landmark kind '" + std::string(tok[i].substr(0, colon)) + "'");
        const double bearing = parse_real(tok[i].substr(colon + 1), line_no, "bearing");
        if (!(bearing >= 0.0 && bearing < 360.0)) fail(line_no, "landmark bearing out of [0, 360)");
        rec.landmarks.push_back({*kind, bearing});
      }
      if (!ids.emplace(rec.id, static_cast<NodeIndex>(nodes.size())).second) {
        fail(line_no, "duplicate node id " + std::to_string(rec.id));
      }
      nodes.push_back(std::move(rec));
      node_lines.push_back(line_no);
    } else if (tok[0] == "E") {
      if (tok.size() != 4) fail(line_no, "edge line needs: E <src> <dst> <heading_deg>");
      const double heading = parse_real(tok[3], line_no, "heading");
      if (!(heading >= 0.0 && heading < 360.0)) fail(line_no, "heading " + std::string(tok[3]) + " out of [0, 360)");
      pending.push_back({parse_id(tok[1], line_no), parse_id(tok[2], line_no), heading, line_no});
    } else {
      fail(line_no, "unknown record type '" + std::string(tok[0]) + "'");
    }
    if (end == document.size()) break;
  }

  std::vector<Edge> edges;
  edges.reserve(pending.size());
  for (const auto& p : pending) {
    auto src = ids.find(p.src);
    if (src == ids.end()) fail(p.line, "edge references unknown node " + std::to_string(p.src));
    auto dst = ids.find(p.dst);
    if (dst == ids.end()) fail(p.line, "edge references unknown node " + std::to_string(p.dst));
    edges.push_back({src->second, dst->second, p.heading});
  }
  if (auto defect = find_defect(nodes, edges, limits)) {
    std::size_t line = 0;
    if (defect->edge) line = pending[*defect->edge].line;
    else if (defect->node) line = node_lines[*defect->node];
    else fail(line_no, defect->message);
    fail(line, defect->message);
  }
  return CityGraph::build(std::move(nodes), edges, limits);
}

void write_graph(const std::filesystem::path& path, const CityGraph& graph) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + path.string() + " for writing");
  out << save_graph(graph);
  if (!out) throw Error(ErrorCode::io_error, "write failed: " + path.string());
}

CityGraph read_graph(const std::filesystem::path& path, const GraphLimits& limits) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::not_found, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_graph(buf.str(), limits);
}

}  // namespace stopnav::world
