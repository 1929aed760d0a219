#include "stopnav/harness/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <vector>

#include "stopnav/error.hpp"
#include "stopnav/eval/metrics.hpp"
#include "stopnav/world/graph_io.hpp"

namespace stopnav::harness {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* expected) {
  throw Error(ErrorCode::config_error, key + ": expected " + expected + ", got '" + value + "'");
}

std::size_t as_size(const std::string& k, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || p != v.data() + v.size()) bad(k, v, "a nonnegative integer");
  return out;
}

std::uint64_t as_u64(const std::string& k, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || p != v.data() + v.size()) bad(k, v, "a nonnegative integer");
  return out;
}

double as_real(const std::string& k, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || p != v.data() + v.size()) bad(k, v, "a real number");
  return out;
}

bool as_bool(const std::string& k, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad(k, v, "true or false");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto size_key = [&](const char* key, std::size_t ExperimentConfig::*field) {
      t[key] = [field](ExperimentConfig& c, const std::string& k, const std::string& v) { c.*field = as_size(k, v); };
    };
    t["city.nodes"] = [](auto& c, auto& k, auto& v) { c.city.node_count = as_size(k, v); };
    t["city.spacing"] = [](auto& c, auto& k, auto& v) { c.city.spacing = as_real(k, v); };
    t["city.block_length"] = [](auto& c, auto& k, auto& v) { c.city.block_length = as_size(k, v); };
    t["city.jitter"] = [](auto& c, auto& k, auto& v) { c.city.jitter = as_real(k, v); };
    t["city.edge_drop"] = [](auto& c, auto& k, auto& v) { c.city.edge_drop = as_real(k, v); };
    t["city.landmark_density"] = [](auto& c, auto& k, auto& v) { c.city.landmark_density = as_real(k, v); };
    t["city.distractor_bias"] = [](auto& c, auto& k, auto& v) { c.city.distractor_bias = as_real(k, v); };
    t["city.max_degree"] = [](auto& c, auto& k, auto& v) { c.city.max_degree = as_size(k, v); };
    t["city.seed"] = [](auto& c, auto& k, auto& v) { c.city_seed = as_u64(k, v); };
    t["world.grid"] = [](auto& c, auto& k, auto& v) { c.observation.grid = as_size(k, v); };
    t["world.view_range"] = [](auto& c, auto& k, auto& v) { c.observation.view_range = as_real(k, v); };
    t["world.landmark_offset"] = [](auto& c, auto& k, auto& v) { c.observation.landmark_offset = as_real(k, v); };
    t["world.roads"] = [](auto& c, auto& k, auto& v) { c.observation.render_roads = as_bool(k, v); };
    size_key("world.t_max", &ExperimentConfig::t_max);
    t["route.min_length"] = [](auto& c, auto& k, auto& v) { c.route.min_length = as_size(k, v); };
    t["route.max_length"] = [](auto& c, auto& k, auto& v) { c.route.max_length = as_size(k, v); };
    t["route.min_key_points"] = [](auto& c, auto& k, auto& v) { c.route.min_key_points = as_size(k, v); };
    t["route.max_attempts"] = [](auto& c, auto& k, auto& v) { c.route.max_attempts = as_size(k, v); };
    t["data.train"] = [](auto& c, auto& k, auto& v) { c.data.train = as_size(k, v); };
    t["data.dev"] = [](auto& c, auto& k, auto& v) { c.data.dev = as_size(k, v); };
    t["data.test"] = [](auto& c, auto& k, auto& v) { c.data.test = as_size(k, v); };
    t["data.seed"] = [](auto& c, auto& k, auto& v) { c.data.seed = as_u64(k, v); };
    t["language.max_length"] = [](auto& c, auto& k, auto& v) { c.language.max_length = as_size(k, v); };
    t["language.ordinal_prob"] = [](auto& c, auto& k, auto& v) { c.language.ordinal_prob = as_real(k, v); };
    t["language.preamble_prob"] = [](auto& c, auto& k, auto& v) { c.language.preamble_prob = as_real(k, v); };
    t["model.preset"] = [](auto& c, auto& k, auto& v) {
      if (v != "desk" && v != "large") bad(k, v, "desk or large");
      c.model_preset = v;
    };
    for (const char* key : {"model.word_embed", "model.text_hidden", "model.conv1_filters", "model.conv1_kernel",
                            "model.conv1_stride", "model.conv2_filters", "model.conv2_kernel", "model.conv2_stride",
                            "model.visual", "model.trajectory_hidden", "model.action_embed", "model.time_embed",
                            "model.variant", "model.key_point_gating"}) {
      t[key] = [](auto& c, auto& k, auto& v) { c.model = model::from_key_values({{k, v}}, c.model); };
    }
    t["loss.lambda"] = [](auto& c, auto& k, auto& v) { c.loss.lambda = as_real(k, v); };
    t["loss.gamma"] = [](auto& c, auto& k, auto& v) { c.loss.gamma = as_real(k, v); };
    t["policy.tau"] = [](auto& c, auto& k, auto& v) { c.tau = as_real(k, v); };
    t["optim.lr"] = [](auto& c, auto& k, auto& v) { c.optim.learning_rate = as_real(k, v); };
    t["optim.beta1"] = [](auto& c, auto& k, auto& v) { c.optim.beta1 = as_real(k, v); };
    t["optim.beta2"] = [](auto& c, auto& k, auto& v) { c.optim.beta2 = as_real(k, v); };
    t["optim.eps"] = [](auto& c, auto& k, auto& v) { c.optim.epsilon = as_real(k, v); };
    size_key("train.epochs", &ExperimentConfig::epochs);
    size_key("train.patience", &ExperimentConfig::patience);
    t["eval.tc_radius"] = [](auto& c, auto& k, auto& v) { c.metrics.tc_radius = as_size(k, v); };
    t["eval.dtw_threshold"] = [](auto& c, auto& k, auto& v) { c.metrics.dtw_threshold = as_real(k, v); };
    t["eval.cls_theta"] = [](auto& c, auto& k, auto& v) { c.metrics.cls_theta = as_real(k, v); };
    return t;
  }();
  return table;
}

std::string real(double v) { return world::format_double(v); }

}  // namespace

std::map<std::string, std::string> to_key_values(const ExperimentConfig& c) {
  auto s = [](std::uint64_t v) { return std::to_string(v); };
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  std::map<std::string, std::string> kv = {
      {"city.nodes", s(c.city.node_count)},
      {"city.spacing", real(c.city.spacing)},
      {"city.block_length", s(c.city.block_length)},
      {"city.jitter", real(c.city.jitter)},
      {"city.edge_drop", real(c.city.edge_drop)},
      {"city.landmark_density", real(c.city.landmark_density)},
      {"city.distractor_bias", real(c.city.distractor_bias)},
      {"city.max_degree", s(c.city.max_degree)},
      {"city.seed", s(c.city_seed)},
      {"world.grid", s(c.observation.grid)},
      {"world.view_range", real(c.observation.view_range)},
      {"world.landmark_offset", real(c.observation.landmark_offset)},
      {"world.roads", b(c.observation.render_roads)},
      {"world.t_max", s(c.t_max)},
      {"route.min_length", s(c.route.min_length)},
      {"route.max_length", s(c.route.max_length)},
      {"route.min_key_points", s(c.route.min_key_points)},
      {"route.max_attempts", s(c.route.max_attempts)},
      {"data.train", s(c.data.train)},
      {"data.dev", s(c.data.dev)},
      {"data.test", s(c.data.test)},
      {"data.seed", s(c.data.seed)},
      {"language.max_length", s(c.language.max_length)},
      {"language.ordinal_prob", real(c.language.ordinal_prob)},
      {"language.preamble_prob", real(c.language.preamble_prob)},
      {"model.preset", c.model_preset},
      {"loss.lambda", real(c.loss.lambda)},
      {"loss.gamma", real(c.loss.gamma)},
      {"policy.tau", real(c.tau)},
      {"optim.lr", real(c.optim.learning_rate)},
      {"optim.beta1", real(c.optim.beta1)},
      {"optim.beta2", real(c.optim.beta2)},
      {"optim.eps", real(c.optim.epsilon)},
      {"train.epochs", s(c.epochs)},
      {"train.patience", s(c.patience)},
      {"eval.tc_radius", s(c.metrics.tc_radius)},
      {"eval.dtw_threshold", real(c.metrics.dtw_threshold)},
      {"eval.cls_theta", real(c.metrics.cls_theta)},
  };
  for (auto& [k, v] : model::to_key_values(c.model)) {
    if (setters().contains(k)) kv[k] = v;
  }
  return kv;
}

std::string to_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& [k, v] : to_key_values(config)) out += k + "=" + v + "\n";
  return out;
}

ExperimentConfig apply_overrides(ExperimentConfig c, const std::map<std::string, std::string>& kv) {
  if (auto it = kv.find("model.preset"); it != kv.end()) {
    setters().at("model.preset")(c, it->first, it->second);
    if (c.model_preset == "large") {
      const auto variant = c.model.variant;
      const bool gating = c.model.key_point_gating;
      c.model = model::large_preset();
      c.model.variant = variant;
      c.model.key_point_gating = gating;
      c.observation.grid = c.model.obs_grid;
      c.optim.learning_rate = 2.5e-4;
    }
  }
  for (const auto& [k, v] : kv) {
    if (k == "model.preset") continue;
    auto it = setters().find(k);
    if (it == setters().end()) throw Error(ErrorCode::config_error, "unknown key '" + k + "'");
    it->second(c, k, v);
  }
  return c;
}

ExperimentConfig parse_config(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string line(text.substr(pos, end - pos));
    pos = end + 1;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::config_error, "config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second) {
      throw Error(ErrorCode::config_error, "config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  ExperimentConfig c = apply_overrides(ExperimentConfig{}, kv);
  validate(c);
  return c;
}

ExperimentConfig read_config(const std::string& path) { return parse_config(eval::read_text(path)); }

model::ModelConfig resolved_model(const ExperimentConfig& c) {
  model::ModelConfig m = c.model;
  m.vocab_size = language::instruction_vocabulary().size();
  m.obs_channels = world::channel_count(c.observation);
  m.obs_grid = c.observation.grid;
  m.t_max = c.t_max;
  return m;
}

void validate(const ExperimentConfig& c) {
  try {
    world::validate(c.city);
    world::validate(c.observation);
    world::validate(c.route);
    language::validate(c.language);
    model::validate(resolved_model(c));
    training::validate(c.loss);
    numeric::validate(c.optim);
    eval::validate(c.metrics);
  } catch (const Error& e) {
    throw Error(ErrorCode::config_error, e.what());
  }
  if (c.t_max == 0) throw Error(ErrorCode::config_error, "world.t_max must be positive");
  if (c.route.max_length > c.t_max) throw Error(ErrorCode::config_error, "route.max_length must not exceed world.t_max");
  if (!(c.tau >= 0.0 && c.tau <= 1.0)) throw Error(ErrorCode::config_error, "policy.tau must lie in [0, 1]");
  if (c.epochs == 0) throw Error(ErrorCode::config_error, "train.epochs must be positive");
  if (c.data.train == 0 || c.data.dev == 0) throw Error(ErrorCode::config_error, "data.train and data.dev must be positive");
}

}  // namespace stopnav::harness
