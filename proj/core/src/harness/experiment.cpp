#include "stopnav/harness/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <json.hpp>

#include "stopnav/error.hpp"
#include "stopnav/language/instructions.hpp"
#include "stopnav/model/network.hpp"
#include "stopnav/numeric/checkpoint.hpp"
#include "stopnav/rng.hpp"
#include "stopnav/world/city_gen.hpp"
#include "stopnav/world/graph_io.hpp"
#include "stopnav/world/routes.hpp"

#ifndef STOPNAV_VERSION
#define STOPNAV_VERSION "0.0.0"
#endif

namespace stopnav::harness {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::array<Split, 3> kSplits = {Split::train, Split::dev, Split::test};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void say(const Logger& log, const std::string& line) {
  if (log) log(line);
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

json metrics_json(const eval::EpisodeMetrics& m) {
  return json{{"tc", m.tc}, {"spd", m.spd}, {"sed", m.sed}, {"cls", m.cls}, {"sdtw", m.sdtw}};
}

json summary_json(const Summary& s) {
  json j = metrics_json(s.mean);
  j["tc_min"] = s.tc_min;
  j["tc_max"] = s.tc_max;
  return j;
}

training::TrainConfig train_config(const ExperimentConfig& c) {
  training::TrainConfig t;
  t.loss = c.loss;
  t.adam = c.optim;
  t.epochs = c.epochs;
  t.patience = c.patience;
  t.tau = c.tau;
  t.metrics = c.metrics;
  return t;
}

void write_reports(const fs::path& dir, const std::string& stem, const world::CityGraph& graph,
                   const training::Evaluation& ev) {
  eval::write_text(dir / (stem + "_report.csv"), eval::report_csv(ev.report));
  eval::write_text(dir / (stem + "_report.jsonl"), eval::report_json_lines(ev.report));
  eval::write_text(dir / (stem + "_trajectories.tsv"), eval::save_trajectories(graph, ev.pairs));
}

void check_model_matches(const training::Model& model, const ExperimentConfig& config, const fs::path& where) {
  const auto expected = resolved_model(config);
  const auto& got = model.config;
  if (got.vocab_size != expected.vocab_size || got.obs_channels != expected.obs_channels ||
      got.obs_grid != expected.obs_grid || got.t_max != expected.t_max) {
    throw Error(ErrorCode::config_error, "checkpoint in " + where.string() +
                                             " was trained for a different vocabulary, observation or horizon");
  }
}

Summary summary_of(const std::vector<SeedResult>& results, bool dev) {
  std::vector<eval::EpisodeMetrics> means;
  for (const auto& r : results) means.push_back(dev ? r.dev.mean : r.test.mean);
  return summarize(means);
}

}  // namespace

std::string_view version() noexcept { return STOPNAV_VERSION; }

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "unknown";
}

std::vector<language::DatasetRecord> sample_split(const ExperimentConfig& config, const world::CityGraph& graph,
                                                  Split split, std::size_t count, RouteSet& taken) {
  std::vector<language::DatasetRecord> out;
  out.reserve(count);
  const std::size_t budget = 50 * count + 1000;
  std::size_t misses = 0;
  for (std::size_t k = 0; out.size() < count; ++k) {
    const std::uint64_t seed = derive_seed(config.data.seed, std::string(to_string(split)) + ":" + std::to_string(k));
    auto route = world::sample_route(graph, config.route, seed);
    if (!taken.insert(route).second) {
      if (++misses > budget) {
        throw Error(ErrorCode::unsatisfiable, "dataset: only " + std::to_string(out.size()) + " of " +
                                                  std::to_string(count) + " distinct " +
                                                  std::string(to_string(split)) + " routes found; enlarge the city "
                                                  "or shrink the splits");
      }
      continue;
    }
    language::DatasetRecord rec;
    rec.text = language::generate_instruction_text(graph, route, seed, config.language);
    rec.seed = seed;
    rec.route.reserve(route.size());
    for (auto v : route) rec.route.push_back(graph.node(v).id);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<training::Episode> make_episodes(const world::CityGraph& graph,
                                             std::span<const language::DatasetRecord> records) {
  std::vector<training::Episode> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::vector<world::NodeIndex> route;
    for (auto id : records[i].route) {
      auto v = graph.index_of(id);
      if (!v) throw Error(ErrorCode::not_found, "record " + std::to_string(i + 1) + ": unknown node id " + std::to_string(id));
      route.push_back(*v);
    }
    if (!world::is_simple_path(graph, route)) {
      throw Error(ErrorCode::invalid_argument, "record " + std::to_string(i + 1) + ": route is not a simple path");
    }
    training::Episode ep;
    ep.route = std::make_shared<const std::vector<world::NodeIndex>>(std::move(route));
    ep.tokens = language::tokenize(records[i].text).tokens;
    out.push_back(std::move(ep));
  }
  return out;
}

Workspace::Workspace(const ExperimentConfig& config) : config_(config) {
  validate(config_);
  graph_ = std::make_unique<world::CityGraph>(world::generate_city(config_.city, config_.city_seed));
  renderer_ = std::make_unique<world::ObservationRenderer>(*graph_, config_.observation);
  const std::array<std::size_t, 3> counts = {config_.data.train, config_.data.dev, config_.data.test};
  RouteSet taken;
  for (std::size_t i = 0; i < kSplits.size(); ++i) {
    records_[i] = sample_split(config_, *graph_, kSplits[i], counts[i], taken);
    episodes_[i] = make_episodes(*graph_, records_[i]);
  }
}

void Workspace::write(const fs::path& dir) const {
  fs::create_directories(dir);
  world::write_graph(dir / "city.graph", *graph_);
  for (std::size_t i = 0; i < kSplits.size(); ++i) {
    language::write_dataset(dir / (std::string(to_string(kSplits[i])) + ".tsv"), records_[i]);
  }
}

std::array<std::size_t, 3> make_dataset(const ExperimentConfig& config, const fs::path& out) {
  Workspace ws(config);
  ws.write(out);
  eval::write_text(out / "config.cfg", to_text(config));
  return {ws.records(Split::train).size(), ws.records(Split::dev).size(), ws.records(Split::test).size()};
}

Summary summarize(std::span<const eval::EpisodeMetrics> per_seed) {
  Summary s;
  if (per_seed.empty()) return s;
  s.mean = eval::mean_of(per_seed);
  auto [lo, hi] = std::minmax_element(per_seed.begin(), per_seed.end(),
                                      [](const auto& a, const auto& b) { return a.tc < b.tc; });
  s.tc_min = lo->tc;
  s.tc_max = hi->tc;
  return s;
}

fs::path seed_dir(const fs::path& out, std::uint64_t seed) { return out / ("seed_" + std::to_string(seed)); }

std::string train_log_tsv(std::span<const training::EpochStats> log) {
  std::string out = "epoch\tdirection_loss\tstop_loss\ttotal_loss\tdev_tc\tdev_sed\tseconds\n";
  for (const auto& e : log) {
    out += std::to_string(e.epoch) + "\t" + fixed(e.direction, 6) + "\t" + fixed(e.stop, 6) + "\t" +
           fixed(e.total, 6) + "\t" + fixed(e.dev_tc) + "\t" + fixed(e.dev_sed) + "\t" + fixed(e.seconds, 3) + "\n";
  }
  return out;
}

std::string manifest_json(const RunManifest& m) {
  json j;
  j["version"] = m.version;
  json cfg = json::object();
  for (const auto& [k, v] : to_key_values(parse_config(m.config_text))) cfg[k] = v;
  j["config"] = cfg;
  json seeds = json::array();
  for (const auto& r : m.seeds) {
    json s;
    s["seed"] = r.seed;
    s["epochs_run"] = r.epochs_run;
    s["best_epoch"] = r.best_epoch;
    s["diverged"] = r.diverged;
    if (r.diverged) s["divergence"] = r.divergence;
    s["dev"] = metrics_json(r.dev.mean);
    s["test"] = metrics_json(r.test.mean);
    s["wall_seconds"] = r.wall_seconds;
    seeds.push_back(s);
  }
  j["seeds"] = seeds;
  j["dev"] = summary_json(m.dev);
  j["test"] = summary_json(m.test);
  j["wall_seconds"] = m.wall_seconds;
  return j.dump(2) + "\n";
}

training::Model load_model(const fs::path& dir) {
  const auto cfg_path = dir / "model.cfg";
  const auto ckpt_path = dir / "checkpoint.json";
  for (const auto& p : {cfg_path, ckpt_path}) {
    if (!fs::exists(p)) throw Error(ErrorCode::not_found, "missing " + p.string());
  }
  training::Model model;
  model.config = model::parse_model_config(eval::read_text(cfg_path));
  model.params = numeric::read_checkpoint(ckpt_path);
  model::check_params(model.config, model.params);
  return model;
}

RunManifest run_experiment(const Workspace& ws, const ExperimentConfig& config, std::span<const std::uint64_t> seeds,
                           const fs::path& out, const Logger& log) {
  if (seeds.empty()) throw Error(ErrorCode::invalid_argument, "run: no seeds given");
  validate(config);
  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(out);
  ws.write(out / "data");

  RunManifest m;
  m.config_text = to_text(config);
  m.version = std::string(version());
  eval::write_text(out / "config.cfg", m.config_text);
  const auto env = ws.environment();
  const auto tcfg = train_config(config);

  for (auto seed : seeds) {
    const auto seed_start = std::chrono::steady_clock::now();
    const auto dir = seed_dir(out, seed);
    fs::create_directories(dir);
    training::Model model;
    model.config = resolved_model(config);
    model.params = model::init_params(model.config, seed);
    say(log, "seed " + std::to_string(seed) + ": training " + std::string(model::to_string(model.config.variant)) +
                 " on " + std::to_string(ws.episodes(Split::train).size()) + " episodes");
    auto result = training::train(model, env, ws.episodes(Split::train), ws.episodes(Split::dev), tcfg, seed,
                                  [&](const training::EpochStats& e) {
                                    say(log, "seed " + std::to_string(seed) + " epoch " + std::to_string(e.epoch) +
                                                 " loss " + fixed(e.total) + " dev_tc " + fixed(e.dev_tc) + " (" +
                                                 fixed(e.seconds, 1) + "s)");
                                  });
    SeedResult r;
    r.seed = seed;
    r.epochs_run = result.log.size();
    r.best_epoch = result.best_epoch;
    r.diverged = result.diverged;
    r.divergence = result.divergence;
    if (r.diverged) say(log, "seed " + std::to_string(seed) + " diverged: " + r.divergence);

    auto dev = training::evaluate_model(model, env, ws.episodes(Split::dev), config.tau, training::OracleMode::none,
                                        config.metrics);
    auto test = training::evaluate_model(model, env, ws.episodes(Split::test), config.tau,
                                         training::OracleMode::none, config.metrics);
    numeric::write_checkpoint(model.params, dir / "checkpoint.json");
    eval::write_text(dir / "model.cfg", model::to_text(model.config));
    eval::write_text(dir / "train_log.tsv", train_log_tsv(result.log));
    write_reports(dir, "dev", ws.graph(), dev);
    write_reports(dir, "test", ws.graph(), test);
    r.dev = std::move(dev.report);
    r.test = std::move(test.report);
    r.wall_seconds = seconds_since(seed_start);
    say(log, "seed " + std::to_string(seed) + ": best epoch " + std::to_string(r.best_epoch) + " dev_tc " +
                 fixed(r.dev.mean.tc) + " test_tc " + fixed(r.test.mean.tc));
    m.seeds.push_back(std::move(r));
  }
  m.dev = summary_of(m.seeds, true);
  m.test = summary_of(m.seeds, false);
  m.wall_seconds = seconds_since(start);
  eval::write_text(out / "manifest.json", manifest_json(m));
  return m;
}

RunManifest run_experiment(const ExperimentConfig& config, std::span<const std::uint64_t> seeds, const fs::path& out,
                           const Logger& log) {
  Workspace ws(config);
  return run_experiment(ws, config, seeds, out, log);
}

std::string_view to_string(Ablation a) noexcept {
  switch (a) {
    case Ablation::full: return "FULL";
    case Ablation::one_branch: return "ONE_BRANCH";
    case Ablation::no_key_points: return "NO_KEY_POINTS";
    case Ablation::no_weighting: return "NO_WEIGHTING";
  }
  return "unknown";
}

std::optional<Ablation> parse_ablation(std::string_view name) noexcept {
  for (auto a : {Ablation::full, Ablation::one_branch, Ablation::no_key_points, Ablation::no_weighting}) {
    if (to_string(a) == name) return a;
  }
  return std::nullopt;
}

ExperimentConfig ablation_config(const ExperimentConfig& base, Ablation a) {
  ExperimentConfig c = base;
  switch (a) {
    case Ablation::full: break;
    case Ablation::one_branch: c.model.variant = model::Variant::one_branch; break;
    case Ablation::no_key_points: c.model.key_point_gating = false; break;
    case Ablation::no_weighting: c.loss.lambda = 1.0; break;
  }
  return c;
}

std::string table_csv(std::string_view label_name, std::span<const TableRow> rows, bool include_test) {
  std::string out = std::string(label_name) + ",split,tc,tc_min,tc_max,spd,sed,cls,sdtw\n";
  auto line = [&](const TableRow& r, const char* split, const Summary& s) {
    out += r.label + "," + split + "," + fixed(s.mean.tc) + "," + fixed(s.tc_min) + "," + fixed(s.tc_max) + "," +
           fixed(s.mean.spd) + "," + fixed(s.mean.sed) + "," + fixed(s.mean.cls) + "," + fixed(s.mean.sdtw) + "\n";
  };
  for (const auto& r : rows) line(r, "dev", r.dev);
  if (include_test) {
    for (const auto& r : rows) line(r, "test", r.test);
  }
  return out;
}

std::vector<TableRow> ablate(const ExperimentConfig& config, std::span<const Ablation> variants,
                             std::span<const std::uint64_t> seeds, const fs::path& out, const Logger& log) {
  if (variants.empty()) throw Error(ErrorCode::invalid_argument, "ablate: no variants given");
  Workspace ws(config);
  std::vector<TableRow> rows;
  for (auto a : variants) {
    const std::string name(to_string(a));
    say(log, "ablation " + name);
    auto m = run_experiment(ws, ablation_config(config, a), seeds, out / name, log);
    rows.push_back({name, m.dev, m.test});
    eval::write_text(out / "ablation.csv", table_csv("variant", rows, true));
  }
  return rows;
}

OracleResult oracle_eval(const Workspace& ws, const training::Model& model, training::OracleMode mode) {
  training::validate(mode);
  const auto& c = ws.config();
  const auto env = ws.environment();
  OracleResult r;
  r.dev = training::evaluate_model(model, env, ws.episodes(Split::dev), c.tau, mode, c.metrics).report;
  r.test = training::evaluate_model(model, env, ws.episodes(Split::test), c.tau, mode, c.metrics).report;
  return r;
}

std::vector<TableRow> run_oracle_eval(const ExperimentConfig& config, std::span<const std::uint64_t> seeds,
                                      const fs::path& checkpoints, std::span<const training::OracleMode> modes,
                                      const fs::path& out, const Logger& log) {
  if (seeds.empty()) throw Error(ErrorCode::invalid_argument, "oracle-eval: no seeds given");
  if (modes.empty()) throw Error(ErrorCode::invalid_argument, "oracle-eval: no modes given");
  for (auto mode : modes) training::validate(mode);
  std::vector<training::Model> models;
  for (auto seed : seeds) {
    const auto dir = seed_dir(checkpoints, seed);
    models.push_back(load_model(dir));
    check_model_matches(models.back(), config, dir);
  }
  Workspace ws(config);
  const auto env = ws.environment();
  std::vector<TableRow> rows;
  for (auto mode : modes) {
    const std::string name(to_string(mode));
    std::vector<eval::EpisodeMetrics> dev, test;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const auto dir = out / ("oracle_" + name) / ("seed_" + std::to_string(seeds[i]));
      fs::create_directories(dir);
      auto d = training::evaluate_model(models[i], env, ws.episodes(Split::dev), config.tau, mode, config.metrics);
      auto t = training::evaluate_model(models[i], env, ws.episodes(Split::test), config.tau, mode, config.metrics);
      write_reports(dir, "dev", ws.graph(), d);
      write_reports(dir, "test", ws.graph(), t);
      say(log, "oracle " + name + " seed " + std::to_string(seeds[i]) + ": dev_tc " + fixed(d.report.mean.tc) +
                   " test_tc " + fixed(t.report.mean.tc));
      dev.push_back(d.report.mean);
      test.push_back(t.report.mean);
    }
    rows.push_back({name, summarize(dev), summarize(test)});
  }
  eval::write_text(out / "oracle.csv", table_csv("mode", rows, true));
  return rows;
}

std::string_view to_string(SweepParam p) noexcept {
  switch (p) {
    case SweepParam::tau: return "tau";
    case SweepParam::gamma: return "gamma";
    case SweepParam::lambda: return "lambda";
  }
  return "unknown";
}

std::optional<SweepParam> parse_sweep_param(std::string_view name) noexcept {
  for (auto p : {SweepParam::tau, SweepParam::gamma, SweepParam::lambda}) {
    if (to_string(p) == name) return p;
  }
  return std::nullopt;
}

void check_sweep_values(SweepParam p, std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::invalid_argument, "sweep: no values given");
  for (double v : values) {
    const std::string what = "sweep: " + std::string(to_string(p)) + " value " + world::format_double(v);
    if (!std::isfinite(v)) throw Error(ErrorCode::invalid_argument, what + " is not finite");
    switch (p) {
      case SweepParam::tau:
        if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::invalid_argument, what + " outside [0, 1]");
        break;
      case SweepParam::gamma:
        if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::invalid_argument, what + " outside [0, 1]");
        break;
      case SweepParam::lambda:
        if (!(v >= 0.0)) throw Error(ErrorCode::invalid_argument, what + " is negative");
        break;
    }
  }
}

std::vector<TableRow> sweep(const ExperimentConfig& config, SweepParam param, std::span<const double> values,
                            std::span<const std::uint64_t> seeds, const fs::path& out, const Logger& log) {
  check_sweep_values(param, values);
  if (seeds.empty()) throw Error(ErrorCode::invalid_argument, "sweep: no seeds given");
  Workspace ws(config);
  std::vector<TableRow> rows;
  const std::string pname(to_string(param));
  const auto csv_path = out / ("sweep_" + pname + ".csv");

  if (param == SweepParam::tau) {
    std::vector<std::uint64_t> missing;
    for (auto seed : seeds) {
      if (!fs::exists(seed_dir(out, seed) / "checkpoint.json")) missing.push_back(seed);
    }
    if (!missing.empty()) run_experiment(ws, config, missing, out, log);
    std::vector<training::Model> models;
    for (auto seed : seeds) {
      models.push_back(load_model(seed_dir(out, seed)));
      check_model_matches(models.back(), config, seed_dir(out, seed));
    }
    const auto env = ws.environment();
    for (double v : values) {
      std::vector<eval::EpisodeMetrics> dev;
      for (const auto& model : models) {
        dev.push_back(
            training::evaluate_model(model, env, ws.episodes(Split::dev), v, training::OracleMode::none, config.metrics)
                .report.mean);
      }
      rows.push_back({world::format_double(v), summarize(dev), {}});
      say(log, "tau " + world::format_double(v) + ": dev_tc " + fixed(rows.back().dev.mean.tc));
      eval::write_text(csv_path, table_csv(pname, rows, false));
    }
    return rows;
  }

  for (double v : values) {
    ExperimentConfig c = config;
    if (param == SweepParam::gamma) c.loss.gamma = v;
    else c.loss.lambda = v;
    const std::string label = world::format_double(v);
    say(log, pname + " " + label);
    auto m = run_experiment(ws, c, seeds, out / ("sweep_" + pname + "_" + label), log);
    rows.push_back({label, m.dev, m.test});
    eval::write_text(csv_path, table_csv(pname, rows, false));
  }
  return rows;
}

std::vector<SeedResult> evaluate_checkpoints(const ExperimentConfig& config, std::span<const std::uint64_t> seeds,
                                             const fs::path& out, const Logger& log) {
  if (seeds.empty()) throw Error(ErrorCode::invalid_argument, "eval: no seeds given");
  std::vector<training::Model> models;
  for (auto seed : seeds) {
    models.push_back(load_model(seed_dir(out, seed)));
    check_model_matches(models.back(), config, seed_dir(out, seed));
  }
  Workspace ws(config);
  const auto env = ws.environment();
  std::vector<SeedResult> results;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto dir = seed_dir(out, seeds[i]);
    auto d = training::evaluate_model(models[i], env, ws.episodes(Split::dev), config.tau,
                                      training::OracleMode::none, config.metrics);
    auto t = training::evaluate_model(models[i], env, ws.episodes(Split::test), config.tau,
                                      training::OracleMode::none, config.metrics);
    write_reports(dir, "eval_dev", ws.graph(), d);
    write_reports(dir, "eval_test", ws.graph(), t);
    SeedResult r;
    r.seed = seeds[i];
    r.dev = std::move(d.report);
    r.test = std::move(t.report);
    say(log, "seed " + std::to_string(r.seed) + ": dev_tc " + fixed(r.dev.mean.tc) + " test_tc " +
                 fixed(r.test.mean.tc));
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace stopnav::harness
