// Command-line driver: make-dataset, train, eval, ablate, oracle-eval, sweep.
// Failures print one line `error code=<code> msg="<text>"` to stderr.

#include <CLI11.hpp>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "stopnav/error.hpp"
#include "stopnav/harness/config.hpp"
#include "stopnav/harness/experiment.hpp"

namespace {

using namespace stopnav;
namespace fs = std::filesystem;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    out.push_back(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(text)) {
    std::uint64_t v = 0;
    auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || end != item.data() + item.size()) {
      throw Error(ErrorCode::invalid_argument, "--seed: '" + item + "' is not a non-negative integer");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    double v = 0.0;
    auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || end != item.data() + item.size()) {
      throw Error(ErrorCode::invalid_argument, "--values: '" + item + "' is not a number");
    }
    out.push_back(v);
  }
  return out;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

int fail(std::string_view code, const std::string& msg) {
  std::cerr << "error code=" << code << " msg=\"" << escape(msg) << "\"\n";
  return 1;
}

struct Common {
  std::string config;
  std::string seeds = "1,2,3";
  std::string out;
  std::vector<std::string> sets;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Config file (key=value lines); defaults apply when omitted");
  cmd->add_option("--seed", c.seeds, "Comma-separated seeds")->capture_default_str();
  cmd->add_option("--out", c.out, "Output directory")->required();
  cmd->add_option("--set", c.sets, "Extra key=value override, applied after the config file");
  cmd->add_flag("--quiet", c.quiet, "Suppress progress lines");
}

harness::ExperimentConfig load(const Common& c) {
  harness::ExperimentConfig cfg = c.config.empty() ? harness::ExperimentConfig{} : harness::read_config(c.config);
  if (!c.sets.empty()) {
    std::map<std::string, std::string> kv;
    for (const auto& s : c.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::config_error, "--set '" + s + "' is not key=value");
      kv[s.substr(0, eq)] = s.substr(eq + 1);
    }
    cfg = harness::apply_overrides(cfg, kv);
  }
  harness::validate(cfg);
  return cfg;
}

harness::Logger logger(const Common& c) {
  if (c.quiet) return {};
  return [](const std::string& line) { std::cout << line << std::endl; };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-branch stop/direction navigation policy lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(harness::version()));

  Common dataset_opts, train_opts, eval_opts, ablate_opts, oracle_opts, sweep_opts;
  auto* make_dataset = app.add_subcommand("make-dataset", "Generate the city and the train/dev/test files");
  add_common(make_dataset, dataset_opts);
  auto* train = app.add_subcommand("train", "Train and evaluate one model per seed");
  add_common(train, train_opts);
  auto* evaluate = app.add_subcommand("eval", "Re-evaluate the seed_<s> checkpoints under --out");
  add_common(evaluate, eval_opts);
  auto* ablate = app.add_subcommand("ablate", "Train each ablation variant on identical data and seeds");
  add_common(ablate, ablate_opts);
  std::string variants = "FULL,ONE_BRANCH,NO_KEY_POINTS,NO_WEIGHTING";
  ablate->add_option("--variants", variants, "Comma-separated variants")->capture_default_str();
  auto* oracle = app.add_subcommand("oracle-eval", "Evaluate trained checkpoints with oracle stop or direction");
  add_common(oracle, oracle_opts);
  std::string checkpoint;
  std::string modes = "NONE,ORACLE_DIRECTION,ORACLE_STOP";
  oracle->add_option("--checkpoint", checkpoint, "Directory holding seed_<s>/ checkpoints (default: --out)");
  oracle->add_option("--mode", modes, "Comma-separated oracle modes")->capture_default_str();
  auto* sweep = app.add_subcommand("sweep", "Sweep tau (inference only), gamma or lambda (retrain)");
  add_common(sweep, sweep_opts);
  std::string param;
  std::string values;
  sweep->add_option("--param", param, "tau, gamma or lambda")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail("usage", e.what());
    return 2;
  }

  try {
    if (make_dataset->parsed()) {
      auto cfg = load(dataset_opts);
      if (make_dataset->count("--seed") > 0) {
        const auto seeds = parse_seeds(dataset_opts.seeds);
        if (seeds.size() != 1) throw Error(ErrorCode::invalid_argument, "make-dataset takes a single --seed");
        cfg.data.seed = seeds.front();
      }
      const auto counts = harness::make_dataset(cfg, dataset_opts.out);
      std::cout << "wrote " << counts[0] << " train, " << counts[1] << " dev, " << counts[2] << " test records to "
                << dataset_opts.out << "\n";
    } else if (train->parsed()) {
      const auto cfg = load(train_opts);
      const auto m = harness::run_experiment(cfg, parse_seeds(train_opts.seeds), train_opts.out, logger(train_opts));
      std::cout << "dev_tc " << m.dev.mean.tc << " test_tc " << m.test.mean.tc << "\n";
    } else if (evaluate->parsed()) {
      const auto cfg = load(eval_opts);
      harness::evaluate_checkpoints(cfg, parse_seeds(eval_opts.seeds), eval_opts.out, logger(eval_opts));
    } else if (ablate->parsed()) {
      const auto cfg = load(ablate_opts);
      std::vector<harness::Ablation> list;
      for (const auto& name : split_list(variants)) {
        auto a = harness::parse_ablation(name);
        if (!a) throw Error(ErrorCode::invalid_argument, "unknown variant '" + name + "'");
        list.push_back(*a);
      }
      const auto rows =
          harness::ablate(cfg, list, parse_seeds(ablate_opts.seeds), ablate_opts.out, logger(ablate_opts));
      std::cout << harness::table_csv("variant", rows, true);
    } else if (oracle->parsed()) {
      const auto cfg = load(oracle_opts);
      std::vector<training::OracleMode> list;
      for (const auto& name : split_list(modes)) {
        bool found = false;
        for (auto m : {training::OracleMode::none, training::OracleMode::direction, training::OracleMode::stop}) {
          if (training::to_string(m) == name) {
            list.push_back(m);
            found = true;
          }
        }
        if (!found) throw Error(ErrorCode::invalid_argument, "unknown oracle mode '" + name + "'");
      }
      const fs::path ckpt = checkpoint.empty() ? fs::path(oracle_opts.out) : fs::path(checkpoint);
      const auto rows = harness::run_oracle_eval(cfg, parse_seeds(oracle_opts.seeds), ckpt, list, oracle_opts.out,
                                                 logger(oracle_opts));
      std::cout << harness::table_csv("mode", rows, true);
    } else if (sweep->parsed()) {
      const auto cfg = load(sweep_opts);
      auto p = harness::parse_sweep_param(param);
      if (!p) throw Error(ErrorCode::invalid_argument, "unknown sweep parameter '" + param + "'");
      const auto rows = harness::sweep(cfg, *p, parse_values(values), parse_seeds(sweep_opts.seeds), sweep_opts.out,
                                       logger(sweep_opts));
      std::cout << harness::table_csv(param, rows, false);
    }
  } catch (const Error& e) {
    return fail(to_string(e.code()), e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(to_string(ErrorCode::io_error), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
