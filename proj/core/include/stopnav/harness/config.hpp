#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "stopnav/eval/metrics.hpp"
#include "stopnav/language/instructions.hpp"
#include "stopnav/model/config.hpp"
#include "stopnav/numeric/adam.hpp"
#include "stopnav/training/losses.hpp"
#include "stopnav/world/city_gen.hpp"
#include "stopnav/world/observation.hpp"
#include "stopnav/world/routes.hpp"

namespace stopnav::harness {

struct DataConfig {
  std::size_t train = 1000;
  std::size_t dev = 300;
  std::size_t test = 300;
  std::uint64_t seed = 11;
};

/// City defaults for experiments: long blocks (many non-stop steps per stop)
/// and sparse landmarks.
inline world::CityConfig default_city() {
  world::CityConfig c;
  c.block_length = 5;
  c.landmark_density = 0.1;
  return c;
}

struct ExperimentConfig {
  world::CityConfig city = default_city();
  std::uint64_t city_seed = 3;
  world::ObservationConfig observation;
  std::size_t t_max = 40;
  world::RouteConfig route;
  DataConfig data;
  language::InstructionConfig language;
  std::string model_preset = "desk";
  model::ModelConfig model;  // vocab and observation fields are derived
  training::LossConfig loss;
  double tau = 0.5;
  numeric::AdamConfig optim;
  std::size_t epochs = 15;
  std::size_t patience = 5;
  eval::MetricsConfig metrics;
};

/// Every key with its value, sorted; parse_config(to_text(c)) == c.
std::map<std::string, std::string> to_key_values(const ExperimentConfig& config);
std::string to_text(const ExperimentConfig& config);

/// `key=value` lines, '#' comments. Starts from the defaults, applies
/// model.preset first, then every other key. Unknown keys, malformed values
/// and invalid combinations throw config_error naming the key or line.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig apply_overrides(ExperimentConfig base, const std::map<std::string, std::string>& kv);
ExperimentConfig read_config(const std::string& path);

/// Copies the observation/vocabulary/horizon fields into the model config.
model::ModelConfig resolved_model(const ExperimentConfig& config);

void validate(const ExperimentConfig& config);

}  // namespace stopnav::harness
