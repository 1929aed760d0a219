#include "stopnav/model/config.hpp"

#include <array>
#include <charconv>

#include "stopnav/error.hpp"

namespace stopnav::model {

namespace {

constexpr std::array kVariants = {Variant::shared_enc_dec, Variant::shared_enc, Variant::shared_dec,
                                  Variant::separate_enc_dec, Variant::one_branch};

std::size_t to_size(const std::string& key, const std::string& value) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || ec != std::errc{} || p != value.data() + value.size()) {
    throw Error(ErrorCode::config_error, key + ": expected a nonnegative integer, got '" + value + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw Error(ErrorCode::config_error, key + ": expected true/false, got '" + value + "'");
}

}  // namespace

std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::shared_enc_dec: return "SHARED_ENC_DEC";
    case Variant::shared_enc: return "SHARED_ENC";
    case Variant::shared_dec: return "SHARED_DEC";
    case Variant::separate_enc_dec: return "SEPARATE_ENC_DEC";
    case Variant::one_branch: return "ONE_BRANCH";
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view name) noexcept {
  for (Variant v : kVariants) {
    if (to_string(v) == name) return v;
  }
  return std::nullopt;
}

ModelConfig desk_preset() { return ModelConfig{}; }

ModelConfig large_preset() {
  ModelConfig c;
  c.word_embed = 32;
  c.text_hidden = 256;
  c.conv1 = {32, 8, 4};
  c.conv2 = {64, 4, 4};
  c.visual = 256;
  c.trajectory_hidden = 256;
  c.action_embed = 16;
  c.time_embed = 32;
  c.obs_grid = 63;
  return c;
}

std::size_t conv_output_side(std::size_t input, const ConvSpec& spec) noexcept {
  if (spec.kernel == 0 || spec.stride == 0 || spec.kernel > input) return 0;
  return (input - spec.kernel) / spec.stride + 1;
}

void validate(const ModelConfig& c) {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw Error(ErrorCode::invalid_argument, std::string("model: ") + name + " must be positive");
  };
  positive(c.vocab_size, "vocab_size");
  positive(c.obs_channels, "obs_channels");
  positive(c.obs_grid, "obs_grid");
  positive(c.t_max, "t_max");
  positive(c.word_embed, "word_embed");
  positive(c.text_hidden, "text_hidden");
  positive(c.conv1.filters, "conv1 filters");
  positive(c.conv1.stride, "conv1 stride");
  positive(c.conv2.filters, "conv2 filters");
  positive(c.conv2.stride, "conv2 stride");
  positive(c.visual, "visual");
  positive(c.trajectory_hidden, "trajectory_hidden");
  positive(c.action_embed, "action_embed");
  positive(c.time_embed, "time_embed");
  const std::size_t s1 = conv_output_side(c.obs_grid, c.conv1);
  if (s1 == 0 || conv_output_side(s1, c.conv2) == 0) {
    throw Error(ErrorCode::invalid_argument,
                "model: convolutions do not fit a " + std::to_string(c.obs_grid) + "-cell observation grid");
  }
  if (!parse_variant(to_string(c.variant))) throw Error(ErrorCode::invalid_argument, "model: invalid variant");
}

std::map<std::string, std::string> to_key_values(const ModelConfig& c) {
  auto s = [](std::size_t v) { return std::to_string(v); };
  return {
      {"model.vocab_size", s(c.vocab_size)},
      {"model.obs_channels", s(c.obs_channels)},
      {"model.obs_grid", s(c.obs_grid)},
      {"model.t_max", s(c.t_max)},
      {"model.word_embed", s(c.word_embed)},
      {"model.text_hidden", s(c.text_hidden)},
      {"model.conv1_filters", s(c.conv1.filters)},
      {"model.conv1_kernel", s(c.conv1.kernel)},
      {"model.conv1_stride", s(c.conv1.stride)},
      {"model.conv2_filters", s(c.conv2.filters)},
      {"model.conv2_kernel", s(c.conv2.kernel)},
      {"model.conv2_stride", s(c.conv2.stride)},
      {"model.visual", s(c.visual)},
      {"model.trajectory_hidden", s(c.trajectory_hidden)},
      {"model.action_embed", s(c.action_embed)},
      {"model.time_embed", s(c.time_embed)},
      {"model.variant", std::string(to_string(c.variant))},
      {"model.key_point_gating", c.key_point_gating ? "true" : "false"},
  };
}

std::string to_text(const ModelConfig& config) {
  std::string out;
  for (const auto& [k, v] : to_key_values(config)) out += k + "=" + v + "\n";
  return out;
}

ModelConfig from_key_values(const std::map<std::string, std::string>& kv, ModelConfig c) {
  for (const auto& [key, value] : kv) {
    if (key.rfind("model.", 0) != 0) continue;
    const std::string k = key.substr(6);
    if (k == "vocab_size") c.vocab_size = to_size(key, value);
    else if (k == "obs_channels") c.obs_channels = to_size(key, value);
    else if (k == "obs_grid") c.obs_grid = to_size(key, value);
    else if (k == "t_max") c.t_max = to_size(key, value);
    else if (k == "word_embed") c.word_embed = to_size(key, value);
    else if (k == "text_hidden") c.text_hidden = to_size(key, value);
    else if (k == "conv1_filters") c.conv1.filters = to_size(key, value);
    else if (k == "conv1_kernel") c.conv1.kernel = to_size(key, value);
    else if (k == "conv1_stride") c.conv1.stride = to_size(key, value);
    else if (k == "conv2_filters") c.conv2.filters = to_size(key, value);
    else if (k == "conv2_kernel") c.conv2.kernel = to_size(key, value);
    else if (k == "conv2_stride") c.conv2.stride = to_size(key, value);
    else if (k == "visual") c.visual = to_size(key, value);
    else if (k == "trajectory_hidden") c.trajectory_hidden = to_size(key, value);
    else if (k == "action_embed") c.action_embed = to_size(key, value);
    else if (k == "time_embed") c.time_embed = to_size(key, value);
    else if (k == "variant") {
      auto v = parse_variant(value);
      if (!v) throw Error(ErrorCode::config_error, key + ": unknown variant '" + value + "'");
      c.variant = *v;
    } else if (k == "key_point_gating") c.key_point_gating = to_bool(key, value);
    else throw Error(ErrorCode::config_error, "unknown key '" + key + "'");
  }
  return c;
}

ModelConfig parse_model_config(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::parse_error, "model config line " + std::to_string(line_no) + ": expected key=value");
    }
    kv[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
  }
  return from_key_values(kv);
}

}  // namespace stopnav::model
