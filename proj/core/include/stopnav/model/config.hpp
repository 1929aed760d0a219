#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace stopnav::model {

/// How the two policy branches share the text/visual encoder and the
/// trajectory decoder. ONE_BRANCH has a single 4-way head instead.
enum class Variant : std::uint8_t {
  shared_enc_dec,
  shared_enc,
  shared_dec,
  separate_enc_dec,
  one_branch,
};

std::string_view to_string(Variant v) noexcept;
std::optional<Variant> parse_variant(std::string_view name) noexcept;

struct ConvSpec {
  std::size_t filters = 16;
  std::size_t kernel = 3;
  std::size_t stride = 2;
  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct ModelConfig {
  // Inputs, fixed by the data.
  std::size_t vocab_size = 0;
  std::size_t obs_channels = 9;
  std::size_t obs_grid = 15;
  std::size_t t_max = 40;

  std::size_t word_embed = 32;
  std::size_t text_hidden = 64;  // per direction
  ConvSpec conv1{16, 3, 2};
  ConvSpec conv2{32, 3, 2};
  std::size_t visual = 64;
  std::size_t trajectory_hidden = 64;
  std::size_t action_embed = 16;
  std::size_t time_embed = 32;

  Variant variant = Variant::shared_enc_dec;
  bool key_point_gating = true;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Desk-scale defaults (the struct defaults).
ModelConfig desk_preset();
/// Larger layer sizes: 256-unit recurrent layers, 8x8/4 and 4x4/4 convolutions
/// with 32 and 64 filters, 256-unit visual feature. Needs obs_grid >= 20.
ModelConfig large_preset();

/// Spatial side after a valid convolution; 0 if the kernel does not fit.
std::size_t conv_output_side(std::size_t input, const ConvSpec& spec) noexcept;

/// Rejects non-positive dims, an unset vocabulary, and convolutions that do
/// not fit the observation grid.
void validate(const ModelConfig& config);

/// Flat key=value form, keys prefixed "model."; inverse of from_key_values.
std::map<std::string, std::string> to_key_values(const ModelConfig& config);
std::string to_text(const ModelConfig& config);
/// Applies recognized "model." keys on top of `base`; unknown model keys throw
/// config_error.
ModelConfig from_key_values(const std::map<std::string, std::string>& kv, ModelConfig base = {});
ModelConfig parse_model_config(std::string_view text);

}  // namespace stopnav::model
