#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stopnav/language/vocabulary.hpp"
#include "stopnav/model/config.hpp"
#include "stopnav/numeric/param_store.hpp"
#include "stopnav/numeric/tape.hpp"
#include "stopnav/world/navigation.hpp"

namespace stopnav::model {

using numeric::Tape;
using numeric::Var;

/// Row of the action embedding used before the first move.
inline constexpr std::size_t kStartAction = 4;

/// (encoder, decoder) group indices per stream. The direction head reads
/// stream 0, the stop head reads the last stream.
struct Stream {
  std::size_t encoder;
  std::size_t decoder;
};
std::vector<Stream> streams(Variant v);
std::size_t encoder_count(Variant v);
std::size_t decoder_count(Variant v);

/// "encoder." / "stop_encoder." and "decoder." / "stop_decoder.".
std::string encoder_prefix(std::size_t group);
std::string decoder_prefix(std::size_t group);

/// Every parameter (name and shape) the configuration needs, in store order.
std::vector<std::pair<std::string, numeric::Shape>> parameter_layout(const ModelConfig& config);

/// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), embedding tables
/// ~ N(0, 1); each parameter draws from its own stream of `seed`.
numeric::ParamStore init_params(const ModelConfig& config, std::uint64_t seed);

/// Throws shape_mismatch/not_found if `params` does not match the layout.
void check_params(const ModelConfig& config, const numeric::ParamStore& params);

struct EncoderParams {
  Var word_embedding, fwd_weight, fwd_bias, bwd_weight, bwd_bias, attention;
  Var conv1_kernel, conv1_bias, conv2_kernel, conv2_bias, visual_weight, visual_bias;
};
struct DecoderParams {
  Var action_embedding, lstm_weight, lstm_bias, time_weight, time_bias;
};

EncoderParams bind_encoder(Tape& tape, std::size_t group);
DecoderParams bind_decoder(Tape& tape, std::size_t group);

/// Bidirectional LSTM; returns [tokens, 2*hidden] whose row l is
/// [forward state after token l, backward state after token l].
Var encode_text(Tape& tape, const EncoderParams& p, std::span<const language::TokenId> tokens);

struct Attention {
  Var feature;  // x_t
  Var weights;  // alpha over tokens
};
/// alpha = softmax_l((W h_prev)^T x_l), x_t = sum_l alpha_l x_l.
Attention attend(Tape& tape, Var attention_weight, Var h_prev, Var text);

/// conv -> relu -> conv -> relu -> affine.
Var encode_visual(Tape& tape, const EncoderParams& p, const ModelConfig& config, Var observation);

struct RecurrentState {
  Var h;
  Var c;
};
RecurrentState trajectory_step(Tape& tape, const DecoderParams& p, RecurrentState prev, Var x_t, Var v_t,
                               Var a_prev);

/// Affine map of the one-hot step index (clamped to t_max).
Var time_embedding(Tape& tape, const DecoderParams& p, std::size_t t, std::size_t t_max);

/// softmax(W [h, t_emb] + b).
Var policy_head(Tape& tape, Var weight, Var bias, Var h, Var t_emb);

/// Per-step outputs as tape variables.
struct StepVars {
  Var direction;  // 3-way, or the 4-way head in ONE_BRANCH
  Var stop;       // 2-way (non-stop, stop); invalid in ONE_BRANCH
  Var attention;  // stream-0 attention weights
};

/// One episode's unrolled network on a tape: text is encoded once per
/// encoder group, then step() advances every stream by one time step.
class EpisodeGraph {
 public:
  EpisodeGraph(Tape& tape, const ModelConfig& config, std::span<const language::TokenId> tokens);

  /// `prev` is the previous action (nullopt on the first step), `t` the step index.
  StepVars step(std::span<const double> observation, std::optional<world::Action> prev, std::size_t t);

 private:
  Tape* tape_;
  const ModelConfig* config_;
  std::vector<Stream> streams_;
  std::vector<EncoderParams> encoders_;
  std::vector<DecoderParams> decoders_;
  std::vector<Var> text_;
  std::vector<RecurrentState> state_;
  Var dir_w_, dir_b_, stop_w_, stop_b_;
};

struct PolicyOutput {
  std::array<double, 2> s{0.5, 0.5};  // (non-stop, stop)
  std::vector<double> p;              // forward, left, right [, stop]
};

PolicyOutput read_output(const Tape& tape, const StepVars& vars);

/// Two-branch: STOP if s[1] >= tau, else the argmax direction at key points
/// (or everywhere with gating off), else FORWARD. Four-way p: argmax over all
/// four, with directions coerced to FORWARD off key points when gating is on.
/// Ties go to the lowest index.
world::Action act(const PolicyOutput& out, bool at_key_point, double tau, bool key_point_gating = true);

}  // namespace stopnav::model
