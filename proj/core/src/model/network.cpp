#include "stopnav/model/network.hpp"

#include <cmath>

#include "stopnav/error.hpp"
#include "stopnav/rng.hpp"

namespace stopnav::model {

using numeric::Array;
using numeric::Shape;

std::vector<Stream> streams(Variant v) {
  switch (v) {
    case Variant::shared_enc_dec: return {{0, 0}};
    case Variant::shared_enc: return {{0, 0}, {0, 1}};
    case Variant::shared_dec: return {{0, 0}, {1, 0}};
    case Variant::separate_enc_dec: return {{0, 0}, {1, 1}};
    case Variant::one_branch: return {{0, 0}};
  }
  throw Error(ErrorCode::invalid_argument, "model: invalid variant");
}

std::size_t encoder_count(Variant v) {
  std::size_t n = 0;
  for (auto s : streams(v)) n = std::max(n, s.encoder + 1);
  return n;
}

std::size_t decoder_count(Variant v) {
  std::size_t n = 0;
  for (auto s : streams(v)) n = std::max(n, s.decoder + 1);
  return n;
}

std::string encoder_prefix(std::size_t group) { return group == 0 ? "encoder." : "stop_encoder."; }
std::string decoder_prefix(std::size_t group) { return group == 0 ? "decoder." : "stop_decoder."; }

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& c) {
  validate(c);
  const std::size_t ht = c.text_hidden, hd = c.trajectory_hidden;
  const std::size_t side = conv_output_side(conv_output_side(c.obs_grid, c.conv1), c.conv2);
  std::vector<std::pair<std::string, Shape>> out;
  for (std::size_t e = 0; e < encoder_count(c.variant); ++e) {
    const std::string p = encoder_prefix(e);
    out.push_back({p + "word_embedding", {c.vocab_size, c.word_embed}});
    out.push_back({p + "text_forward.weight", {4 * ht, c.word_embed + ht}});
    out.push_back({p + "text_forward.bias", {4 * ht}});
    out.push_back({p + "text_backward.weight", {4 * ht, c.word_embed + ht}});
    out.push_back({p + "text_backward.bias", {4 * ht}});
    out.push_back({p + "attention.weight", {2 * ht, hd}});
    out.push_back({p + "conv1.kernel", {c.conv1.filters, c.obs_channels, c.conv1.kernel, c.conv1.kernel}});
    out.push_back({p + "conv1.bias", {c.conv1.filters}});
    out.push_back({p + "conv2.kernel", {c.conv2.filters, c.conv1.filters, c.conv2.kernel, c.conv2.kernel}});
    out.push_back({p + "conv2.bias", {c.conv2.filters}});
    out.push_back({p + "visual.weight", {c.visual, c.conv2.filters * side * side}});
    out.push_back({p + "visual.bias", {c.visual}});
  }
  for (std::size_t d = 0; d < decoder_count(c.variant); ++d) {
    const std::string p = decoder_prefix(d);
    out.push_back({p + "action_embedding", {kStartAction + 1, c.action_embed}});
    out.push_back({p + "lstm.weight", {4 * hd, 2 * ht + c.visual + c.action_embed + hd}});
    out.push_back({p + "lstm.bias", {4 * hd}});
    out.push_back({p + "time.weight", {c.time_embed, c.t_max + 1}});
    out.push_back({p + "time.bias", {c.time_embed}});
  }
  const std::size_t feat = hd + c.time_embed;
  if (c.variant == Variant::one_branch) {
    out.push_back({"policy_head.weight", {world::kActionCount, feat}});
    out.push_back({"policy_head.bias", {world::kActionCount}});
  } else {
    out.push_back({"direction_head.weight", {world::kDirectionCount, feat}});
    out.push_back({"direction_head.bias", {world::kDirectionCount}});
    out.push_back({"stop_head.weight", {2, feat}});
    out.push_back({"stop_head.bias", {2}});
  }
  return out;
}

numeric::ParamStore init_params(const ModelConfig& config, std::uint64_t seed) {
  numeric::ParamStore store;
  const auto layout = parameter_layout(config);
  // Fan-in of each bias is that of the weight registered just before it.
  std::size_t last_fan_in = 1;
  for (const auto& [name, shape] : layout) {
    Rng rng(seed, "init:" + name);
    Array a(shape);
    const bool table = name.ends_with("embedding");
    if (table) {
      for (auto& v : a.data()) v = rng.normal();
    } else {
      if (shape.size() >= 2) {
        last_fan_in = 1;
        for (std::size_t i = 1; i < shape.size(); ++i) last_fan_in *= shape[i];
      }
      const double bound = 1.0 / std::sqrt(static_cast<double>(last_fan_in));
      for (auto& v : a.data()) v = rng.uniform(-bound, bound);
    }
    store.add(name, std::move(a));
  }
  return store;
}

void check_params(const ModelConfig& config, const numeric::ParamStore& params) {
  const auto layout = parameter_layout(config);
  if (params.size() != layout.size()) {
    throw Error(ErrorCode::shape_mismatch, "model: expected " + std::to_string(layout.size()) + " parameters, found " +
                                               std::to_string(params.size()));
  }
  for (const auto& [name, shape] : layout) {
    const auto& value = params.value(name);
    if (value.shape() != shape) {
      throw Error(ErrorCode::shape_mismatch, "model: parameter " + name + " has shape " +
                                                 numeric::shape_string(value.shape()) + ", expected " +
                                                 numeric::shape_string(shape));
    }
  }
}

EncoderParams bind_encoder(Tape& t, std::size_t group) {
  const std::string p = encoder_prefix(group);
  return {t.param(p + "word_embedding"),  t.param(p + "text_forward.weight"),  t.param(p + "text_forward.bias"),
          t.param(p + "text_backward.weight"), t.param(p + "text_backward.bias"), t.param(p + "attention.weight"),
          t.param(p + "conv1.kernel"),    t.param(p + "conv1.bias"),           t.param(p + "conv2.kernel"),
          t.param(p + "conv2.bias"),      t.param(p + "visual.weight"),        t.param(p + "visual.bias")};
}

DecoderParams bind_decoder(Tape& t, std::size_t group) {
  const std::string p = decoder_prefix(group);
  return {t.param(p + "action_embedding"), t.param(p + "lstm.weight"), t.param(p + "lstm.bias"),
          t.param(p + "time.weight"), t.param(p + "time.bias")};
}

Var encode_text(Tape& t, const EncoderParams& p, std::span<const language::TokenId> tokens) {
  if (tokens.empty()) throw Error(ErrorCode::invalid_argument, "encode_text: empty instruction");
  const std::size_t vocab = t.shape(p.word_embedding)[0];
  for (auto id : tokens) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw Error(ErrorCode::invalid_argument,
                  "encode_text: token " + std::to_string(id) + " outside vocabulary of " + std::to_string(vocab));
    }
  }
  const std::size_t hidden = t.size(p.fwd_bias) / 4;
  const std::vector<double> zeros(hidden, 0.0);
  const std::size_t n = tokens.size();
  std::vector<Var> embedded(n), fwd(n), bwd(n);
  for (std::size_t l = 0; l < n; ++l) embedded[l] = t.embedding(p.word_embedding, static_cast<std::size_t>(tokens[l]));

  auto run = [&](Var w, Var b, bool reverse, std::vector<Var>& out) {
    Var h = t.constant(zeros, {hidden});
    Var c = t.constant(zeros, {hidden});
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t l = reverse ? n - 1 - k : k;
      Var hc = t.lstm_cell(embedded[l], h, c, w, b);
      h = t.slice(hc, 0, hidden);
      c = t.slice(hc, hidden, hidden);
      out[l] = h;
    }
  };
  run(p.fwd_weight, p.fwd_bias, false, fwd);
  run(p.bwd_weight, p.bwd_bias, true, bwd);

  std::vector<Var> rows(n);
  for (std::size_t l = 0; l < n; ++l) rows[l] = t.concat({fwd[l], bwd[l]});
  return t.stack(rows);
}

Attention attend(Tape& t, Var attention_weight, Var h_prev, Var text) {
  if (t.shape(text).size() != 2) throw Error(ErrorCode::shape_mismatch, "attend: text features must be [tokens, dim]");
  Var query = t.matvec(attention_weight, h_prev);
  Var scores = t.matvec(text, query);
  Var alpha = t.softmax(scores);
  return {t.matvec_transposed(text, alpha), alpha};
}

Var encode_visual(Tape& t, const EncoderParams& p, const ModelConfig& config, Var observation) {
  const Shape want{config.obs_channels, config.obs_grid, config.obs_grid};
  if (t.shape(observation) != want) {
    throw Error(ErrorCode::shape_mismatch, "encode_visual: observation " + numeric::shape_string(t.shape(observation)) +
                                               ", expected " + numeric::shape_string(want));
  }
  Var a = t.relu(t.conv2d(observation, p.conv1_kernel, p.conv1_bias, config.conv1.stride));
  Var b = t.relu(t.conv2d(a, p.conv2_kernel, p.conv2_bias, config.conv2.stride));
  return t.affine(p.visual_weight, b, p.visual_bias);
}

RecurrentState trajectory_step(Tape& t, const DecoderParams& p, RecurrentState prev, Var x_t, Var v_t, Var a_prev) {
  const std::size_t hidden = t.size(prev.h);
  Var hc = t.lstm_cell(t.concat({x_t, v_t, a_prev}), prev.h, prev.c, p.lstm_weight, p.lstm_bias);
  return {t.slice(hc, 0, hidden), t.slice(hc, hidden, hidden)};
}

Var time_embedding(Tape& t, const DecoderParams& p, std::size_t step, std::size_t t_max) {
  std::vector<double> one_hot(t_max + 1, 0.0);
  one_hot[std::min(step, t_max)] = 1.0;
  return t.affine(p.time_weight, t.constant(one_hot, {t_max + 1}), p.time_bias);
}

Var policy_head(Tape& t, Var weight, Var bias, Var h, Var t_emb) {
  return t.softmax(t.affine(weight, t.concat({h, t_emb}), bias));
}

EpisodeGraph::EpisodeGraph(Tape& tape, const ModelConfig& config, std::span<const language::TokenId> tokens)
    : tape_(&tape), config_(&config), streams_(streams(config.variant)) {
  for (std::size_t e = 0; e < encoder_count(config.variant); ++e) {
    encoders_.push_back(bind_encoder(tape, e));
    text_.push_back(encode_text(tape, encoders_.back(), tokens));
  }
  for (std::size_t d = 0; d < decoder_count(config.variant); ++d) decoders_.push_back(bind_decoder(tape, d));
  const std::vector<double> zeros(config.trajectory_hidden, 0.0);
  for (std::size_t s = 0; s < streams_.size(); ++s) {
    state_.push_back({tape.constant(zeros, {config.trajectory_hidden}), tape.constant(zeros, {config.trajectory_hidden})});
  }
  if (config.variant == Variant::one_branch) {
    dir_w_ = tape.param("policy_head.weight");
    dir_b_ = tape.param("policy_head.bias");
  } else {
    dir_w_ = tape.param("direction_head.weight");
    dir_b_ = tape.param("direction_head.bias");
    stop_w_ = tape.param("stop_head.weight");
    stop_b_ = tape.param("stop_head.bias");
  }
}

StepVars EpisodeGraph::step(std::span<const double> observation, std::optional<world::Action> prev, std::size_t t) {
  Tape& tape = *tape_;
  const ModelConfig& c = *config_;
  Var obs = tape.constant(observation, {c.obs_channels, c.obs_grid, c.obs_grid});
  const std::size_t action_row = prev ? static_cast<std::size_t>(*prev) : kStartAction;

  std::vector<Var> visual(encoders_.size());
  StepVars out;
  std::vector<Var> features(streams_.size());
  for (std::size_t s = 0; s < streams_.size(); ++s) {
    const auto [e, d] = streams_[s];
    if (!visual[e].valid()) visual[e] = encode_visual(tape, encoders_[e], c, obs);
    const Attention att = attend(tape, encoders_[e].attention, state_[s].h, text_[e]);
    if (s == 0) out.attention = att.weights;
    Var a_prev = tape.embedding(decoders_[d].action_embedding, action_row);
    state_[s] = trajectory_step(tape, decoders_[d], state_[s], att.feature, visual[e], a_prev);
    features[s] = time_embedding(tape, decoders_[d], t, c.t_max);
  }
  out.direction = policy_head(tape, dir_w_, dir_b_, state_[0].h, features[0]);
  if (c.variant != Variant::one_branch) {
    const std::size_t last = streams_.size() - 1;
    out.stop = policy_head(tape, stop_w_, stop_b_, state_[last].h, features[last]);
  }
  return out;
}

PolicyOutput read_output(const Tape& tape, const StepVars& vars) {
  PolicyOutput out;
  const auto p = tape.value(vars.direction);
  out.p.assign(p.begin(), p.end());
  if (vars.stop.valid()) {
    const auto s = tape.value(vars.stop);
    out.s = {s[0], s[1]};
  } else if (out.p.size() == world::kActionCount) {
    out.s = {1.0 - out.p[3], out.p[3]};
  }
  return out;
}

world::Action act(const PolicyOutput& out, bool at_key_point, double tau, bool key_point_gating) {
  auto argmax = [&](std::size_t n) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < n; ++k) {
      if (out.p[k] > out.p[best]) best = k;
    }
    return static_cast<world::Action>(best);
  };
  if (out.p.size() == world::kActionCount) {
    const world::Action a = argmax(world::kActionCount);
    if (a == world::Action::stop) return a;
    if (key_point_gating && !at_key_point) return world::Action::forward;
    return a;
  }
  if (out.s[1] >= tau) return world::Action::stop;
  if (at_key_point || !key_point_gating) return argmax(world::kDirectionCount);
  return world::Action::forward;
}

}  // namespace stopnav::model
