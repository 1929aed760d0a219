#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "stopnav/error.hpp"
#include "stopnav/model/config.hpp"
#include "stopnav/model/network.hpp"
#include "stopnav/rng.hpp"

namespace {

using namespace stopnav;
using namespace stopnav::model;
using numeric::Array;
using numeric::ParamStore;
using world::Action;

ModelConfig small(Variant v) {
  ModelConfig c = desk_preset();
  c.vocab_size = 20;
  c.variant = v;
  return c;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed, "test");
  std::vector<double> out(n);
  for (auto& v : out) v = rng.uniform(-scale, scale);
  return out;
}

// Closed-form parameter count, written out term by term.
std::size_t closed_form_count(const ModelConfig& c) {
  const std::size_t V = c.vocab_size, E = c.word_embed, Ht = c.text_hidden, Hd = c.trajectory_hidden;
  const std::size_t s1 = (c.obs_grid - c.conv1.kernel) / c.conv1.stride + 1;
  const std::size_t s2 = (s1 - c.conv2.kernel) / c.conv2.stride + 1;
  const std::size_t enc = V * E + 2 * (4 * Ht * (E + Ht) + 4 * Ht) + 2 * Ht * Hd +
                          c.conv1.filters * c.obs_channels * c.conv1.kernel * c.conv1.kernel + c.conv1.filters +
                          c.conv2.filters * c.conv1.filters * c.conv2.kernel * c.conv2.kernel + c.conv2.filters +
                          c.visual * c.conv2.filters * s2 * s2 + c.visual;
  const std::size_t dec = 5 * c.action_embed + 4 * Hd * (2 * Ht + c.visual + c.action_embed + Hd) + 4 * Hd +
                          c.time_embed * (c.t_max + 1) + c.time_embed;
  const std::size_t feat = Hd + c.time_embed;
  std::size_t encoders = 1, decoders = 1;
  if (c.variant == Variant::shared_dec || c.variant == Variant::separate_enc_dec) encoders = 2;
  if (c.variant == Variant::shared_enc || c.variant == Variant::separate_enc_dec) decoders = 2;
  const std::size_t heads = c.variant == Variant::one_branch ? 4 * (feat + 1) : 3 * (feat + 1) + 2 * (feat + 1);
  return encoders * enc + decoders * dec + heads;
}

std::size_t layout_count(const ModelConfig& c) {
  std::size_t n = 0;
  for (const auto& [name, shape] : parameter_layout(c)) {
    std::size_t k = 1;
    for (auto d : shape) k *= d;
    n += k;
  }
  return n;
}

TEST(Parameters, CountsMatchClosedForm) {
  for (auto v : {Variant::shared_enc_dec, Variant::shared_enc, Variant::shared_dec, Variant::separate_enc_dec,
                 Variant::one_branch}) {
    const auto c = small(v);
    EXPECT_EQ(layout_count(c), closed_form_count(c)) << to_string(v);
    EXPECT_EQ(init_params(c, 1).parameter_count(), closed_form_count(c)) << to_string(v);
  }
}

TEST(Parameters, VariantOrdering) {
  const auto n = [](Variant v) { return layout_count(small(v)); };
  EXPECT_LT(n(Variant::one_branch), n(Variant::shared_enc_dec));
  EXPECT_LT(n(Variant::shared_enc_dec), n(Variant::shared_enc));
  EXPECT_LT(n(Variant::shared_enc_dec), n(Variant::shared_dec));
  EXPECT_LT(n(Variant::shared_enc), n(Variant::separate_enc_dec));
  EXPECT_LT(n(Variant::shared_dec), n(Variant::separate_enc_dec));
  const auto c = small(Variant::shared_enc_dec);
  EXPECT_EQ(n(Variant::shared_enc_dec) - n(Variant::one_branch), c.trajectory_hidden + c.time_embed + 1);
}

TEST(Parameters, InitIsDeterministicAndChecked) {
  const auto c = small(Variant::separate_enc_dec);
  EXPECT_EQ(init_params(c, 4), init_params(c, 4));
  EXPECT_FALSE(init_params(c, 4) == init_params(c, 5));
  EXPECT_NO_THROW(check_params(c, init_params(c, 4)));
  EXPECT_THROW(check_params(small(Variant::shared_enc_dec), init_params(c, 4)), Error);
  auto wrong = init_params(c, 4);
  wrong.value("encoder.visual.bias") = Array({c.visual + 1});
  EXPECT_THROW(check_params(c, wrong), Error);
}

TEST(Parameters, BoundsFollowFanIn) {
  const auto c = small(Variant::shared_enc_dec);
  const auto p = init_params(c, 2);
  const double bound = 1.0 / std::sqrt(static_cast<double>(c.word_embed + c.text_hidden));
  for (double v : p.value("encoder.text_forward.weight").values()) EXPECT_LE(std::abs(v), bound);
  for (double v : p.value("encoder.text_forward.bias").values()) EXPECT_LE(std::abs(v), bound);
  const double conv_bound = 1.0 / std::sqrt(static_cast<double>(c.obs_channels * 9));
  for (double v : p.value("encoder.conv1.bias").values()) EXPECT_LE(std::abs(v), conv_bound);
}

TEST(Attend, WorkedExample) {
  ParamStore store;
  numeric::Tape t(store);
  Var w = t.constant(Array({2, 2}, {1, 0, 0, 1}));
  Var h = t.constant(Array({2}, {1, 0}));
  Var text = t.constant(Array({3, 2}, {1, 0, 0, 1, 1, 1}));
  const auto att = attend(t, w, h, text);
  const double e = std::exp(1.0), z = 2 * e + 1;
  const auto a = t.value(att.weights);
  EXPECT_NEAR(a[0], e / z, 1e-15);
  EXPECT_NEAR(a[1], 1 / z, 1e-15);
  EXPECT_NEAR(a[2], e / z, 1e-15);
  const auto x = t.value(att.feature);
  EXPECT_NEAR(x[0], 2 * e / z, 1e-15);
  EXPECT_NEAR(x[1], (1 + e) / z, 1e-15);
}

TEST(Attend, MatchesNaiveOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t L = 3 + seed % 7, D = 6, H = 5;
    const auto W = random_vector(D * H, seed * 3 + 1);
    const auto hp = random_vector(H, seed * 3 + 2);
    const auto X = random_vector(L * D, seed * 3 + 3, 2.0);
    ParamStore store;
    numeric::Tape t(store);
    const auto att = attend(t, t.constant(W, {D, H}), t.constant(hp, {H}), t.constant(X, {L, D}));

    std::vector<double> q(D, 0.0), s(L, 0.0), alpha(L), x(D, 0.0);
    for (std::size_t i = 0; i < D; ++i)
      for (std::size_t j = 0; j < H; ++j) q[i] += W[i * H + j] * hp[j];
    double mx = -1e300;
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t i = 0; i < D; ++i) s[l] += X[l * D + i] * q[i];
      mx = std::max(mx, s[l]);
    }
    double z = 0;
    for (std::size_t l = 0; l < L; ++l) z += std::exp(s[l] - mx);
    for (std::size_t l = 0; l < L; ++l) alpha[l] = std::exp(s[l] - mx) / z;
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t i = 0; i < D; ++i) x[i] += alpha[l] * X[l * D + i];

    const auto a = t.value(att.weights);
    const auto f = t.value(att.feature);
    for (std::size_t l = 0; l < L; ++l) EXPECT_NEAR(a[l], alpha[l], 1e-12);
    for (std::size_t i = 0; i < D; ++i) EXPECT_NEAR(f[i], x[i], 1e-12);
  }
}

TEST(Attend, RejectsVectorText) {
  ParamStore store;
  numeric::Tape t(store);
  Var w = t.constant(Array({2, 2}, {1, 0, 0, 1}));
  Var h = t.constant(Array({2}, {1, 0}));
  EXPECT_THROW(attend(t, w, h, t.constant(Array({2}, {1, 1}))), Error);
}

TEST(Heads, ZeroWeightsGiveUniform) {
  ParamStore store;
  numeric::Tape t(store);
  Var h = t.constant(random_vector(8, 1), {8});
  Var te = t.constant(random_vector(4, 2), {4});
  const auto d = t.value(policy_head(t, t.constant(Array({3, 12})), t.constant(Array({3})), h, te));
  for (double v : d) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
  const auto s = t.value(policy_head(t, t.constant(Array({2, 12})), t.constant(Array({2})), h, te));
  for (double v : s) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Act, TwoBranchExamples) {
  PolicyOutput o;
  o.p = {0.2, 0.5, 0.3};
  o.s = {0.6, 0.4};
  EXPECT_EQ(act(o, true, 0.5), Action::left);
  EXPECT_EQ(act(o, false, 0.5), Action::forward);
  EXPECT_EQ(act(o, false, 0.5, false), Action::left);
  EXPECT_EQ(act(o, false, 0.4), Action::stop);  // s1 >= tau
  EXPECT_EQ(act(o, true, 0.0), Action::stop);
  o.s = {0.0, 1.0};
  EXPECT_EQ(act(o, true, 1.0), Action::stop);
  o.s = {0.5, 0.5};
  o.p = {0.4, 0.3, 0.4};  // tie goes to the lower index
  EXPECT_EQ(act(o, true, 0.9), Action::forward);
}

TEST(Act, TauAboveOneNeverStops) {
  PolicyOutput o;
  o.p = {0.1, 0.1, 0.8};
  o.s = {0.0, 1.0};
  EXPECT_EQ(act(o, true, 1.0 + 1e-9), Action::right);
  EXPECT_EQ(act(o, false, 1.5), Action::forward);
}

TEST(Act, FourWayExamples) {
  PolicyOutput o;
  o.p = {0.1, 0.2, 0.3, 0.4};
  EXPECT_EQ(act(o, false, 0.5), Action::stop);
  o.p = {0.1, 0.5, 0.3, 0.1};
  EXPECT_EQ(act(o, true, 0.5), Action::left);
  EXPECT_EQ(act(o, false, 0.5), Action::forward);
  EXPECT_EQ(act(o, false, 0.5, false), Action::left);
}

// Naive LSTM cell with gate order (input, forget, candidate, output).
std::vector<double> naive_lstm(const std::vector<double>& W, const std::vector<double>& b, const std::vector<double>& x,
                               std::vector<double>& h, std::vector<double>& c) {
  const std::size_t H = h.size(), X = x.size();
  std::vector<double> z(4 * H);
  for (std::size_t r = 0; r < 4 * H; ++r) {
    double acc = b[r];
    for (std::size_t j = 0; j < X; ++j) acc += W[r * (X + H) + j] * x[j];
    for (std::size_t j = 0; j < H; ++j) acc += W[r * (X + H) + X + j] * h[j];
    z[r] = acc;
  }
  const auto sg = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (std::size_t j = 0; j < H; ++j) {
    c[j] = sg(z[H + j]) * c[j] + sg(z[j]) * std::tanh(z[2 * H + j]);
    h[j] = sg(z[3 * H + j]) * std::tanh(c[j]);
  }
  return h;
}

TEST(EncodeText, ShapeAndNaiveOracle) {
  auto c = small(Variant::shared_enc_dec);
  c.word_embed = 4;
  c.text_hidden = 3;
  const auto params = init_params(c, 9);
  numeric::Tape t(params);
  const auto enc = bind_encoder(t, 0);
  const std::vector<language::TokenId> tokens = {2, 7, 7, 11, 3};
  Var out = encode_text(t, enc, tokens);
  ASSERT_EQ(t.shape(out), (numeric::Shape{5, 6}));

  const auto& E = params.value("encoder.word_embedding");
  const auto& Wf = params.value("encoder.text_forward.weight").values();
  const auto& bf = params.value("encoder.text_forward.bias").values();
  const auto& Wb = params.value("encoder.text_backward.weight").values();
  const auto& bb = params.value("encoder.text_backward.bias").values();
  auto embed = [&](language::TokenId id) {
    std::vector<double> v(4);
    for (std::size_t j = 0; j < 4; ++j) v[j] = E.at(static_cast<std::size_t>(id), j);
    return v;
  };
  std::vector<std::vector<double>> fwd(5), bwd(5);
  std::vector<double> h(3, 0.0), cc(3, 0.0);
  for (std::size_t l = 0; l < 5; ++l) fwd[l] = naive_lstm(Wf, bf, embed(tokens[l]), h, cc);
  h.assign(3, 0.0);
  cc.assign(3, 0.0);
  for (std::size_t k = 0; k < 5; ++k) bwd[4 - k] = naive_lstm(Wb, bb, embed(tokens[4 - k]), h, cc);
  const auto v = t.value(out);
  for (std::size_t l = 0; l < 5; ++l) {
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(v[l * 6 + j], fwd[l][j], 1e-12);
      EXPECT_NEAR(v[l * 6 + 3 + j], bwd[l][j], 1e-12);
    }
  }
}

TEST(EncodeText, PalindromeSymmetryWithTiedDirections) {
  auto c = small(Variant::shared_enc_dec);
  auto params = init_params(c, 3);
  params.value("encoder.text_backward.weight") = params.value("encoder.text_forward.weight");
  params.value("encoder.text_backward.bias") = params.value("encoder.text_forward.bias");
  numeric::Tape t(params);
  const std::vector<language::TokenId> tokens = {2, 5, 9, 5, 2};
  Var out = encode_text(t, bind_encoder(t, 0), tokens);
  const auto v = t.value(out);
  const std::size_t H = c.text_hidden;
  for (std::size_t l = 0; l < 5; ++l)
    for (std::size_t j = 0; j < H; ++j) EXPECT_DOUBLE_EQ(v[l * 2 * H + j], v[(4 - l) * 2 * H + H + j]);
}

TEST(EncodeText, RejectsEmptyAndOutOfVocabulary) {
  const auto c = small(Variant::shared_enc_dec);
  const auto params = init_params(c, 3);
  numeric::Tape t(params);
  const auto enc = bind_encoder(t, 0);
  EXPECT_THROW(encode_text(t, enc, std::vector<language::TokenId>{}), Error);
  EXPECT_THROW(encode_text(t, enc, std::vector<language::TokenId>{1, 20}), Error);
}

TEST(EncodeVisual, MatchesNaiveConvolutionStack) {
  const auto c = small(Variant::shared_enc_dec);
  const auto params = init_params(c, 5);
  const std::size_t C = c.obs_channels, L = c.obs_grid;
  const auto obs = random_vector(C * L * L, 77);
  numeric::Tape t(params);
  const auto enc = bind_encoder(t, 0);
  const auto got = t.value(encode_visual(t, enc, c, t.constant(obs, {C, L, L})));

  auto conv = [](const std::vector<double>& in, std::size_t ch, std::size_t side, const Array& k, const Array& b,
                 std::size_t stride, std::size_t& out_side) {
    const std::size_t F = k.shape()[0], K = k.shape()[2];
    out_side = (side - K) / stride + 1;
    std::vector<double> out(F * out_side * out_side);
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t y = 0; y < out_side; ++y)
        for (std::size_t x = 0; x < out_side; ++x) {
          double acc = b[f];
          for (std::size_t q = 0; q < ch; ++q)
            for (std::size_t dy = 0; dy < K; ++dy)
              for (std::size_t dx = 0; dx < K; ++dx)
                acc += k[((f * ch + q) * K + dy) * K + dx] * in[(q * side + y * stride + dy) * side + x * stride + dx];
          out[(f * out_side + y) * out_side + x] = std::max(acc, 0.0);
        }
    return out;
  };
  std::size_t s1 = 0, s2 = 0;
  const auto a = conv(obs, C, L, params.value("encoder.conv1.kernel"), params.value("encoder.conv1.bias"),
                      c.conv1.stride, s1);
  const auto b = conv(a, c.conv1.filters, s1, params.value("encoder.conv2.kernel"), params.value("encoder.conv2.bias"),
                      c.conv2.stride, s2);
  const auto& W = params.value("encoder.visual.weight");
  const auto& bias = params.value("encoder.visual.bias");
  ASSERT_EQ(got.size(), c.visual);
  for (std::size_t i = 0; i < c.visual; ++i) {
    double acc = bias[i];
    for (std::size_t j = 0; j < b.size(); ++j) acc += W.at(i, j) * b[j];
    EXPECT_NEAR(got[i], acc, 1e-12);
  }
}

TEST(EncodeVisual, RejectsWrongObservationShape) {
  const auto c = small(Variant::shared_enc_dec);
  const auto params = init_params(c, 5);
  numeric::Tape t(params);
  const auto enc = bind_encoder(t, 0);
  EXPECT_THROW(encode_visual(t, enc, c, t.constant(Array({c.obs_channels, 13, 13}))), Error);
}

// Which parameter prefixes receive gradient from each head's loss.
struct Reach {
  bool stop_encoder = false, stop_decoder = false, encoder = false, decoder = false, direction_head = false,
       stop_head = false;
};

Reach reach(Variant v, bool from_stop) {
  const auto c = small(v);
  const auto params = init_params(c, 11);
  numeric::Tape t(params);
  EpisodeGraph g(t, c, std::vector<language::TokenId>{2, 6, 4, 3});
  const auto obs = random_vector(c.obs_channels * c.obs_grid * c.obs_grid, 3);
  g.step(obs, std::nullopt, 0);
  const auto s = g.step(obs, Action::forward, 1);
  t.backward(t.log(t.pick(from_stop ? s.stop : s.direction, 1)));
  Reach r;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.entry(i).name;
    bool nonzero = false;
    for (double gv : t.param_grad(i)) nonzero |= gv != 0.0;
    if (!nonzero) continue;
    if (name.starts_with("stop_encoder.")) r.stop_encoder = true;
    else if (name.starts_with("stop_decoder.")) r.stop_decoder = true;
    else if (name.starts_with("encoder.")) r.encoder = true;
    else if (name.starts_with("decoder.")) r.decoder = true;
    else if (name.starts_with("direction_head.") || name.starts_with("policy_head.")) r.direction_head = true;
    else if (name.starts_with("stop_head.")) r.stop_head = true;
  }
  return r;
}

TEST(Variants, GradientFlowMatchesSharing) {
  {
    const auto d = reach(Variant::separate_enc_dec, false);
    EXPECT_TRUE(d.encoder && d.decoder && d.direction_head);
    EXPECT_FALSE(d.stop_encoder || d.stop_decoder || d.stop_head);
    const auto s = reach(Variant::separate_enc_dec, true);
    EXPECT_TRUE(s.stop_encoder && s.stop_decoder && s.stop_head);
    EXPECT_FALSE(s.encoder || s.decoder || s.direction_head);
  }
  {
    const auto s = reach(Variant::shared_enc, true);
    EXPECT_TRUE(s.encoder && s.stop_decoder && s.stop_head);
    EXPECT_FALSE(s.decoder || s.direction_head);
  }
  {
    const auto s = reach(Variant::shared_dec, true);
    EXPECT_TRUE(s.stop_encoder && s.decoder && s.stop_head);
    EXPECT_FALSE(s.encoder || s.direction_head);
  }
  {
    const auto s = reach(Variant::shared_enc_dec, true);
    EXPECT_TRUE(s.encoder && s.decoder && s.stop_head);
    EXPECT_FALSE(s.direction_head);
  }
}

TEST(Variants, OutputsAreDistributions) {
  for (auto v : {Variant::shared_enc_dec, Variant::shared_enc, Variant::shared_dec, Variant::separate_enc_dec,
                 Variant::one_branch}) {
    const auto c = small(v);
    const auto params = init_params(c, 1);
    numeric::Tape t(params);
    EpisodeGraph g(t, c, std::vector<language::TokenId>{2, 8, 3});
    const auto obs = random_vector(c.obs_channels * c.obs_grid * c.obs_grid, 5);
    const auto out = read_output(t, g.step(obs, std::nullopt, 0));
    ASSERT_EQ(out.p.size(), v == Variant::one_branch ? 4u : 3u);
    double sum = 0;
    for (double p : out.p) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_NEAR(out.s[0] + out.s[1], 1.0, 1e-12);
    if (v == Variant::one_branch) {
      EXPECT_DOUBLE_EQ(out.s[1], out.p[3]);
    }
  }
}

TEST(Config, KeyValueRoundTripAndValidation) {
  auto c = small(Variant::shared_dec);
  c.key_point_gating = false;
  c.visual = 48;
  EXPECT_EQ(parse_model_config(to_text(c)), c);
  EXPECT_EQ(from_key_values(to_key_values(c)), c);
  EXPECT_THROW(from_key_values({{"model.bogus", "1"}}), Error);
  auto bad = c;
  bad.obs_grid = 4;
  EXPECT_THROW(validate(bad), Error);
  bad = c;
  bad.vocab_size = 0;
  EXPECT_THROW(validate(bad), Error);
  EXPECT_EQ(conv_output_side(15, {16, 3, 2}), 7u);
  EXPECT_EQ(conv_output_side(7, {32, 3, 2}), 3u);
  EXPECT_EQ(conv_output_side(2, {32, 3, 2}), 0u);
  for (auto v : {Variant::shared_enc_dec, Variant::shared_enc, Variant::shared_dec, Variant::separate_enc_dec,
                 Variant::one_branch})
    EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_FALSE(parse_variant("nope").has_value());
}

}  // namespace
