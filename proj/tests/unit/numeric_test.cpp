#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "gradcheck.hpp"
#include "stopnav/error.hpp"
#include "stopnav/numeric/adam.hpp"
#include "stopnav/numeric/array.hpp"
#include "stopnav/numeric/checkpoint.hpp"
#include "stopnav/numeric/param_store.hpp"
#include "stopnav/numeric/tape.hpp"
#include "stopnav/rng.hpp"

namespace {

using namespace stopnav;
using numeric::Array;
using numeric::ParamStore;
using numeric::Tape;
using numeric::Var;

TEST(Tape, SquareHasAnalyticGradient) {
  ParamStore ps;
  ps.add("p", Array({1, 1}, {3.0}));
  Tape tape(ps);
  const Var p = tape.param("p");
  const Var loss = tape.matvec(p, p);
  EXPECT_DOUBLE_EQ(tape.scalar(loss), 9.0);
  tape.backward(loss);
  ASSERT_EQ(tape.param_grad(0).size(), 1u);
  EXPECT_DOUBLE_EQ(tape.param_grad(0)[0], 6.0);
}

TEST(Tape, SumOfSoftmaxHasZeroGradient) {
  Rng rng(5, "softmax-sum");
  for (int trial = 0; trial < 20; ++trial) {
    ParamStore ps;
    Array z({7});
    for (auto& v : z.data()) v = rng.normal() * 10.0;
    ps.add("z", z);
    Tape tape(ps);
    const Var loss = tape.sum(tape.softmax(tape.param("z")));
    EXPECT_NEAR(tape.scalar(loss), 1.0, 1e-12);
    tape.backward(loss);
    for (double g : tape.param_grad(0)) EXPECT_NEAR(g, 0.0, 1e-12);
  }
}

TEST(Tape, RejectsNonScalarLoss) {
  ParamStore ps;
  ps.add("z", Array({3}, {1.0, 2.0, 3.0}));
  Tape tape(ps);
  const Var z = tape.softmax(tape.param("z"));
  try {
    tape.backward(z);
    FAIL() << "expected shape_mismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::shape_mismatch);
  }
}

TEST(Tape, ShapeMismatchNamesTheOp) {
  ParamStore ps;
  ps.add("w", Array({2, 3}));
  ps.add("x", Array({4}));
  Tape tape(ps);
  try {
    tape.matvec(tape.param("w"), tape.param("x"));
    FAIL() << "expected shape_mismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::shape_mismatch);
    EXPECT_NE(std::string(e.what()).find("matvec"), std::string::npos) << e.what();
  }
}

TEST(Tape, UnreachedParametersGetZeroGradients) {
  ParamStore ps;
  ps.add("used", Array({2}, {1.0, 2.0}));
  ps.add("unused", Array({3}, {1.0, 1.0, 1.0}));
  Tape tape(ps);
  const Var loss = tape.sum(tape.tanh(tape.param("used")));
  tape.backward(loss);
  EXPECT_TRUE(tape.param_grad(1).empty());
  const auto grads = tape.gradients();
  ASSERT_EQ(grads.at("unused").size(), 3u);
  for (double g : grads.at("unused").values()) EXPECT_EQ(g, 0.0);
}

// Every op, composed into a small network, against central differences.
TEST(Tape, TwoLayerNetworkMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed, "two-layer");
    ParamStore ps;
    auto rnd = [&](numeric::Shape shape) {
      Array a(shape);
      for (auto& v : a.data()) v = rng.normal() * 0.5;
      return a;
    };
    ps.add("w1", rnd({5, 4}));
    ps.add("b1", rnd({5}));
    ps.add("w2", rnd({3, 5}));
    ps.add("b2", rnd({3}));
    ps.add("emb", rnd({6, 4}));
    ps.add("lstm.w", rnd({12, 7}));
    ps.add("lstm.b", rnd({12}));
    ps.add("kernel", rnd({2, 2, 3, 3}));
    ps.add("kbias", rnd({2}));
    const Array image = rnd({2, 7, 7});
    auto loss = [&](Tape& t) {
      const Var x = t.embedding(t.param("emb"), 2);
      const Var h1 = t.tanh(t.affine(t.param("w1"), x, t.param("b1")));
      const Var zero3 = t.constant(std::vector<double>(3, 0.0), {3});
      const Var cell = t.lstm_cell(t.slice(h1, 0, 4), zero3, zero3, t.param("lstm.w"), t.param("lstm.b"));
      const Var conv = t.relu(t.conv2d(t.constant(image), t.param("kernel"), t.param("kbias"), 2));
      const Var pooled = t.scale(t.sum(conv), 0.1);
      const Var mix = t.concat({t.slice(cell, 0, 3), t.sigmoid(t.slice(h1, 3, 2))});
      const Var logits = t.add(t.affine(t.param("w2"), mix, t.param("b2")), t.concat({pooled, pooled, pooled}));
      const Var rows = t.stack(std::vector<Var>{logits, t.tanh(logits)});
      const Var back = t.matvec_transposed(rows, t.constant(std::vector<double>{0.3, -0.7}, {2}));
      const Var p = t.softmax(back);
      return t.scale(t.log(t.pick(p, 1)), -1.0);
    };
    testkit::GradCheckConfig cfg;
    cfg.seed = seed;
    cfg.entries_per_param = 1000;
    const auto result = testkit::grad_check(ps, loss, cfg);
    EXPECT_TRUE(result.passed(1e-4)) << "worst " << result.worst << " at " << result.worst_param;
    EXPECT_TRUE(result.skipped.empty());
  }
}

TEST(Tape, LogClampIsCounted) {
  ParamStore ps;
  ps.add("x", Array({2}, {0.0, 0.5}));
  Tape tape(ps);
  const Var l = tape.sum(tape.log(tape.param("x")));
  EXPECT_EQ(tape.log_clamp_count(), 1u);
  EXPECT_NEAR(tape.scalar(l), std::log(Tape::kLogFloor) + std::log(0.5), 1e-9);
}

TEST(Softmax, Examples) {
  const Array a = numeric::softmax(Array({2}, {0.0, 0.0}));
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  EXPECT_DOUBLE_EQ(a[1], 0.5);
  const Array b = numeric::softmax(Array({2}, {0.0, std::log(3.0)}));
  EXPECT_NEAR(b[0], 0.25, 1e-15);
  EXPECT_NEAR(b[1], 0.75, 1e-15);
  const Array c = numeric::softmax(Array({2}, {1000.0, 1000.0}));
  EXPECT_DOUBLE_EQ(c[0], 0.5);
  EXPECT_DOUBLE_EQ(c[1], 0.5);
}

TEST(Softmax, ProbabilityVectorAndShiftInvariance) {
  Rng rng(9, "softmax-prop");
  for (int trial = 0; trial < 200; ++trial) {
    Array z({1 + rng.below(9)});
    for (auto& v : z.data()) v = rng.uniform(-1000.0, 1000.0);
    const Array p = numeric::softmax(z);
    double total = 0.0;
    for (double v : p.values()) {
      EXPECT_GE(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
    Array shifted = z;
    for (auto& v : shifted.data()) v += 123.0;
    const Array q = numeric::softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-9);
  }
}

TEST(Softmax, AlongSecondAxis) {
  const Array p = numeric::softmax(Array({2, 2}, {0.0, 0.0, 0.0, std::log(3.0)}), 1);
  EXPECT_NEAR(p.at(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(p.at(1, 1), 0.75, 1e-15);
}

TEST(Softmax, RejectsEmptyAxis) {
  EXPECT_THROW(numeric::softmax(numeric::softmax(Array({2}, {0.0, 0.0}), 1)), Error);
  EXPECT_THROW(numeric::softmax(Array({0})), Error);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  for (double g : {2.5, -0.003, 40.0}) {
    ParamStore ps;
    ps.add("w", Array({1}, {1.0}));
    numeric::Gradients grads{{"w", Array({1}, {g})}};
    numeric::AdamConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.epsilon = 1e-300;
    numeric::adam_step(ps, grads, cfg);
    EXPECT_NEAR(ps.value("w")[0] - 1.0, -0.01 * (g > 0 ? 1.0 : -1.0), 1e-12);
    EXPECT_EQ(ps.step(), 1u);
  }
}

TEST(Adam, ZeroGradientLeavesParameterButAdvancesStep) {
  ParamStore ps;
  ps.add("w", Array({3}, {1.0, -2.0, 3.0}));
  const Array before = ps.value("w");
  numeric::adam_step(ps, ps.zero_gradients(), {});
  EXPECT_EQ(ps.value("w"), before);
  EXPECT_EQ(ps.step(), 1u);
}

// Scalar trace of f(w) = w^2 from w = 1, lr 0.1, betas (0.9, 0.999),
// eps 1e-8, computed by hand from the bias-corrected update.
TEST(Adam, ThreeStepTraceOnSquare) {
  ParamStore ps;
  ps.add("w", Array({1}, {1.0}));
  numeric::AdamConfig cfg;
  cfg.learning_rate = 0.1;
  const double expected[] = {0.9000000005, 0.8004122286917928, 0.7015862729460303};
  double prev = 1.0;
  for (double want : expected) {
    numeric::Gradients g{{"w", Array({1}, {2.0 * ps.value("w")[0]})}};
    numeric::adam_step(ps, g, cfg);
    const double w = ps.value("w")[0];
    EXPECT_LT(w, prev);
    EXPECT_NEAR(w, want, 1e-12);
    prev = w;
  }
  EXPECT_EQ(ps.step(), 3u);
}

TEST(Adam, RejectsNonPositiveLearningRateAndShapeMismatch) {
  ParamStore ps;
  ps.add("w", Array({2}));
  numeric::AdamConfig cfg;
  cfg.learning_rate = 0.0;
  EXPECT_THROW(numeric::adam_step(ps, ps.zero_gradients(), cfg), Error);
  cfg.learning_rate = -1.0;
  EXPECT_THROW(numeric::adam_step(ps, ps.zero_gradients(), cfg), Error);
  numeric::Gradients wrong{{"w", Array({3})}};
  EXPECT_THROW(numeric::adam_step(ps, wrong, {}), Error);
}

TEST(Adam, Deterministic) {
  auto run = [] {
    ParamStore ps;
    ps.add("a", Array({4}, {0.1, 0.2, -0.3, 0.4}));
    for (int i = 0; i < 5; ++i) {
      numeric::Gradients g{{"a", Array({4}, {0.5, -1.0, 2.0, 1e-3 * i})}};
      numeric::adam_step(ps, g, {});
    }
    return ps;
  };
  EXPECT_EQ(run(), run());
}

TEST(Checkpoint, RoundTripKeepsValuesMomentsAndStep) {
  Rng rng(3, "ckpt");
  ParamStore ps;
  Array a({3, 4});
  for (auto& v : a.data()) v = rng.normal() * 1e3;
  ps.add("layer.weight", a);
  ps.add("layer.bias", Array({4}, {1e-300, -0.0, 1.0 / 3.0, 6.02e23}));
  numeric::Gradients g = ps.zero_gradients();
  for (auto& v : g.at("layer.weight").data()) v = rng.normal();
  numeric::adam_step(ps, g, {});
  numeric::adam_step(ps, g, {});
  const ParamStore back = numeric::load_checkpoint(numeric::save_checkpoint(ps));
  ASSERT_EQ(back.size(), ps.size());
  EXPECT_EQ(back.step(), 2u);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& x = ps.entry(i);
    const auto& y = back.entry(i);
    EXPECT_EQ(x.name, y.name);
    EXPECT_EQ(x.value.shape(), y.value.shape());
    for (std::size_t k = 0; k < x.value.size(); ++k) {
      EXPECT_NEAR(x.value[k], y.value[k], 1e-12 * std::max(1.0, std::fabs(x.value[k])));
      EXPECT_NEAR(x.first_moment[k], y.first_moment[k], 1e-12 * std::max(1.0, std::fabs(x.first_moment[k])));
      EXPECT_NEAR(x.second_moment[k], y.second_moment[k], 1e-12 * std::max(1.0, std::fabs(x.second_moment[k])));
    }
  }
}

TEST(Checkpoint, RejectsMalformedDocuments) {
  EXPECT_THROW(numeric::load_checkpoint("not json"), Error);
  EXPECT_THROW(numeric::load_checkpoint("{}"), Error);
}

TEST(Rng, DerivedStreamsAreReproducibleAndDistinct) {
  Rng a(42, "alpha"), b(42, "alpha"), c(42, "beta");
  bool differs = false;
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs |= x != c.next();
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(derive_seed(1, "x"), splitmix64(1 ^ fnv1a64("x")));
}

}  // namespace
