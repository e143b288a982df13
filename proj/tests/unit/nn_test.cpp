#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "vcons/error.hpp"
#include "vcons/gradcheck_suite.hpp"
#include "vcons/nn/grad_check.hpp"
#include "vcons/nn/ops.hpp"
#include "vcons/nn/param_set.hpp"
#include "vcons/nn/tape.hpp"

namespace vcons::nn {
namespace {

TEST(Tensor, ShapesAndRows) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rows(), 6u);
  EXPECT_EQ(t.cols(), 4u);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), Error);
}

TEST(Ops, DenseForward) {
  Tape tape;
  Var x = tape.constant(Tensor({1, 2}, std::vector<double>{1, 2}));
  Var w = tape.constant(Tensor({2, 2}, std::vector<double>{1, 0, 3, 1}));
  Var b = tape.constant(Tensor::vector({0.5, -1}));
  EXPECT_EQ(dense(x, w, b).value().data()[0], 7.5);
  EXPECT_EQ(dense(x, w, b).value().data()[1], 1.0);
}

TEST(Ops, ShapeMismatchIsShapeError) {
  Tape tape;
  Var a = tape.constant(Tensor({2, 3}));
  Var b = tape.constant(Tensor({3, 2}));
  try {
    add(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

TEST(Ops, NonFiniteValuesAreNumericErrors) {
  Tape tape;
  Var a = tape.constant(Tensor({1, 1}, std::vector<double>{std::numeric_limits<double>::max()}));
  try {
    mul(a, a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
    EXPECT_NE(std::string(e.what()).find("mul"), std::string::npos);
  }
}

TEST(Ops, SoftmaxXentIgnoresMaskedRows) {
  Tape tape;
  Var logits = tape.leaf(Tensor({2, 3}, std::vector<double>{0, 0, 0, 5, 1, 2}));
  Var loss = softmax_xent(logits, {2, kIgnoreIndex});
  EXPECT_NEAR(loss.value().item(), std::log(3.0), 1e-15);
  tape.backward(loss);
  EXPECT_EQ(tape.grad(logits.id).at(1, 0), 0.0);
}

TEST(Ops, StableSigmoidExtremes) {
  EXPECT_EQ(stable_sigmoid(-1000), 0.0);
  EXPECT_EQ(stable_sigmoid(1000), 1.0);
  EXPECT_EQ(stable_sigmoid(0), 0.5);
}

TEST(Ops, DilatedConvOutputLength) {
  Tape tape;
  Var x = tape.constant(Tensor({1, 9, 2}));
  Var w = tape.constant(Tensor({3, 2, 4}));
  Var b = tape.constant(Tensor({4}));
  EXPECT_EQ(dilated_conv1d(x, w, b, 2).shape(), (Shape{1, 5, 4}));
  EXPECT_THROW(dilated_conv1d(x, w, b, 8), Error);
}

TEST(Ops, BatchNormUpdatesRunningStatsOnlyInTrainMode) {
  Tensor mean({2}), var({2}, 1.0);
  Tape tape;
  Var x = tape.constant(Tensor({2, 2}, std::vector<double>{1, 2, 3, 6}));
  Var g = tape.constant(Tensor({2}, 1.0));
  Var b = tape.constant(Tensor({2}));
  batchnorm1d(x, g, b, {&mean, &var}, Mode::kEval);
  EXPECT_EQ(mean[0], 0.0);
  Var y = batchnorm1d(x, g, b, {&mean, &var}, Mode::kTrain);
  EXPECT_NEAR(y.value().at(0, 0), -1.0 / std::sqrt(1.0 + kBatchNormEps), 1e-12);
  EXPECT_NE(mean[0], 0.0);
}

TEST(Tape, SharedParameterAccumulatesGradient) {
  ParamSet ps;
  ps.add("w", Tensor({1, 1}, std::vector<double>{3.0}));
  Tape tape;
  Var w1 = tape.param(ps, "w");
  Var w2 = tape.param(ps, "w");
  EXPECT_EQ(w1.id, w2.id);
  Var y = sum(mul(w1, w2));
  tape.backward(y);
  EXPECT_EQ(tape.param_grads().at("w")[0], 6.0);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamSet ps;
  ps.add("w", Tensor::vector({1.0, -2.0}));
  ps.add("frozen", Tensor::vector({5.0}), false);
  AdamOptions opts;
  opts.lr = 0.1;
  ps.adam_step({{"w", Tensor::vector({0.3, -4.0})}}, opts);
  EXPECT_NEAR(ps.get("w")[0], 0.9, 1e-7);
  EXPECT_NEAR(ps.get("w")[1], -1.9, 1e-7);
  EXPECT_EQ(ps.get("frozen")[0], 5.0);
  EXPECT_THROW(ps.adam_step({{"frozen", Tensor::vector({1.0})}}, opts), Error);
}

TEST(Adam, MinimizesQuadratic) {
  ParamSet ps;
  ps.add("x", Tensor::vector({4.0}));
  AdamOptions opts;
  opts.lr = 0.05;
  for (int i = 0; i < 2000; ++i) {
    Tape tape;
    Var x = tape.param(ps, "x");
    Var d = add(x, tape.constant(Tensor::vector({-1.5})));
    Var loss = sum(mul(d, d));
    tape.backward(loss);
    ps.adam_step(tape.param_grads(), opts);
  }
  EXPECT_NEAR(ps.get("x")[0], 1.5, 1e-3);
}

TEST(GradCheck, DetectsWrongGradient) {
  // Records y = x * x with a deliberately wrong backward.
  auto fn = [](Tape& tape, std::span<const Var> v) {
    Tensor out = v[0].value();
    for (double& x : out.data()) x *= x;
    Var y = tape.record(out, "bad_square", {v[0]}, [id = v[0].id](Tape& t, std::size_t self) {
      Tensor& g = t.grad(id);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += t.grad(self)[i] * t.value(id)[i];
    });
    return sum(y);
  };
  EXPECT_GT(grad_check(fn, {Tensor::vector({0.5, -1.2})}), 0.1);
}

class OpGradCheck : public ::testing::TestWithParam<std::size_t> {};

TEST_P(OpGradCheck, PassesAtOpTolerance) {
  static const auto rows = op_gradchecks(1);
  ASSERT_LT(GetParam(), rows.size());
  const auto& row = rows[GetParam()];
  EXPECT_LT(row.max_rel_err, kOpTolerance) << row.name;
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradCheck, ::testing::Range<std::size_t>(0, 24));

TEST(OpGradCheck, CoversTwentyFourOps) { EXPECT_EQ(op_gradchecks(2).size(), 24u); }

TEST(ModelGradCheck, EveryArchitectureAndOracle) {
  for (const auto& row : model_gradchecks(3)) EXPECT_LT(row.max_rel_err, kEndToEndTolerance) << row.name;
}

}  // namespace
}  // namespace vcons::nn
