#include <gtest/gtest.h>

#include "synwarp/gradcheck.hpp"
#include "synwarp/tape.hpp"

using namespace synwarp;

TEST(GradCheck, EveryKernelSinglePrecision) {
  for (const std::string& op : gradcheck_ops()) {
    const GradCheckResult r = check_op<float>(op, 20, 1e-3, 1e-3);
    EXPECT_TRUE(r.pass) << op << " max_err=" << r.max_err;
  }
}

TEST(GradCheck, EveryKernelDoublePrecision) {
  for (const std::string& op : gradcheck_ops()) {
    const GradCheckResult r = check_op<double>(op, 20, 1e-5, 1e-5);
    EXPECT_TRUE(r.pass) << op << " max_err=" << r.max_err;
  }
}

TEST(GradCheck, WholePipelineMicroConfig) {
  const GradCheckResult r = check_pipeline(5, 1e-2);
  EXPECT_TRUE(r.pass) << "max_err=" << r.max_err;
}

TEST(GradCheck, UnknownOpRejected) {
  EXPECT_THROW(run_gradcheck("warp_drive"), std::invalid_argument);
}

TEST(Tape, ProductRuleThroughSharedInput) {
  // y = (x + x) * x = 2 x^2, dy/dx = 4 x.
  Tape tape;
  Tensor xv({1});
  xv[0] = 3.0f;
  Value* x = tape.leaf(xv, true);
  Value* s = tape.apply("add", {x, x});
  Value* y = tape.apply("mul", {s, x});
  Value* loss = tape.apply("mean", {y});
  tape.backward(loss);
  EXPECT_FLOAT_EQ(y->val[0], 18.0f);
  EXPECT_FLOAT_EQ(x->grad[0], 12.0f);
}

TEST(Tape, ReshapeIsGradientTransparent) {
  Tape tape;
  Tensor xv({2, 3});
  for (long i = 0; i < 6; ++i) xv[i] = static_cast<float>(i);
  Value* x = tape.leaf(xv, true);
  Value* r = tape.reshape(x, Shape({6}));
  Value* loss = tape.apply("mean", {r});
  tape.backward(loss);
  ASSERT_EQ(x->grad.shape(), Shape({2, 3}));
  for (long i = 0; i < 6; ++i) EXPECT_NEAR(x->grad[i], 1.0 / 6.0, 1e-7);
}

TEST(Tape, ConstantsReceiveNoGradient) {
  Tape tape;
  Value* c = tape.constant(Tensor::full(Shape({2}), 2.0f));
  Tensor xv({2});
  xv[0] = 1.0f;
  xv[1] = 2.0f;
  Value* x = tape.leaf(xv, true);
  Value* y = tape.apply("mul", {x, c});
  Value* loss = tape.apply("mean", {y});
  tape.backward(loss);
  EXPECT_FALSE(c->requires_grad);
  EXPECT_TRUE(c->grad.empty());
  EXPECT_FLOAT_EQ(x->grad[0], 1.0f);
}

TEST(Tape, BackwardRequiresScalarLoss) {
  Tape tape;
  Value* x = tape.leaf(Tensor::full(Shape({3}), 1.0f), true);
  EXPECT_THROW(tape.backward(x), std::invalid_argument);
}

TEST(Tape, ChainThroughNonlinearityMatchesHandGradient) {
  // loss = mean(sigmoid(2x)); d/dx = 2 sigmoid'(2x) / n.
  Tape tape;
  Tensor xv({2});
  xv[0] = 0.3f;
  xv[1] = -1.1f;
  Value* x = tape.leaf(xv, true);
  ops::OpAttrs a;
  a.alpha = 2.0;
  Value* y = tape.apply("sigmoid", {tape.apply("affine", {x}, a)});
  tape.backward(tape.apply("mean", {y}));
  for (int i = 0; i < 2; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-2.0 * xv[i]));
    EXPECT_NEAR(x->grad[i], 2.0 * s * (1.0 - s) / 2.0, 1e-6);
  }
}
