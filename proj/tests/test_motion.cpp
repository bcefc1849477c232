#include <gtest/gtest.h>

#include <cmath>

#include "synwarp/gradcheck.hpp"
#include "synwarp/model.hpp"
#include "synwarp/motion.hpp"

using namespace synwarp;

namespace {

Tensor random_keypoints(Rng& rng, int K) {
  Tensor xc({K, 3});
  for (long i = 0; i < xc.numel(); ++i) xc[i] = static_cast<float>(rng.uniform(-0.8, 0.8));
  return xc;
}

}  // namespace

TEST(KeypointTransform, IdentityMotionIsExact) {
  Rng rng(31);
  const Tensor xc = random_keypoints(rng, 7);
  MotionParams id;  // zero angles/translation, empty delta, s = 1
  const Tensor out = transform_keypoints(xc, id);
  EXPECT_TRUE(out.same_bits(xc));
}

TEST(KeypointTransform, YawQuarterTurnSendsXToMinusZ) {
  Tensor a({3});
  a[0] = static_cast<float>(M_PI / 2.0);
  a[1] = 0.0f;
  a[2] = 0.0f;
  const Tensor r = ops::euler_rot(a);
  // Row vector (1,0,0) times R.
  EXPECT_NEAR(r[0 * 3 + 0], 0.0, 1e-6);
  EXPECT_NEAR(r[0 * 3 + 1], 0.0, 1e-6);
  EXPECT_NEAR(r[0 * 3 + 2], -1.0, 1e-6);
}

TEST(KeypointTransform, RotationIsOrthonormal) {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor a({3});
    for (int i = 0; i < 3; ++i) a[i] = static_cast<float>(rng.uniform(-1.5, 1.5));
    const Tensor r = ops::euler_rot(a);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double dot = 0.0;
        for (int k = 0; k < 3; ++k) dot += double(r[i * 3 + k]) * double(r[j * 3 + k]);
        EXPECT_NEAR(dot, i == j ? 1.0 : 0.0, 1e-6);
      }
  }
}

TEST(KeypointTransform, FullMotionMatchesHandComputation) {
  // Single point, yaw only, with delta / scale / translation.
  Tensor xc({1, 3});
  xc[0] = 0.4f;
  xc[1] = -0.2f;
  xc[2] = 0.1f;
  MotionParams p;
  p.yaw = 0.3;
  p.s = 1.5;
  p.t[0] = 0.05f;
  p.t[1] = -0.1f;
  p.t[2] = 0.2f;
  p.delta = Tensor({1, 3});
  p.delta[0] = 0.02f;
  p.delta[1] = 0.03f;
  p.delta[2] = -0.01f;
  const Tensor out = transform_keypoints(xc, p);
  const double c = std::cos(0.3), s = std::sin(0.3);
  // Yaw rotates the x/z plane; the quarter-turn test pins the sign convention
  // (x-hat -> minus z-hat), so row vector x' = (x c + z s, y, -x s + z c).
  const double rx = 0.4 * c + 0.1 * s, ry = -0.2, rz = -0.4 * s + 0.1 * c;
  EXPECT_NEAR(out[0], 1.5 * (rx + 0.02) + 0.05, 1e-6);
  EXPECT_NEAR(out[1], 1.5 * (ry + 0.03) - 0.1, 1e-6);
  EXPECT_NEAR(out[2], 1.5 * (rz - 0.01) + 0.2, 1e-6);
}

TEST(KeypointTransform, RejectsBadShapesAndScale) {
  MotionParams p;
  EXPECT_THROW(transform_keypoints(Tensor({4, 2}), p), std::invalid_argument);
  p.s = -1.0;
  EXPECT_THROW(transform_keypoints(Tensor({4, 3}), p), std::invalid_argument);
  p.s = 1.0;
  p.delta = Tensor({3, 3});  // K mismatch
  EXPECT_THROW(transform_keypoints(Tensor({4, 3}), p), std::invalid_argument);
}

TEST(KeypointTransform, TapedNodeMatchesPlainEvaluation) {
  Rng rng(55);
  const int K = 5;
  const Tensor xc = random_keypoints(rng, K);
  MotionParams p;
  p.yaw = 0.4;
  p.pitch = -0.2;
  p.roll = 0.15;
  p.s = 1.2;
  for (int i = 0; i < 3; ++i) p.t[i] = static_cast<float>(rng.uniform(-0.3, 0.3));
  p.delta = Tensor({K, 3});
  for (long i = 0; i < p.delta.numel(); ++i)
    p.delta[i] = static_cast<float>(rng.uniform(-0.2, 0.2));

  const Tensor plain = transform_keypoints(xc, p);
  Tape tape;
  const MotionNodes<float> m = motion_constants(tape, p, K);
  Value* node = transform_keypoints_node(tape, tape.constant(xc), m);
  ASSERT_EQ(node->val.shape(), plain.shape());
  for (long i = 0; i < plain.numel(); ++i) EXPECT_NEAR(node->val[i], plain[i], 1e-5);
}

TEST(KeypointTransform, ZeroZNodeFlattensDepth) {
  Rng rng(9);
  Tape tape;
  Value* kp = tape.constant(random_keypoints(rng, 4));
  Value* flat = zero_z_node(tape, kp);
  for (int k = 0; k < 4; ++k) {
    EXPECT_FLOAT_EQ(flat->val[k * 3 + 0], kp->val[k * 3 + 0]);
    EXPECT_FLOAT_EQ(flat->val[k * 3 + 1], kp->val[k * 3 + 1]);
    EXPECT_FLOAT_EQ(flat->val[k * 3 + 2], 0.0f);
  }
}

TEST(MotionEncoder, ZeroInitializedHeadsDecodeIdentityMotion) {
  const Config cfg = micro_config();
  ParamMap<float> params = init_model_params<float>(cfg);
  Rng rng(123);
  Tensor img({3, cfg.image_size, cfg.image_size});
  for (long i = 0; i < img.numel(); ++i) img[i] = static_cast<float>(rng.next_double());
  auto [xc, p] = encode_motion_plain(params, cfg, img);
  ASSERT_EQ(xc.shape(), Shape({cfg.keypoints, 3}));
  EXPECT_DOUBLE_EQ(p.yaw, 0.0);
  EXPECT_DOUBLE_EQ(p.pitch, 0.0);
  EXPECT_DOUBLE_EQ(p.roll, 0.0);
  EXPECT_DOUBLE_EQ(p.s, 1.0);
  for (int i = 0; i < 3; ++i) EXPECT_FLOAT_EQ(p.t[i], 0.0f);
  for (long i = 0; i < p.delta.numel(); ++i) EXPECT_FLOAT_EQ(p.delta[i], 0.0f);
}

TEST(MotionEncoder, HeadOutputsStayInDesignedRanges) {
  const Config cfg = micro_config();
  ParamMap<float> params = init_model_params<float>(cfg);
  // Give the zero-initialized heads large weights so the bounds are exercised.
  Rng wr(3141);
  for (const char* name : {"enc.mot.head.ang.w", "enc.mot.head.ang.b", "enc.mot.head.t.w",
                           "enc.mot.head.delta.w", "enc.mot.head.delta.b", "enc.mot.head.s.w",
                           "enc.mot.head.s.b"}) {
    Tensor& t = params.at(name);
    for (long i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(wr.uniform(-5.0, 5.0));
  }
  Rng rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor img({3, cfg.image_size, cfg.image_size});
    for (long i = 0; i < img.numel(); ++i) img[i] = static_cast<float>(rng.next_double());
    auto [xc, p] = encode_motion_plain(params, cfg, img);
    for (long i = 0; i < xc.numel(); ++i) EXPECT_LE(std::abs(xc[i]), 1.0f);
    EXPECT_LE(std::abs(p.yaw), M_PI / 2.0 + 1e-6);
    EXPECT_LE(std::abs(p.pitch), M_PI / 2.0 + 1e-6);
    EXPECT_LE(std::abs(p.roll), M_PI / 2.0 + 1e-6);
    for (long i = 0; i < p.delta.numel(); ++i) EXPECT_LE(std::abs(p.delta[i]), 0.3f + 1e-6f);
    EXPECT_GT(p.s, 0.0);
    EXPECT_GE(p.s, std::exp(-0.5) - 1e-6);
    EXPECT_LE(p.s, std::exp(0.5) + 1e-6);
  }
}

TEST(AppearanceEncoder, ProducesConfiguredVolumeShape) {
  const Config cfg = micro_config();
  ParamMap<float> params = init_model_params<float>(cfg);
  Tape tape;
  BoundParams<float> bp(tape, params, [](const std::string&) { return false; });
  Rng rng(42);
  Tensor img({3, cfg.image_size, cfg.image_size});
  for (long i = 0; i < img.numel(); ++i) img[i] = static_cast<float>(rng.next_double());
  Value* vol = encode_appearance(tape, bp, cfg, tape.constant(img));
  EXPECT_EQ(vol->val.shape(), Shape({cfg.feature_channels, cfg.feature_depth, cfg.feature_hw(),
                                     cfg.feature_hw()}));
  EXPECT_TRUE(vol->val.all_finite());
}

TEST(AppearanceEncoder, RejectsWrongImageGeometry) {
  const Config cfg = micro_config();
  ParamMap<float> params = init_model_params<float>(cfg);
  Tape tape;
  BoundParams<float> bp(tape, params, [](const std::string&) { return false; });
  EXPECT_THROW(encode_appearance(tape, bp, cfg, tape.constant(Tensor({1, cfg.image_size, cfg.image_size}))),
               std::invalid_argument);
  EXPECT_THROW(encode_appearance(tape, bp, cfg, tape.constant(Tensor({3, 8, 8}))),
               std::invalid_argument);
}

TEST(DrivingKeypoints, BothSetsDeriveFromSourceCanonical) {
  const int K = 4;
  Rng rng(7);
  const Tensor xc = random_keypoints(rng, K);
  MotionParams ps, pd;
  ps.yaw = 0.2;
  pd.yaw = -0.5;
  pd.s = 1.3;
  Tape tape;
  Value* xcn = tape.constant(xc);
  auto [xs, xd] = driving_keypoints(tape, xcn, motion_constants(tape, ps, K),
                                    motion_constants(tape, pd, K), false);
  const Tensor xs_ref = transform_keypoints(xc, ps);
  const Tensor xd_ref = transform_keypoints(xc, pd);
  for (long i = 0; i < xs_ref.numel(); ++i) {
    EXPECT_NEAR(xs->val[i], xs_ref[i], 1e-5);
    EXPECT_NEAR(xd->val[i], xd_ref[i], 1e-5);
  }
}
