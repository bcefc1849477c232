#include <gtest/gtest.h>

#include "synwarp/dofw.hpp"
#include "synwarp/gradcheck.hpp"
#include "synwarp/model.hpp"

using namespace synwarp;

namespace {

struct Fixture {
  Config cfg = micro_config();
  ParamMap<float> params = init_model_params<float>(cfg);
  Tape tape;
  BoundParams<float> bp{tape, params, [](const std::string&) { return false; }};

  Value* random_feature(Rng& rng) {
    Tensor f({cfg.feature_channels, cfg.feature_depth, cfg.feature_hw(), cfg.feature_hw()});
    for (long i = 0; i < f.numel(); ++i) f[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    return tape.constant(f);
  }

  Value* random_keypoints(Rng& rng) {
    Tensor kp({cfg.keypoints, 3});
    for (long i = 0; i < kp.numel(); ++i) kp[i] = static_cast<float>(rng.uniform(-0.7, 0.7));
    return tape.constant(kp);
  }
};

}  // namespace

TEST(FlowEstimate, EqualKeypointsReproduceSourceFeatureOnGrid) {
  // When x_s == x_d every candidate is the identity grid, so the convex
  // combination is the identity grid and the warp resamples f_s at its own
  // voxel centres.
  Fixture fx;
  Rng rng(11);
  Value* fs = fx.random_feature(rng);
  Value* kp = fx.random_keypoints(rng);
  FlowEstimate<float> est = estimate_flow(fx.tape, fx.bp, fx.cfg, fs, kp, kp);
  ASSERT_EQ(est.warped->val.shape(), fs->val.shape());
  for (long i = 0; i < fs->val.numel(); ++i)
    EXPECT_NEAR(est.warped->val[i], fs->val[i], 1e-5) << "flat index " << i;
}

TEST(FlowEstimate, ShapesFollowConfiguredGeometry) {
  Fixture fx;
  Rng rng(12);
  Value* fs = fx.random_feature(rng);
  FlowEstimate<float> est =
      estimate_flow(fx.tape, fx.bp, fx.cfg, fs, fx.random_keypoints(rng), fx.random_keypoints(rng));
  const int K = fx.cfg.keypoints, D = fx.cfg.feature_depth, H = fx.cfg.feature_hw();
  EXPECT_EQ(est.flow->val.shape(), Shape({D, H, H, 3}));
  EXPECT_EQ(est.masks->val.shape(), Shape({K + 1, D, H, H}));
  EXPECT_EQ(est.warped->val.shape(), Shape({fx.cfg.feature_channels, D, H, H}));
  EXPECT_TRUE(est.flow->val.all_finite());
  EXPECT_TRUE(est.warped->val.all_finite());
}

TEST(FlowEstimate, MasksFormASimplexPerVoxel) {
  Fixture fx;
  Rng rng(13);
  Value* fs = fx.random_feature(rng);
  FlowEstimate<float> est =
      estimate_flow(fx.tape, fx.bp, fx.cfg, fs, fx.random_keypoints(rng), fx.random_keypoints(rng));
  const int K1 = fx.cfg.keypoints + 1;
  const long voxels = est.masks->val.numel() / K1;
  for (long v = 0; v < voxels; ++v) {
    double sum = 0.0;
    for (int k = 0; k < K1; ++k) {
      const float m = est.masks->val[k * voxels + v];
      EXPECT_GE(m, 0.0f);
      EXPECT_LE(m, 1.0f);
      sum += m;
    }
    EXPECT_NEAR(sum, 1.0, 1e-5);
  }
}

TEST(FlowEstimate, CombinedFlowStaysInCandidateHull) {
  Fixture fx;
  Rng rng(14);
  Value* fs = fx.random_feature(rng);
  Value* xs = fx.random_keypoints(rng);
  Value* xd = fx.random_keypoints(rng);
  FlowEstimate<float> est = estimate_flow(fx.tape, fx.bp, fx.cfg, fs, xs, xd);

  const Tensor cands =
      ops::candidate_flows(xs->val, xd->val, fx.cfg.feature_depth, fx.cfg.feature_hw(),
                           fx.cfg.feature_hw());
  const int K1 = fx.cfg.keypoints + 1;
  const long per = est.flow->val.numel();
  for (long i = 0; i < per; ++i) {
    float lo = cands[i], hi = cands[i];
    for (int k = 1; k < K1; ++k) {
      lo = std::min(lo, cands[k * per + i]);
      hi = std::max(hi, cands[k * per + i]);
    }
    EXPECT_GE(est.flow->val[i], lo - 1e-5f);
    EXPECT_LE(est.flow->val[i], hi + 1e-5f);
  }
}

TEST(FlowEstimate, EvidenceChannelCountDrivesFirstConv) {
  const Config cfg = micro_config();
  ParamMap<float> params = init_model_params<float>(cfg);
  const Tensor& w1 = params.at("dofw.conv1.w");
  EXPECT_EQ(w1.dim(1), (cfg.keypoints + 1) * cfg.feature_channels + cfg.keypoints);
}

TEST(FlowEstimate, KeypointCountMismatchRejected) {
  Fixture fx;
  Rng rng(15);
  Value* fs = fx.random_feature(rng);
  Value* bad = fx.tape.constant(Tensor({fx.cfg.keypoints + 2, 3}));
  EXPECT_THROW(estimate_flow(fx.tape, fx.bp, fx.cfg, fs, bad, bad), std::invalid_argument);
}

TEST(ApplyWarp, IdentityGridReturnsFeatureExactlyOnGrid) {
  Fixture fx;
  Rng rng(16);
  Value* fs = fx.random_feature(rng);
  Value* id = fx.tape.constant(ops::grid_coords<float>(
      fx.cfg.feature_depth, fx.cfg.feature_hw(), fx.cfg.feature_hw()));
  Value* warped = apply_warp(fx.tape, id, fs);
  for (long i = 0; i < fs->val.numel(); ++i) EXPECT_NEAR(warped->val[i], fs->val[i], 1e-6);
}

TEST(ApplyWarp, RejectsMismatchedGrids) {
  Fixture fx;
  Rng rng(17);
  Value* fs = fx.random_feature(rng);
  Value* bad = fx.tape.constant(Tensor({1, 2, 2, 3}));
  EXPECT_THROW(apply_warp(fx.tape, bad, fs), std::invalid_argument);
  Value* not_flow = fx.tape.constant(Tensor({fx.cfg.feature_depth, fx.cfg.feature_hw(),
                                             fx.cfg.feature_hw(), 2}));
  EXPECT_THROW(apply_warp(fx.tape, not_flow, fs), std::invalid_argument);
}
