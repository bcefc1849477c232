#include <gtest/gtest.h>

#include <cmath>

#include "synwarp/gradcheck.hpp"
#include "synwarp/model.hpp"
#include "synwarp/rac.hpp"

using namespace synwarp;

namespace {

struct Fixture {
  Config cfg = micro_config();
  ParamMap<float> params = init_model_params<float>(cfg);
  Tape tape;
  BoundParams<float> bp{tape, params, [](const std::string&) { return false; }};

  Value* random_image(Rng& rng) {
    Tensor img({3, cfg.image_size, cfg.image_size});
    for (long i = 0; i < img.numel(); ++i) img[i] = static_cast<float>(rng.next_double());
    return tape.constant(img);
  }

  Value* random_latent(Rng& rng, int ch) {
    Tensor t({ch, cfg.latent_hw(), cfg.latent_hw()});
    for (long i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    return tape.constant(t);
  }
};

}  // namespace

TEST(KeypointHeatmapEncoder, MapsVolumeToLatentGrid) {
  Fixture fx;
  Rng rng(21);
  Tensor heat({fx.cfg.keypoints, fx.cfg.feature_depth, fx.cfg.heatmap_size(),
               fx.cfg.heatmap_size()});
  for (long i = 0; i < heat.numel(); ++i) heat[i] = static_cast<float>(rng.next_double());
  Value* lat = encode_keypoint_heatmap(fx.tape, fx.bp, fx.cfg, fx.tape.constant(heat));
  EXPECT_EQ(lat->val.shape(), Shape({fx.cfg.ck, fx.cfg.latent_hw(), fx.cfg.latent_hw()}));
  EXPECT_TRUE(lat->val.all_finite());
}

TEST(KeypointHeatmapEncoder, RejectsWrongVolumeShape) {
  Fixture fx;
  EXPECT_THROW(encode_keypoint_heatmap(fx.tape, fx.bp, fx.cfg,
                                       fx.tape.constant(Tensor({1, 1, 4, 4}))),
               std::invalid_argument);
}

TEST(TextureEncoder, MapsImageToLatentGrid) {
  Fixture fx;
  Rng rng(22);
  Value* lat = encode_texture(fx.tape, fx.bp, fx.cfg, fx.random_image(rng));
  EXPECT_EQ(lat->val.shape(), Shape({fx.cfg.cv, fx.cfg.latent_hw(), fx.cfg.latent_hw()}));
}

TEST(CrossAttention, OutputShapeAndFiniteness) {
  Fixture fx;
  Rng rng(23);
  Value* hd = fx.random_latent(rng, fx.cfg.ck);
  std::vector<std::pair<Value*, Value*>> refs;
  for (int i = 0; i < 2; ++i)
    refs.emplace_back(fx.random_latent(rng, fx.cfg.ck), fx.random_latent(rng, fx.cfg.cv));
  Value* out = cross_attention_sample(fx.tape, fx.bp, fx.cfg, hd, refs);
  EXPECT_EQ(out->val.shape(), Shape({fx.cfg.cv, fx.cfg.latent_hw(), fx.cfg.latent_hw()}));
  EXPECT_TRUE(out->val.all_finite());
}

TEST(CrossAttention, EmptyReferenceListRejected) {
  Fixture fx;
  Rng rng(24);
  Value* hd = fx.random_latent(rng, fx.cfg.ck);
  EXPECT_THROW(cross_attention_sample(fx.tape, fx.bp, fx.cfg, hd, {}), std::invalid_argument);
}

TEST(CrossAttention, MoreReferencesThanMaxRejected) {
  Fixture fx;
  Rng rng(25);
  Value* hd = fx.random_latent(rng, fx.cfg.ck);
  std::vector<std::pair<Value*, Value*>> refs;
  for (int i = 0; i < fx.cfg.max_refs + 1; ++i)
    refs.emplace_back(fx.random_latent(rng, fx.cfg.ck), fx.random_latent(rng, fx.cfg.cv));
  EXPECT_THROW(cross_attention_sample(fx.tape, fx.bp, fx.cfg, hd, refs), std::invalid_argument);
}

// The attention mixer itself: rows of softmax(QK^T/sqrt(dk)) form a simplex,
// so every mixed token lies inside the convex hull of the value rows.
TEST(CrossAttention, RowsSumToOneAndMixStaysInValueHull) {
  Rng rng(26);
  const int dk = 6, dv = 5;
  for (int trial = 0; trial < 100; ++trial) {
    const int nq = 2 + static_cast<int>(rng.next_below(6));
    const int nk = 2 + static_cast<int>(rng.next_below(6));
    Tensor q({nq, dk}), k({nk, dk}), v({nk, dv});
    for (long i = 0; i < q.numel(); ++i) q[i] = static_cast<float>(rng.uniform(-2.0, 2.0));
    for (long i = 0; i < k.numel(); ++i) k[i] = static_cast<float>(rng.uniform(-2.0, 2.0));
    for (long i = 0; i < v.numel(); ++i) v[i] = static_cast<float>(rng.uniform(-3.0, 3.0));

    Tape tape;
    ops::OpAttrs scale;
    scale.alpha = 1.0 / std::sqrt(static_cast<double>(dk));
    ops::OpAttrs rows;
    rows.axis = 1;
    Value* scores = tape.apply("matmul", {tape.constant(q), tape.apply("transpose", {tape.constant(k)})});
    Value* att = tape.apply("softmax", {tape.apply("affine", {scores}, scale)}, rows);
    Value* mixed = tape.apply("matmul", {att, tape.constant(v)});

    for (int r = 0; r < nq; ++r) {
      double sum = 0.0;
      for (int c = 0; c < nk; ++c) sum += att->val[r * nk + c];
      EXPECT_NEAR(sum, 1.0, 1e-5);
      for (int c = 0; c < dv; ++c) {
        float lo = v[c], hi = v[c];
        for (int j = 1; j < nk; ++j) {
          lo = std::min(lo, v[j * dv + c]);
          hi = std::max(hi, v[j * dv + c]);
        }
        EXPECT_GE(mixed->val[r * dv + c], lo - 1e-5f);
        EXPECT_LE(mixed->val[r * dv + c], hi + 1e-5f);
      }
    }
  }
}

TEST(CrossAttention, SingleAndMultiReferencePathsAgreeOnDuplicates) {
  // Two identical references give key rows duplicated; attention over the
  // duplicated set must reproduce the single-reference mix when the per-slot
  // embedding is removed.
  Fixture fx;
  Tensor& pref = fx.params.at("rac.pref");
  for (long i = 0; i < pref.numel(); ++i) pref[i] = 0.0f;
  Rng rng(27);
  Value* hd = fx.random_latent(rng, fx.cfg.ck);
  Value* hr = fx.random_latent(rng, fx.cfg.ck);
  Value* ir = fx.random_latent(rng, fx.cfg.cv);
  Value* one = cross_attention_sample(fx.tape, fx.bp, fx.cfg, hd, {{hr, ir}});
  Value* two = cross_attention_sample(fx.tape, fx.bp, fx.cfg, hd, {{hr, ir}, {hr, ir}});
  ASSERT_EQ(one->val.shape(), two->val.shape());
  for (long i = 0; i < one->val.numel(); ++i) EXPECT_NEAR(one->val[i], two->val[i], 1e-4);
}
