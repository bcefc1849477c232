#pragma once

#include <cmath>
#include <vector>

#include "synwarp/config.hpp"
#include "synwarp/params.hpp"

// Reference-augmented correction: keypoint/texture encoders to a shared token
// grid, then one scaled dot-product cross-attention pass that samples
// reference texture for the driving pose.

namespace synwarp {

template <typename T>
void init_rac_params(const Config& cfg, Rng& rng, ParamMap<T>& p) {
  const int kd = cfg.keypoints * cfg.feature_depth;
  const int hw = cfg.latent_hw() * cfg.latent_hw();
  p["rac.kp.conv1.w"] = init_params<T>(rng, {cfg.ck, kd, 3, 3}, kd * 9);
  p["rac.kp.conv1.b"] = TensorT<T>({cfg.ck});
  p["rac.kp.conv2.w"] = init_params<T>(rng, {cfg.ck, cfg.ck, 3, 3}, cfg.ck * 9);
  p["rac.kp.conv2.b"] = TensorT<T>({cfg.ck});
  p["rac.tex.conv1.w"] = init_params<T>(rng, {cfg.cv, 3, 3, 3}, 3 * 9);
  p["rac.tex.conv1.b"] = TensorT<T>({cfg.cv});
  p["rac.tex.conv2.w"] = init_params<T>(rng, {cfg.cv, cfg.cv, 3, 3}, cfg.cv * 9);
  p["rac.tex.conv2.b"] = TensorT<T>({cfg.cv});
  p["rac.pq"] = init_params<T>(rng, {hw, cfg.ck}, hw);
  p["rac.pv"] = init_params<T>(rng, {hw, cfg.cv}, hw);
  p["rac.pref"] = init_params<T>(rng, {cfg.max_refs, cfg.cv}, cfg.max_refs);
  p["rac.out.w"] = init_params<T>(rng, {cfg.cv, cfg.cv, 3, 3}, cfg.cv * 9);
  p["rac.out.b"] = TensorT<T>({cfg.cv});
}

namespace detail {
template <typename T>
ValueT<T>* conv_pair(TapeT<T>& tape, BoundParams<T>& bp, ValueT<T>* x, const std::string& stem) {
  ops::OpAttrs s2;
  s2.stride = 2;
  s2.pad = 1;
  ops::OpAttrs lk;
  lk.alpha = 0.2;
  ValueT<T>* h = tape.apply("conv2d", {x, bp[stem + ".conv1.w"], bp[stem + ".conv1.b"]}, s2);
  h = tape.apply("leaky_relu", {h}, lk);
  h = tape.apply("conv2d", {h, bp[stem + ".conv2.w"], bp[stem + ".conv2.b"]}, s2);
  return tape.apply("leaky_relu", {h}, lk);
}
}  // namespace detail

// Heatmap volume K x D x S x S enters with depth folded into channels.
template <typename T>
ValueT<T>* encode_keypoint_heatmap(TapeT<T>& tape, BoundParams<T>& bp, const Config& cfg,
                                   ValueT<T>* heat) {
  check_arg(heat->val.rank() == 4 && heat->val.dim(0) == cfg.keypoints &&
                heat->val.dim(1) == cfg.feature_depth && heat->val.dim(2) == cfg.heatmap_size() &&
                heat->val.dim(3) == cfg.heatmap_size(),
            "encode_keypoint_heatmap: expected K x D x S x S heatmap volume");
  ValueT<T>* flat = tape.reshape(heat, Shape({cfg.keypoints * cfg.feature_depth,
                                              cfg.heatmap_size(), cfg.heatmap_size()}));
  return detail::conv_pair(tape, bp, flat, "rac.kp");
}

template <typename T>
ValueT<T>* encode_texture(TapeT<T>& tape, BoundParams<T>& bp, const Config& cfg,
                          ValueT<T>* image) {
  check_arg(image->val.rank() == 3 && image->val.dim(0) == 3 &&
                image->val.dim(1) == cfg.image_size && image->val.dim(2) == cfg.image_size,
            "encode_texture: expected 3 x S x S image");
  return detail::conv_pair(tape, bp, image, "rac.tex");
}

// Q = flat(Hd) + Pq; K = concat_i flat(Hr_i); V = concat_i (flat(Ir_i) + Pv + Pref[i]);
// A = softmax(QK^T / sqrt(ck)); rows A.V reshaped back to a latent map, then a
// stride-1 conv.
template <typename T>
ValueT<T>* cross_attention_sample(TapeT<T>& tape, BoundParams<T>& bp, const Config& cfg,
                                  ValueT<T>* hd_latent,
                                  const std::vector<std::pair<ValueT<T>*, ValueT<T>*>>& refs) {
  check_arg(!refs.empty(), "cross_attention_sample: reference list is empty");
  check_arg(static_cast<int>(refs.size()) <= cfg.max_refs,
            "cross_attention_sample: more references than max_refs");
  const int h = cfg.latent_hw(), w = cfg.latent_hw();

  ValueT<T>* q = tape.apply("add", {tape.apply("tokens_from_chw", {hd_latent}), bp["rac.pq"]});
  std::vector<ValueT<T>*> keys, values;
  for (size_t i = 0; i < refs.size(); ++i) {
    keys.push_back(tape.apply("tokens_from_chw", {refs[i].first}));
    ValueT<T>* v = tape.apply("add", {tape.apply("tokens_from_chw", {refs[i].second}), bp["rac.pv"]});
    ops::OpAttrs idx;
    idx.axis = static_cast<int>(i);
    v = tape.apply("add_rows", {v, tape.apply("slice0", {bp["rac.pref"]}, idx)});
    values.push_back(v);
  }
  ValueT<T>* kk = keys.size() == 1 ? keys[0] : tape.apply("concat", keys);
  ValueT<T>* vv = values.size() == 1 ? values[0] : tape.apply("concat", values);

  ValueT<T>* scores = tape.apply("matmul", {q, tape.apply("transpose", {kk})});
  ops::OpAttrs scale;
  scale.alpha = 1.0 / std::sqrt(static_cast<double>(cfg.ck));
  ops::OpAttrs rows;
  rows.axis = 1;
  ValueT<T>* att = tape.apply("softmax", {tape.apply("affine", {scores}, scale)}, rows);
  ValueT<T>* mixed = tape.apply("chw_from_tokens", {tape.apply("matmul", {att, vv})},
                                [&] {
                                  ops::OpAttrs a;
                                  a.height = h;
                                  a.width = w;
                                  return a;
                                }());
  ops::OpAttrs p1;
  p1.pad = 1;
  return tape.apply("conv2d", {mixed, bp["rac.out.w"], bp["rac.out.b"]}, p1);
}

}  // namespace synwarp
