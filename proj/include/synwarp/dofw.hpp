#pragma once

#include "synwarp/config.hpp"
#include "synwarp/motion.hpp"

// Dense optical flow warping: per-keypoint translation candidates, a small 3D
// conv net turning flow evidence into softmax masks, the convex flow
// combination, and the trilinear warp of the appearance volume.

namespace synwarp {

template <typename T>
void init_dofw_params(const Config& cfg, Rng& rng, ParamMap<T>& p) {
  const int K = cfg.keypoints, h = cfg.dense_hidden;
  const int in_ch = (K + 1) * cfg.feature_channels + K;
  p["dofw.conv1.w"] = init_params<T>(rng, {h, in_ch, 3, 3, 3}, in_ch * 27);
  p["dofw.conv1.b"] = TensorT<T>({h});
  p["dofw.conv2.w"] = init_params<T>(rng, {h, h, 3, 3, 3}, h * 27);
  p["dofw.conv2.b"] = TensorT<T>({h});
  p["dofw.conv3.w"] = init_params<T>(rng, {K + 1, h, 3, 3, 3}, h * 27);
  p["dofw.conv3.b"] = TensorT<T>({K + 1});
}

template <typename T>
struct FlowEstimate {
  ValueT<T>* flow = nullptr;    // D x Hf x Wf x 3 absolute sampling coords
  ValueT<T>* masks = nullptr;   // (K+1) x D x Hf x Wf, per-voxel simplex
  ValueT<T>* warped = nullptr;  // E_w = f_s sampled along flow
};

// Evidence = [f_s warped by each candidate] ++ heatmap(x_d) - heatmap(x_s),
// all on the feature grid; the dense-motion net scores the K+1 candidates.
template <typename T>
FlowEstimate<T> estimate_flow(TapeT<T>& tape, BoundParams<T>& bp, const Config& cfg,
                              ValueT<T>* fs, ValueT<T>* xs, ValueT<T>* xd) {
  const int K = cfg.keypoints;
  check_arg(xs->val.dim(0) == K && xd->val.dim(0) == K, "estimate_flow: keypoint count mismatch");
  ops::OpAttrs grid;
  grid.depth = cfg.feature_depth;
  grid.height = cfg.feature_hw();
  grid.width = cfg.feature_hw();
  ValueT<T>* cands = tape.apply("candidate_flows", {xs, xd}, grid);

  std::vector<ValueT<T>*> evidence;
  for (int k = 0; k <= K; ++k) {
    ops::OpAttrs idx;
    idx.axis = k;
    ValueT<T>* wk = tape.apply("slice0", {cands}, idx);
    evidence.push_back(tape.apply("trilinear_sample", {fs, wk}));
  }
  ops::OpAttrs hm = grid;
  hm.sigma2 = cfg.sigma2;
  ValueT<T>* hs = tape.apply("gaussian_heatmap", {xs}, hm);
  ValueT<T>* hd = tape.apply("gaussian_heatmap", {xd}, hm);
  evidence.push_back(tape.apply("sub", {hd, hs}));

  ops::OpAttrs p1;
  p1.pad = 1;
  ops::OpAttrs lk;
  lk.alpha = 0.2;
  ValueT<T>* h = tape.apply("concat", evidence);
  h = tape.apply("conv3d", {h, bp["dofw.conv1.w"], bp["dofw.conv1.b"]}, p1);
  h = tape.apply("leaky_relu", {h}, lk);
  h = tape.apply("conv3d", {h, bp["dofw.conv2.w"], bp["dofw.conv2.b"]}, p1);
  h = tape.apply("leaky_relu", {h}, lk);
  ValueT<T>* logits = tape.apply("conv3d", {h, bp["dofw.conv3.w"], bp["dofw.conv3.b"]}, p1);

  FlowEstimate<T> out;
  out.masks = tape.apply("softmax", {logits}, ops::OpAttrs{});  // axis 0: candidates
  out.flow = tape.apply("flow_combine", {out.masks, cands});
  out.warped = tape.apply("trilinear_sample", {fs, out.flow});
  return out;
}

// E_w = trilinear_sample(f_s, w) on matching grids.
template <typename T>
ValueT<T>* apply_warp(TapeT<T>& tape, ValueT<T>* flow, ValueT<T>* fs) {
  check_arg(flow->val.rank() == 4 && flow->val.dim(3) == 3, "apply_warp: flow must be D x H x W x 3");
  check_arg(flow->val.dim(0) == fs->val.dim(1) && flow->val.dim(1) == fs->val.dim(2) &&
                flow->val.dim(2) == fs->val.dim(3),
            "apply_warp: flow grid must match the feature grid");
  return tape.apply("trilinear_sample", {fs, flow});
}

}  // namespace synwarp
