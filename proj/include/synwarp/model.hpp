#pragma once

#include <utility>
#include <vector>

#include "synwarp/bundle.hpp"
#include "synwarp/cgf.hpp"
#include "synwarp/config.hpp"
#include "synwarp/dofw.hpp"
#include "synwarp/losses.hpp"
#include "synwarp/motion.hpp"
#include "synwarp/optim.hpp"
#include "synwarp/rac.hpp"

// Whole-pipeline assembly: parameter initialization, the taped forward pass
// from (source, driving, references) to the predicted image, and
// self-describing checkpoint serialization.

namespace synwarp {

template <typename T>
ParamMap<T> init_model_params(const Config& cfg) {
  ParamMap<T> p;
  Rng root(cfg.seed);
  Rng r_app = root.fork(1), r_mot = root.fork(2), r_dofw = root.fork(3), r_rac = root.fork(4),
      r_cgf = root.fork(5), r_dec = root.fork(6), r_disc = root.fork(7);
  init_appearance_params(cfg, r_app, p);
  init_motion_params(cfg, r_mot, p);
  init_dofw_params(cfg, r_dofw, p);
  init_rac_params(cfg, r_rac, p);
  init_cgf_params(cfg, r_cgf, p);
  init_decoder_params(cfg, r_dec, p);
  if (cfg.gan) init_disc_params(cfg, r_disc, p);
  return p;
}

// One training/inference example. Ground-truth motion is carried alongside the
// pixels; the oracle motion mode consumes it, the learned mode ignores it.
template <typename T>
struct SampleT {
  TensorT<T> source, driving;        // 3 x S x S in [0,1]
  std::vector<TensorT<T>> ref_images;
  TensorT<T> xc;                     // K x 3 canonical keypoints
  MotionParamsT<T> ps, pd;
  std::vector<MotionParamsT<T>> pr;  // per-reference motion
};
using Sample = SampleT<float>;

template <typename T>
struct PipelineOut {
  ValueT<T>* image = nullptr;       // predicted 3 x S x S
  ValueT<T>* iw = nullptr;          // attention stream latent
  ValueT<T>* ew_aligned = nullptr;  // aligned explicit stream (null in RAC-only mode)
  ValueT<T>* mask = nullptr;        // confidence mask (null in RAC-only mode)
  ValueT<T>* flow = nullptr;        // combined flow field
  ValueT<T>* flow_masks = nullptr;  // candidate masks
  ValueT<T>* xs = nullptr;          // source keypoints
  ValueT<T>* xd = nullptr;          // driving keypoints
};

// rac_only: the warm-up path — the explicit stream is skipped entirely and
// the decoder sees the attention stream alone (equivalent to forcing M = 0
// under the cgf fusion rule).
template <typename T>
PipelineOut<T> forward_pipeline(TapeT<T>& tape, BoundParams<T>& bp, const Config& cfg,
                                const SampleT<T>& sample, bool rac_only) {
  const int K = cfg.keypoints;
  const bool flat2d = cfg.keypoint_dim == 2;
  check_arg(!sample.ref_images.empty(), "forward_pipeline: at least one reference required");
  ValueT<T>* src = tape.constant(sample.source);
  std::vector<ValueT<T>*> ref_nodes;
  for (const auto& r : sample.ref_images) ref_nodes.push_back(tape.constant(r));

  ValueT<T>* xc = nullptr;
  MotionNodes<T> ps, pd;
  std::vector<MotionNodes<T>> pr;
  if (cfg.motion_mode == "oracle") {
    check_arg(sample.xc.rank() == 2 && sample.xc.dim(0) == K,
              "forward_pipeline: oracle canonical keypoints must be K x 3");
    check_arg(sample.pr.size() == sample.ref_images.size(),
              "forward_pipeline: oracle reference motion count mismatch");
    xc = tape.constant(sample.xc);
    ps = motion_constants(tape, sample.ps, K);
    pd = motion_constants(tape, sample.pd, K);
    for (const auto& p : sample.pr) pr.push_back(motion_constants(tape, p, K));
  } else {
    EncodedMotion<T> em_s = encode_motion(tape, bp, cfg, src);
    xc = em_s.canonical;
    ps = em_s.motion;
    // The driving frame's canonical prediction is discarded by contract.
    pd = encode_motion(tape, bp, cfg, tape.constant(sample.driving)).motion;
    for (ValueT<T>* rn : ref_nodes) pr.push_back(encode_motion(tape, bp, cfg, rn).motion);
  }

  PipelineOut<T> out;
  auto [xs, xd] = driving_keypoints(tape, xc, ps, pd, flat2d);
  out.xs = xs;
  out.xd = xd;

  ops::OpAttrs hm;
  hm.depth = cfg.feature_depth;
  hm.height = cfg.heatmap_size();
  hm.width = cfg.heatmap_size();
  hm.sigma2 = cfg.sigma2;
  ValueT<T>* hd_lat = encode_keypoint_heatmap(tape, bp, cfg, tape.apply("gaussian_heatmap", {xd}, hm));
  std::vector<std::pair<ValueT<T>*, ValueT<T>*>> ref_latents;
  for (size_t i = 0; i < ref_nodes.size(); ++i) {
    ValueT<T>* xr = transform_keypoints_node(tape, xc, pr[i]);
    if (flat2d) xr = zero_z_node(tape, xr);
    ValueT<T>* hr_lat = encode_keypoint_heatmap(tape, bp, cfg, tape.apply("gaussian_heatmap", {xr}, hm));
    ref_latents.emplace_back(hr_lat, encode_texture(tape, bp, cfg, ref_nodes[i]));
  }
  out.iw = cross_attention_sample(tape, bp, cfg, hd_lat, ref_latents);

  if (rac_only) {
    out.image = decode(tape, bp, cfg, out.iw);
    return out;
  }

  ValueT<T>* fs = encode_appearance(tape, bp, cfg, src);
  FlowEstimate<T> fe = estimate_flow(tape, bp, cfg, fs, xs, xd);
  out.flow = fe.flow;
  out.flow_masks = fe.masks;
  out.ew_aligned = align_explicit(tape, bp, cfg, fe.warped);
  out.mask = predict_mask(tape, bp, out.ew_aligned, out.iw);
  ValueT<T>* fw = fuse(tape, bp, out.ew_aligned, out.iw, out.mask, cfg.fusion);
  out.image = decode(tape, bp, cfg, fw);
  return out;
}

// Inference convenience: run the pipeline with every parameter frozen.
template <typename T>
PipelineOut<T> run_inference(TapeT<T>& tape, const ParamMap<T>& params, const Config& cfg,
                             const SampleT<T>& sample) {
  BoundParams<T> bp(tape, params, [](const std::string&) { return false; });
  return forward_pipeline(tape, bp, cfg, sample, false);
}

// ---- checkpoints: parameters + optimizer state + config, one bundle ----

struct Checkpoint {
  Config cfg;
  ParamMap<float> params;
  AdamState opt;
};

inline void save_checkpoint(const std::filesystem::path& path, const Config& cfg,
                            const ParamMap<float>& params, const AdamState& opt) {
  Bundle b;
  for (const auto& [name, t] : params) b.f32[name] = t;
  for (const auto& [name, t] : opt.m) b.f32["opt.m." + name] = t;
  for (const auto& [name, t] : opt.v) b.f32["opt.v." + name] = t;
  b.put_scalar("meta.step", static_cast<double>(opt.step));
  const std::uint64_t h = cfg.hash();
  TensorD hash_t({2});
  hash_t[0] = static_cast<double>(h & 0xffffffffull);
  hash_t[1] = static_cast<double>(h >> 32);
  b.f64["meta.config_hash"] = hash_t;
  const std::string cfg_json = cfg.to_json().dump();
  TensorD cfg_t({static_cast<int>(cfg_json.size())});
  for (size_t i = 0; i < cfg_json.size(); ++i) cfg_t[static_cast<long>(i)] = static_cast<unsigned char>(cfg_json[i]);
  b.f64["meta.config_json"] = cfg_t;
  b.save(path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Bundle b = Bundle::load(path);
  const TensorD& cfg_t = b.get_f64("meta.config_json");
  std::string cfg_json(static_cast<size_t>(cfg_t.numel()), '\0');
  for (long i = 0; i < cfg_t.numel(); ++i) cfg_json[static_cast<size_t>(i)] = static_cast<char>(cfg_t[i]);
  Checkpoint ck;
  try {
    ck.cfg = Config::from_json(nlohmann::json::parse(cfg_json));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint config unreadable: " + std::string(e.what()));
  }
  const TensorD& hash_t = b.get_f64("meta.config_hash");
  const std::uint64_t stored = static_cast<std::uint64_t>(hash_t[0]) |
                               (static_cast<std::uint64_t>(hash_t[1]) << 32);
  if (stored != ck.cfg.hash()) throw IoError("checkpoint config hash mismatch: " + path.string());
  ck.opt.step = static_cast<long>(b.scalar("meta.step"));
  for (auto& [name, t] : b.f32) {
    if (name.rfind("opt.m.", 0) == 0)
      ck.opt.m[name.substr(6)] = std::move(t);
    else if (name.rfind("opt.v.", 0) == 0)
      ck.opt.v[name.substr(6)] = std::move(t);
    else
      ck.params[name] = std::move(t);
  }
  return ck;
}

}  // namespace synwarp
