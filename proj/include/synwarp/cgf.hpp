#pragma once

#include "synwarp/config.hpp"
#include "synwarp/params.hpp"

// Confidence-guided fusion and the decoder: channel alignment of the explicit
// stream, mask prediction, the four fusion variants, and the upsampling
// decoder back to image space.

namespace synwarp {

template <typename T>
void init_cgf_params(const Config& cfg, Rng& rng, ParamMap<T>& p) {
  const int cd = cfg.feature_channels * cfg.feature_depth;
  p["cgf.align.w"] = init_params<T>(rng, {cfg.cf, cd, 1, 1}, cd);
  p["cgf.align.b"] = TensorT<T>({cfg.cf});
  p["cgf.mask.conv1.w"] = init_params<T>(rng, {cfg.mask_hidden, 2 * cfg.cf, 3, 3}, 2 * cfg.cf * 9);
  p["cgf.mask.conv1.b"] = TensorT<T>({cfg.mask_hidden});
  p["cgf.mask.conv2.w"] = init_params<T>(rng, {1, cfg.mask_hidden, 3, 3}, cfg.mask_hidden * 9);
  p["cgf.mask.conv2.b"] = TensorT<T>({1});
  p["cgf.cat.w"] = init_params<T>(rng, {cfg.cf, 2 * cfg.cf, 1, 1}, 2 * cfg.cf);
  p["cgf.cat.b"] = TensorT<T>({cfg.cf});
}

template <typename T>
void init_decoder_params(const Config& cfg, Rng& rng, ParamMap<T>& p) {
  p["dec.conv1.w"] = init_params<T>(rng, {cfg.dec_c1, cfg.cf, 3, 3}, cfg.cf * 9);
  p["dec.conv1.b"] = TensorT<T>({cfg.dec_c1});
  p["dec.conv2.w"] = init_params<T>(rng, {cfg.dec_c2, cfg.dec_c1, 3, 3}, cfg.dec_c1 * 9);
  p["dec.conv2.b"] = TensorT<T>({cfg.dec_c2});
  p["dec.out.w"] = init_params<T>(rng, {3, cfg.dec_c2, 3, 3}, cfg.dec_c2 * 9);
  p["dec.out.b"] = TensorT<T>({3});
}

// C x D x Hf x Wf -> (C*D) x Hf x Wf -> 1x1 conv to cf channels.
template <typename T>
ValueT<T>* align_explicit(TapeT<T>& tape, BoundParams<T>& bp, const Config& cfg, ValueT<T>* ew) {
  check_arg(ew->val.rank() == 4 && ew->val.dim(0) == cfg.feature_channels &&
                ew->val.dim(1) == cfg.feature_depth && ew->val.dim(2) == cfg.feature_hw() &&
                ew->val.dim(3) == cfg.feature_hw(),
            "align_explicit: expected the configured C x D x Hf x Wf volume");
  ValueT<T>* flat = tape.reshape(ew, Shape({cfg.feature_channels * cfg.feature_depth,
                                            cfg.feature_hw(), cfg.feature_hw()}));
  return tape.apply("conv2d", {flat, bp["cgf.align.w"], bp["cgf.align.b"]});
}

template <typename T>
ValueT<T>* predict_mask(TapeT<T>& tape, BoundParams<T>& bp, ValueT<T>* e, ValueT<T>* iw) {
  check_arg(e->val.shape() == iw->val.shape(), "predict_mask: stream shapes must match");
  ops::OpAttrs p1;
  p1.pad = 1;
  ops::OpAttrs lk;
  lk.alpha = 0.2;
  ValueT<T>* h = tape.apply("concat", {e, iw});
  h = tape.apply("conv2d", {h, bp["cgf.mask.conv1.w"], bp["cgf.mask.conv1.b"]}, p1);
  h = tape.apply("leaky_relu", {h}, lk);
  h = tape.apply("conv2d", {h, bp["cgf.mask.conv2.w"], bp["cgf.mask.conv2.b"]}, p1);
  return tape.apply("sigmoid", {h});
}

// cgf: M*E + (1-M)*Iw; sum: E + Iw; sum-mask: M*E + Iw;
// concat: 1x1 conv over [E; Iw]. The mask is unused by sum/concat.
template <typename T>
ValueT<T>* fuse(TapeT<T>& tape, BoundParams<T>& bp, ValueT<T>* e, ValueT<T>* iw, ValueT<T>* mask,
                const std::string& variant) {
  check_arg(e->val.shape() == iw->val.shape(), "fuse: stream shapes must match");
  if (variant == "sum") return tape.apply("add", {e, iw});
  if (variant == "concat") {
    ValueT<T>* both = tape.apply("concat", {e, iw});
    return tape.apply("conv2d", {both, bp["cgf.cat.w"], bp["cgf.cat.b"]});
  }
  check_arg(mask != nullptr, "fuse: variant '" + variant + "' needs a confidence mask");
  ValueT<T>* masked_e = tape.apply("bcast_mul", {mask, e});
  if (variant == "sum-mask") return tape.apply("add", {masked_e, iw});
  if (variant == "cgf") {
    ops::OpAttrs flip;  // 1 - M
    flip.alpha = -1.0;
    flip.beta = 1.0;
    ValueT<T>* inv = tape.apply("affine", {mask}, flip);
    return tape.apply("add", {masked_e, tape.apply("bcast_mul", {inv, iw})});
  }
  throw std::invalid_argument("fuse: unknown variant: " + variant);
}

// cf x h x w -> two nearest-neighbor x2 stages -> sigmoid 3 x S x S.
template <typename T>
ValueT<T>* decode(TapeT<T>& tape, BoundParams<T>& bp, const Config& cfg, ValueT<T>* fw) {
  check_arg(fw->val.rank() == 3 && fw->val.dim(0) == cfg.cf && fw->val.dim(1) == cfg.latent_hw() &&
                fw->val.dim(2) == cfg.latent_hw(),
            "decode: expected cf x h x w fused feature");
  ops::OpAttrs p1;
  p1.pad = 1;
  ops::OpAttrs lk;
  lk.alpha = 0.2;
  ValueT<T>* h = tape.apply("conv2d", {fw, bp["dec.conv1.w"], bp["dec.conv1.b"]}, p1);
  h = tape.apply("leaky_relu", {h}, lk);
  h = tape.apply("upsample2x", {h});
  h = tape.apply("conv2d", {h, bp["dec.conv2.w"], bp["dec.conv2.b"]}, p1);
  h = tape.apply("leaky_relu", {h}, lk);
  h = tape.apply("upsample2x", {h});
  h = tape.apply("conv2d", {h, bp["dec.out.w"], bp["dec.out.b"]}, p1);
  return tape.apply("sigmoid", {h});
}

}  // namespace synwarp
