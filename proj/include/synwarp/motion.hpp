#pragma once

#include <cmath>

#include "synwarp/config.hpp"
#include "synwarp/params.hpp"

// Appearance and motion encoding: the keypoint transformation, the appearance
// volume encoder, and the motion encoder with its oracle bypass.

namespace synwarp {

template <typename T>
struct MotionParamsT {
  double yaw = 0.0, pitch = 0.0, roll = 0.0;
  TensorT<T> t{Shape({3})};   // translation, zero-initialized
  TensorT<T> delta;           // K x 3 expression offsets (empty => zero)
  double s = 1.0;

  TensorT<T> rotation() const {
    TensorT<T> a({3});
    a[0] = static_cast<T>(yaw);
    a[1] = static_cast<T>(pitch);
    a[2] = static_cast<T>(roll);
    return ops::euler_rot(a);
  }

  template <typename U>
  MotionParamsT<U> cast() const {
    MotionParamsT<U> out;
    out.yaw = yaw;
    out.pitch = pitch;
    out.roll = roll;
    out.s = s;
    out.t = TensorT<U>({3});
    for (int i = 0; i < 3; ++i) out.t[i] = static_cast<U>(t[i]);
    if (delta.numel() > 0) {
      out.delta = TensorT<U>(delta.shape());
      for (long i = 0; i < delta.numel(); ++i) out.delta[i] = static_cast<U>(delta[i]);
    }
    return out;
  }
};
using MotionParams = MotionParamsT<float>;

// x = s * (x_c . R + delta) + t, rows as vectors.
template <typename T>
TensorT<T> transform_keypoints(const TensorT<T>& xc, const MotionParamsT<T>& p) {
  check_arg(xc.rank() == 2 && xc.dim(1) == 3, "transform_keypoints: keypoints must be K x 3");
  check_arg(p.s > 0.0, "transform_keypoints: scale must be positive");
  const int K = xc.dim(0);
  check_arg(p.delta.numel() == 0 || (p.delta.rank() == 2 && p.delta.dim(0) == K && p.delta.dim(1) == 3),
            "transform_keypoints: delta must be K x 3");
  const TensorT<T> r = p.rotation();
  TensorT<T> out({K, 3});
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int i = 0; i < 3; ++i)
        acc += static_cast<double>(xc[k * 3 + i]) * static_cast<double>(r[i * 3 + j]);
      if (p.delta.numel() > 0) acc += static_cast<double>(p.delta[k * 3 + j]);
      out[k * 3 + j] = static_cast<T>(p.s * acc + static_cast<double>(p.t[j]));
    }
  return out;
}

template <typename T>
void zero_z(TensorT<T>& kp) {
  for (int k = 0; k < kp.dim(0); ++k) kp[k * 3 + 2] = T(0);
}

// ---- taped motion values ----

template <typename T>
struct MotionNodes {
  ValueT<T>* angles = nullptr;  // {3}: yaw, pitch, roll
  ValueT<T>* t = nullptr;       // {3}
  ValueT<T>* delta = nullptr;   // K x 3
  ValueT<T>* s = nullptr;       // {1}
};

template <typename T>
MotionNodes<T> motion_constants(TapeT<T>& tape, const MotionParamsT<T>& p, int K) {
  MotionNodes<T> m;
  TensorT<T> a({3});
  a[0] = static_cast<T>(p.yaw);
  a[1] = static_cast<T>(p.pitch);
  a[2] = static_cast<T>(p.roll);
  m.angles = tape.constant(a);
  m.t = tape.constant(p.t);
  m.delta = tape.constant(p.delta.numel() > 0 ? p.delta : TensorT<T>({K, 3}));
  m.s = tape.constant(TensorT<T>::full({1}, static_cast<T>(p.s)));
  return m;
}

template <typename T>
ValueT<T>* transform_keypoints_node(TapeT<T>& tape, ValueT<T>* xc, const MotionNodes<T>& m) {
  ValueT<T>* rot = tape.apply("euler_rot", {m.angles});
  ValueT<T>* x = tape.apply("matmul", {xc, rot});
  x = tape.apply("add", {x, m.delta});
  x = tape.apply("scalar_mul", {m.s, x});
  return tape.apply("add_rows", {x, m.t});
}

// Project out the depth coordinate (2D ablation mode).
template <typename T>
ValueT<T>* zero_z_node(TapeT<T>& tape, ValueT<T>* kp) {
  TensorT<T> mask(kp->val.shape());
  for (int k = 0; k < kp->val.dim(0); ++k) {
    mask[k * 3 + 0] = T(1);
    mask[k * 3 + 1] = T(1);
    mask[k * 3 + 2] = T(0);
  }
  return tape.apply("mul", {kp, tape.constant(mask)});
}

// ---- appearance encoder: two stride-2 convs, reshaped to C x D x Hf x Wf ----

template <typename T>
void init_appearance_params(const Config& cfg, Rng& rng, ParamMap<T>& p) {
  const int h = cfg.app_hidden, cd = cfg.feature_channels * cfg.feature_depth;
  p["enc.app.conv1.w"] = init_params<T>(rng, {h, 3, 3, 3}, 3 * 9);
  p["enc.app.conv1.b"] = TensorT<T>({h});
  p["enc.app.conv2.w"] = init_params<T>(rng, {cd, h, 3, 3}, h * 9);
  p["enc.app.conv2.b"] = TensorT<T>({cd});
}

template <typename T>
ValueT<T>* encode_appearance(TapeT<T>& tape, BoundParams<T>& bp, const Config& cfg,
                             ValueT<T>* image) {
  check_arg(image->val.rank() == 3 && image->val.dim(0) == 3 &&
                image->val.dim(1) == cfg.image_size && image->val.dim(2) == cfg.image_size,
            "encode_appearance: image must be 3 x S x S with S = configured size");
  ops::OpAttrs s2;
  s2.stride = 2;
  s2.pad = 1;
  ops::OpAttrs lk;
  lk.alpha = 0.2;
  ValueT<T>* h = tape.apply("conv2d", {image, bp["enc.app.conv1.w"], bp["enc.app.conv1.b"]}, s2);
  h = tape.apply("leaky_relu", {h}, lk);
  h = tape.apply("conv2d", {h, bp["enc.app.conv2.w"], bp["enc.app.conv2.b"]}, s2);
  h = tape.apply("leaky_relu", {h}, lk);
  return tape.reshape(
      h, Shape({cfg.feature_channels, cfg.feature_depth, cfg.feature_hw(), cfg.feature_hw()}));
}

// ---- motion encoder: conv trunk + pooled heads, or the oracle bypass ----

template <typename T>
void init_motion_params(const Config& cfg, Rng& rng, ParamMap<T>& p) {
  const int h = cfg.mot_hidden, K = cfg.keypoints;
  p["enc.mot.conv1.w"] = init_params<T>(rng, {h, 3, 3, 3}, 3 * 9);
  p["enc.mot.conv1.b"] = TensorT<T>({h});
  p["enc.mot.conv2.w"] = init_params<T>(rng, {h, h, 3, 3}, h * 9);
  p["enc.mot.conv2.b"] = TensorT<T>({h});
  p["enc.mot.head.xc.w"] = init_params<T>(rng, {h, K * 3}, h);
  p["enc.mot.head.xc.b"] = TensorT<T>({K * 3});
  // Motion heads start at zero: pre-activation 0 decodes to the identity
  // motion (zero angles/t/delta, s = 1), keeping early training stable.
  p["enc.mot.head.ang.w"] = TensorT<T>({h, 3});
  p["enc.mot.head.ang.b"] = TensorT<T>({3});
  p["enc.mot.head.t.w"] = TensorT<T>({h, 3});
  p["enc.mot.head.t.b"] = TensorT<T>({3});
  p["enc.mot.head.delta.w"] = TensorT<T>({h, K * 3});
  p["enc.mot.head.delta.b"] = TensorT<T>({K * 3});
  p["enc.mot.head.s.w"] = TensorT<T>({h, 1});
  p["enc.mot.head.s.b"] = TensorT<T>({1});
}

template <typename T>
struct EncodedMotion {
  ValueT<T>* canonical = nullptr;  // K x 3
  MotionNodes<T> motion;
};

template <typename T>
EncodedMotion<T> encode_motion(TapeT<T>& tape, BoundParams<T>& bp, const Config& cfg,
                               ValueT<T>* image) {
  const int K = cfg.keypoints;
  ops::OpAttrs s2;
  s2.stride = 2;
  s2.pad = 1;
  ops::OpAttrs lk;
  lk.alpha = 0.2;
  ValueT<T>* h = tape.apply("conv2d", {image, bp["enc.mot.conv1.w"], bp["enc.mot.conv1.b"]}, s2);
  h = tape.apply("leaky_relu", {h}, lk);
  h = tape.apply("conv2d", {h, bp["enc.mot.conv2.w"], bp["enc.mot.conv2.b"]}, s2);
  h = tape.apply("leaky_relu", {h}, lk);
  ValueT<T>* pooled = tape.reshape(tape.apply("spatial_mean", {h}), Shape({1, cfg.mot_hidden}));

  auto head = [&](const std::string& name) {
    ValueT<T>* o = tape.apply("matmul", {pooled, bp["enc.mot.head." + name + ".w"]});
    return tape.apply("add_rows", {o, bp["enc.mot.head." + name + ".b"]});
  };
  ops::OpAttrs half_pi;
  half_pi.alpha = 3.14159265358979323846 / 2.0;
  ops::OpAttrs exp_bound;
  exp_bound.alpha = 0.5;
  ops::OpAttrs delta_bound;
  delta_bound.alpha = 0.3;

  EncodedMotion<T> em;
  em.canonical = tape.reshape(tape.apply("tanh", {head("xc")}), Shape({K, 3}));
  em.motion.angles =
      tape.reshape(tape.apply("affine", {tape.apply("tanh", {head("ang")})}, half_pi), Shape({3}));
  em.motion.t = tape.reshape(head("t"), Shape({3}));
  em.motion.delta = tape.reshape(
      tape.apply("affine", {tape.apply("tanh", {head("delta")})}, delta_bound), Shape({K, 3}));
  em.motion.s = tape.reshape(
      tape.apply("exp", {tape.apply("affine", {tape.apply("tanh", {head("s")})}, exp_bound)}),
      Shape({1}));
  return em;
}

// Non-taped convenience: run the learned motion encoder on one image and
// return plain values (used by the cross-reenactment keypoint proxy).
template <typename T>
std::pair<TensorT<T>, MotionParamsT<T>> encode_motion_plain(const ParamMap<T>& params,
                                                            const Config& cfg,
                                                            const TensorT<T>& image) {
  TapeT<T> tape;
  BoundParams<T> bp(tape, params, [](const std::string&) { return false; });
  EncodedMotion<T> em = encode_motion(tape, bp, cfg, tape.constant(image));
  MotionParamsT<T> p;
  p.yaw = em.motion.angles->val[0];
  p.pitch = em.motion.angles->val[1];
  p.roll = em.motion.angles->val[2];
  p.t = em.motion.t->val;
  p.delta = em.motion.delta->val;
  p.s = em.motion.s->val[0];
  return {em.canonical->val, p};
}

// x_s and x_d both derive from the SOURCE canonical set; the driving frame's
// own canonical prediction is never consulted.
template <typename T>
std::pair<ValueT<T>*, ValueT<T>*> driving_keypoints(TapeT<T>& tape, ValueT<T>* source_canonical,
                                                    const MotionNodes<T>& ps,
                                                    const MotionNodes<T>& pd, bool flatten_2d) {
  ValueT<T>* xs = transform_keypoints_node(tape, source_canonical, ps);
  ValueT<T>* xd = transform_keypoints_node(tape, source_canonical, pd);
  if (flatten_2d) {
    xs = zero_z_node(tape, xs);
    xd = zero_z_node(tape, xd);
  }
  return {xs, xd};
}

}  // namespace synwarp
