#pragma once

#include "synwarp/config.hpp"
#include "synwarp/params.hpp"

namespace synwarp {

// Mean absolute difference over all pixels and channels.
template <typename T>
ValueT<T>* reconstruction_loss(TapeT<T>& tape, ValueT<T>* pred, ValueT<T>* target) {
  return tape.apply("l1", {pred, target});
}

// L1 summed over a binomial Gaussian pyramid, averaged over levels — a
// deterministic stand-in for a pretrained-feature perceptual loss.
template <typename T>
ValueT<T>* perceptual_proxy_loss(TapeT<T>& tape, ValueT<T>* pred, ValueT<T>* target, int levels) {
  check_arg(levels >= 1, "perceptual_proxy_loss: levels must be >= 1");
  check_arg(pred->val.rank() == 3 && pred->val.dim(1) == pred->val.dim(2),
            "perceptual_proxy_loss: images must be square C x S x S");
  const int side = pred->val.dim(1);
  check_arg(side % (1 << (levels - 1)) == 0,
            "perceptual_proxy_loss: side must be divisible by 2^(levels-1)");
  ValueT<T>* acc = tape.apply("l1", {pred, target});
  ValueT<T>* p = pred;
  ValueT<T>* t = target;
  for (int l = 1; l < levels; ++l) {
    p = tape.apply("pyr_down", {p});
    t = tape.apply("pyr_down", {t});
    acc = tape.apply("add", {acc, tape.apply("l1", {p, t})});
  }
  ops::OpAttrs avg;
  avg.alpha = 1.0 / levels;
  return tape.apply("affine", {acc}, avg);
}

// ---- hinge adversarial pieces (optional; off by default) ----

template <typename T>
void init_disc_params(const Config& cfg, Rng& rng, ParamMap<T>& p) {
  (void)cfg;
  p["disc.conv1.w"] = init_params<T>(rng, {16, 3, 3, 3}, 3 * 9);
  p["disc.conv1.b"] = TensorT<T>({16});
  p["disc.conv2.w"] = init_params<T>(rng, {32, 16, 3, 3}, 16 * 9);
  p["disc.conv2.b"] = TensorT<T>({32});
  p["disc.conv3.w"] = init_params<T>(rng, {1, 32, 3, 3}, 32 * 9);
  p["disc.conv3.b"] = TensorT<T>({1});
}

// 3-layer strided patch discriminator; returns a logit map.
template <typename T>
ValueT<T>* disc_logits(TapeT<T>& tape, BoundParams<T>& bp, ValueT<T>* image) {
  ops::OpAttrs s2;
  s2.stride = 2;
  s2.pad = 1;
  ops::OpAttrs p1;
  p1.pad = 1;
  ops::OpAttrs lk;
  lk.alpha = 0.2;
  ValueT<T>* h = tape.apply("conv2d", {image, bp["disc.conv1.w"], bp["disc.conv1.b"]}, s2);
  h = tape.apply("leaky_relu", {h}, lk);
  h = tape.apply("conv2d", {h, bp["disc.conv2.w"], bp["disc.conv2.b"]}, s2);
  h = tape.apply("leaky_relu", {h}, lk);
  return tape.apply("conv2d", {h, bp["disc.conv3.w"], bp["disc.conv3.b"]}, p1);
}

// Generator role: -mean(D(fake)).
template <typename T>
ValueT<T>* generator_adv_loss(TapeT<T>& tape, BoundParams<T>& bp, const Config& cfg,
                              ValueT<T>* fake) {
  if (!cfg.gan) throw UnsupportedOperation("adversarial loss requested but gan is disabled");
  ValueT<T>* d = disc_logits(tape, bp, fake);
  ops::OpAttrs neg;
  neg.alpha = -1.0;
  return tape.apply("affine", {tape.apply("mean", {d})}, neg);
}

// Discriminator role: mean(relu(1 - D(real))) + mean(relu(1 + D(fake))).
template <typename T>
ValueT<T>* discriminator_adv_loss(TapeT<T>& tape, BoundParams<T>& bp, const Config& cfg,
                                  ValueT<T>* real, ValueT<T>* fake) {
  if (!cfg.gan) throw UnsupportedOperation("adversarial loss requested but gan is disabled");
  ops::OpAttrs flip;  // 1 - x
  flip.alpha = -1.0;
  flip.beta = 1.0;
  ops::OpAttrs shift;  // 1 + x
  shift.alpha = 1.0;
  shift.beta = 1.0;
  ValueT<T>* real_term = tape.apply(
      "mean", {tape.apply("relu", {tape.apply("affine", {disc_logits(tape, bp, real)}, flip)})});
  ValueT<T>* fake_term = tape.apply(
      "mean", {tape.apply("relu", {tape.apply("affine", {disc_logits(tape, bp, fake)}, shift)})});
  return tape.apply("add", {real_term, fake_term});
}

template <typename T>
struct TotalLoss {
  ValueT<T>* total = nullptr;
  ValueT<T>* rec = nullptr;   // null when its weight is zero
  ValueT<T>* perc = nullptr;
  ValueT<T>* adv = nullptr;
};

// Weighted sum of the enabled terms; disabled terms are neither built nor
// evaluated and contribute exactly zero.
template <typename T>
TotalLoss<T> total_loss(TapeT<T>& tape, BoundParams<T>& bp, const Config& cfg, ValueT<T>* pred,
                        ValueT<T>* target) {
  TotalLoss<T> out;
  ValueT<T>* acc = nullptr;
  auto accumulate = [&](ValueT<T>* term, double weight) {
    ops::OpAttrs w;
    w.alpha = weight;
    ValueT<T>* scaled = tape.apply("affine", {term}, w);
    acc = acc ? tape.apply("add", {acc, scaled}) : scaled;
  };
  if (cfg.lambda_rec > 0) {
    out.rec = reconstruction_loss(tape, pred, target);
    accumulate(out.rec, cfg.lambda_rec);
  }
  if (cfg.lambda_p > 0) {
    out.perc = perceptual_proxy_loss(tape, pred, target, cfg.pyramid_levels);
    accumulate(out.perc, cfg.lambda_p);
  }
  if (cfg.lambda_g > 0 && cfg.gan) {
    out.adv = generator_adv_loss(tape, bp, cfg, pred);
    accumulate(out.adv, cfg.lambda_g);
  }
  check_arg(acc != nullptr, "total_loss: no loss term enabled");
  out.total = acc;
  return out;
}

}  // namespace synwarp
