#pragma once

#include <chrono>
#include <ostream>

#include "synwarp/grad.hpp"
#include "synwarp/losses.hpp"
#include "synwarp/model.hpp"
#include "synwarp/synth.hpp"

// Finite-difference validation of every kernel VJP plus an end-to-end check
// through a miniature pipeline. Inputs are generated away from kinks (relu
// corners, l1 sign flips, interpolation cell boundaries) so central
// differences measure the same one-sided behaviour the analytic rules encode.
//
// Error metric: max over elements of |analytic - fd| / max(|analytic|, |fd|, 1),
// i.e. relative for large gradients, absolute below unit scale.

namespace synwarp {

struct GradCheckResult {
  std::string name;
  double max_err = 0.0;
  double tol = 0.0;
  int seeds = 0;
  bool pass = false;
};

namespace gradcheck_detail {

template <typename T>
TensorT<T> rand_tensor(Rng& rng, Shape shape, double lo, double hi) {
  TensorT<T> t(shape);
  for (long i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Uniform magnitude in [margin, margin + span), random sign: keeps relu-style
// kinks at least `margin` away from every sample.
template <typename T>
TensorT<T> rand_offzero(Rng& rng, Shape shape, double margin, double span) {
  TensorT<T> t(shape);
  for (long i = 0; i < t.numel(); ++i) {
    const double mag = margin + rng.uniform(0.0, span);
    t[i] = static_cast<T>(rng.next_below(2) ? mag : -mag);
  }
  return t;
}

// Normalized coordinates that sit a fixed fraction inside an interpolation
// cell of an n-point axis, away from both cell boundaries.
template <typename T>
T safe_coord(Rng& rng, int n) {
  const double cell = static_cast<double>(rng.next_below(static_cast<uint64_t>(n - 1)));
  const double u = cell + rng.uniform(0.25, 0.75);
  return static_cast<T>(-1.0 + 2.0 * u / (n - 1));
}

template <typename T>
struct OpCase {
  ops::OpAttrs attrs{};
  std::vector<TensorT<T>> inputs;
  std::vector<char> diff;  // nonzero entries are finite-differenced
};

template <typename T>
OpCase<T> make_case(const std::string& op, Rng& rng) {
  OpCase<T> c;
  auto in = [&](TensorT<T> t, bool d = true) {
    c.inputs.push_back(std::move(t));
    c.diff.push_back(d ? 1 : 0);
  };
  if (op == "grid_coords") {
    c.attrs.depth = 2;
    c.attrs.height = 3;
    c.attrs.width = 4;
  } else if (op == "trilinear_sample") {
    const int C = 2, D = 3, H = 4, W = 4;
    in(rand_tensor<T>(rng, {C, D, H, W}, -1.0, 1.0));
    TensorT<T> coords({2, 3, 3, 3});
    for (int v = 0; v < 2 * 3 * 3; ++v) {
      coords[v * 3 + 0] = safe_coord<T>(rng, W);
      coords[v * 3 + 1] = safe_coord<T>(rng, H);
      coords[v * 3 + 2] = safe_coord<T>(rng, D);
    }
    in(std::move(coords));
  } else if (op == "softmax") {
    c.attrs.axis = static_cast<int>(rng.next_below(3));
    in(rand_tensor<T>(rng, {3, 4, 3}, -2.0, 2.0));
  } else if (op == "conv2d") {
    c.attrs.stride = 1 + static_cast<int>(rng.next_below(2));
    c.attrs.pad = static_cast<int>(rng.next_below(2));
    in(rand_tensor<T>(rng, {3, 6, 6}, -0.5, 0.5));
    in(rand_tensor<T>(rng, {4, 3, 3, 3}, -0.5, 0.5));
    in(rand_tensor<T>(rng, {4}, -0.5, 0.5));
  } else if (op == "conv3d") {
    c.attrs.stride = 1 + static_cast<int>(rng.next_below(2));
    c.attrs.pad = static_cast<int>(rng.next_below(2));
    in(rand_tensor<T>(rng, {2, 4, 4, 4}, -0.5, 0.5));
    in(rand_tensor<T>(rng, {3, 2, 3, 3, 3}, -0.5, 0.5));
    in(rand_tensor<T>(rng, {3}, -0.5, 0.5));
  } else if (op == "matmul") {
    in(rand_tensor<T>(rng, {3, 4}, -1.0, 1.0));
    in(rand_tensor<T>(rng, {4, 5}, -1.0, 1.0));
  } else if (op == "add" || op == "sub" || op == "mul") {
    in(rand_tensor<T>(rng, {2, 3, 4}, -1.0, 1.0));
    in(rand_tensor<T>(rng, {2, 3, 4}, -1.0, 1.0));
  } else if (op == "affine") {
    c.attrs.alpha = rng.uniform(0.5, 2.0);
    c.attrs.beta = rng.uniform(-1.0, 1.0);
    in(rand_tensor<T>(rng, {2, 3, 4}, -1.0, 1.0));
  } else if (op == "sigmoid" || op == "tanh" || op == "exp") {
    in(rand_tensor<T>(rng, {2, 3, 4}, -2.0, 2.0));
  } else if (op == "relu") {
    in(rand_offzero<T>(rng, {2, 3, 4}, 0.1, 1.5));
  } else if (op == "leaky_relu") {
    c.attrs.alpha = 0.2;
    in(rand_offzero<T>(rng, {2, 3, 4}, 0.1, 1.5));
  } else if (op == "mean") {
    in(rand_tensor<T>(rng, {2, 3, 4}, -1.0, 1.0));
  } else if (op == "l1") {
    TensorT<T> a = rand_tensor<T>(rng, {2, 3, 4}, -1.0, 1.0);
    TensorT<T> d = rand_offzero<T>(rng, {2, 3, 4}, 0.05, 0.5);
    TensorT<T> b = a;
    for (long i = 0; i < b.numel(); ++i) b[i] = static_cast<T>(b[i] + d[i]);
    in(std::move(a));
    in(std::move(b));
  } else if (op == "spatial_mean") {
    in(rand_tensor<T>(rng, {3, 4, 5}, -1.0, 1.0));
  } else if (op == "upsample2x") {
    in(rand_tensor<T>(rng, {2, 3, 3}, -1.0, 1.0));
  } else if (op == "pyr_down") {
    in(rand_tensor<T>(rng, {2, 6, 6}, -1.0, 1.0));
  } else if (op == "bcast_mul") {
    in(rand_tensor<T>(rng, {1, 4, 4}, -1.0, 1.0));
    in(rand_tensor<T>(rng, {3, 4, 4}, -1.0, 1.0));
  } else if (op == "tokens_from_chw") {
    in(rand_tensor<T>(rng, {3, 4, 5}, -1.0, 1.0));
  } else if (op == "chw_from_tokens") {
    c.attrs.height = 4;
    c.attrs.width = 5;
    in(rand_tensor<T>(rng, {20, 3}, -1.0, 1.0));
  } else if (op == "candidate_flows") {
    c.attrs.depth = 2;
    c.attrs.height = 3;
    c.attrs.width = 3;
    in(rand_tensor<T>(rng, {3, 3}, -0.5, 0.5));
    in(rand_tensor<T>(rng, {3, 3}, -0.5, 0.5));
  } else if (op == "flow_combine") {
    in(rand_tensor<T>(rng, {4, 2, 3, 3}, 0.05, 1.0));
    in(rand_tensor<T>(rng, {4, 2, 3, 3, 3}, -1.0, 1.0));
  } else if (op == "gaussian_heatmap") {
    c.attrs.depth = 2;
    c.attrs.height = 4;
    c.attrs.width = 4;
    c.attrs.sigma2 = 0.05;
    in(rand_tensor<T>(rng, {3, 3}, -0.6, 0.6));
  } else if (op == "concat") {
    in(rand_tensor<T>(rng, {2, 3, 3}, -1.0, 1.0));
    in(rand_tensor<T>(rng, {1, 3, 3}, -1.0, 1.0));
    in(rand_tensor<T>(rng, {2, 3, 3}, -1.0, 1.0));
  } else if (op == "euler_rot") {
    in(rand_tensor<T>(rng, {3}, -1.2, 1.2));
  } else if (op == "scalar_mul") {
    in(rand_tensor<T>(rng, {1}, 0.5, 2.0));
    in(rand_tensor<T>(rng, {2, 3, 4}, -1.0, 1.0));
  } else if (op == "add_rows") {
    in(rand_tensor<T>(rng, {4, 3}, -1.0, 1.0));
    in(rand_tensor<T>(rng, {3}, -1.0, 1.0));
  } else if (op == "transpose") {
    in(rand_tensor<T>(rng, {3, 5}, -1.0, 1.0));
  } else if (op == "slice0") {
    c.attrs.axis = static_cast<int>(rng.next_below(4));
    in(rand_tensor<T>(rng, {4, 2, 3}, -1.0, 1.0));
  } else {
    throw UnsupportedOperation("gradcheck: no case generator for op: " + op);
  }
  return c;
}

template <typename T>
double upstream_loss(const std::string& op, std::span<const TensorT<T>* const> in,
                     const ops::OpAttrs& attrs, const TensorT<T>& u) {
  const TensorT<T> y = ops::op_forward<T>(op, in, attrs);
  double acc = 0.0;
  for (long i = 0; i < y.numel(); ++i) acc += static_cast<double>(u[i]) * y[i];
  return acc;
}

template <typename T>
double check_case(const std::string& op, OpCase<T>& c, double h, Rng& rng) {
  std::vector<const TensorT<T>*> ptrs;
  for (const auto& t : c.inputs) ptrs.push_back(&t);
  const std::span<const TensorT<T>* const> in(ptrs.data(), ptrs.size());
  const TensorT<T> y = ops::op_forward<T>(op, in, c.attrs);
  const TensorT<T> u = rand_tensor<T>(rng, y.shape(), -1.0, 1.0);
  const std::vector<TensorT<T>> ga = ops::op_backward<T>(op, in, c.attrs, u);

  double worst = 0.0;
  for (size_t i = 0; i < c.inputs.size(); ++i) {
    if (!c.diff[i]) continue;
    for (long j = 0; j < c.inputs[i].numel(); ++j) {
      const T orig = c.inputs[i][j];
      c.inputs[i][j] = static_cast<T>(static_cast<double>(orig) + h);
      const double lp = upstream_loss<T>(op, in, c.attrs, u);
      c.inputs[i][j] = static_cast<T>(static_cast<double>(orig) - h);
      const double lm = upstream_loss<T>(op, in, c.attrs, u);
      c.inputs[i][j] = orig;
      const double fd = (lp - lm) / (2.0 * h);
      const double an = static_cast<double>(ga[i][j]);
      const double err =
          std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 1.0});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace gradcheck_detail

inline const std::vector<std::string>& gradcheck_ops() {
  static const std::vector<std::string> ops = {
      "grid_coords", "trilinear_sample", "softmax",     "conv2d",
      "conv3d",      "matmul",           "add",         "sub",
      "mul",         "affine",           "sigmoid",     "tanh",
      "exp",         "relu",             "leaky_relu",  "mean",
      "l1",          "spatial_mean",     "upsample2x",  "pyr_down",
      "bcast_mul",   "tokens_from_chw",  "chw_from_tokens",
      "candidate_flows", "flow_combine", "gaussian_heatmap",
      "concat",      "euler_rot",        "scalar_mul",  "add_rows",
      "transpose",   "slice0"};
  return ops;
}

template <typename T>
GradCheckResult check_op(const std::string& op, int seeds, double h, double tol) {
  GradCheckResult r{op, 0.0, tol, seeds, false};
  for (int s = 0; s < seeds; ++s) {
    Rng rng(0x5eedull + static_cast<uint64_t>(s) * 7919ull);
    auto c = gradcheck_detail::make_case<T>(op, rng);
    r.max_err = std::max(r.max_err, gradcheck_detail::check_case<T>(op, c, h, rng));
  }
  r.pass = r.max_err <= tol;
  return r;
}

// ---- end-to-end check through a miniature pipeline ----

inline Config micro_config() {
  Config cfg;
  cfg.keypoints = 3;
  cfg.image_size = 16;
  cfg.feature_channels = 2;
  cfg.feature_depth = 2;
  cfg.ck = 4;
  cfg.cv = 4;
  cfg.cf = 4;
  cfg.dense_hidden = 6;
  cfg.mask_hidden = 4;
  cfg.app_hidden = 4;
  cfg.mot_hidden = 6;
  cfg.dec_c1 = 6;
  cfg.dec_c2 = 6;
  cfg.refs_count = 1;
  cfg.motion_mode = "learned";
  cfg.pyramid_levels = 2;
  cfg.batch_size = 1;
  cfg.epochs = 2;
  cfg.warmup_epochs = 1;
  cfg.validate();
  return cfg;
}

namespace gradcheck_detail {

inline double pipeline_loss(const Config& cfg, const ParamMap<float>& params, const Sample& s) {
  Tape tape;
  BoundParams<float> bp(tape, params, [](const std::string&) { return false; });
  PipelineOut<float> po = forward_pipeline(tape, bp, cfg, s, false);
  TotalLoss<float> tl = total_loss(tape, bp, cfg, po.image, tape.constant(s.driving));
  return static_cast<double>(tl.total->val[0]);
}

}  // namespace gradcheck_detail

// Per seed: build a random micro scene, take the analytic gradient of the
// full training loss, and finite-difference `probes` randomly chosen scalar
// parameters against it.
inline GradCheckResult check_pipeline(int seeds, double tol, int probes = 10,
                                      double h = 1e-3) {
  const Config cfg0 = micro_config();
  GradCheckResult r{"pipeline", 0.0, tol, seeds, false};
  for (int s = 0; s < seeds; ++s) {
    Config cfg = cfg0;
    cfg.seed = 4242 + s;
    ParamMap<float> params = init_model_params<float>(cfg);
    Rng rng(0xabcdefull + static_cast<uint64_t>(s));
    SceneSpec spec;
    spec.keypoints = cfg.keypoints;
    spec.size = cfg.image_size;
    SequenceRecord rec = gen_sequence(rng, 2, spec);
    const Sample sample = make_sample(rec, 0, 1, 1);

    Tape tape;
    BoundParams<float> bp(tape, params, [](const std::string&) { return true; });
    PipelineOut<float> po = forward_pipeline(tape, bp, cfg, sample, false);
    TotalLoss<float> tl = total_loss(tape, bp, cfg, po.image, tape.constant(sample.driving));
    tape.backward(tl.total);
    const auto grads = bp.gradients();

    std::vector<std::pair<std::string, long>> slots;
    for (const auto& [name, t] : params)
      for (long j = 0; j < t.numel(); ++j) slots.emplace_back(name, j);
    for (int p = 0; p < probes; ++p) {
      const auto& [name, j] = slots[static_cast<size_t>(rng.next_below(slots.size()))];
      const auto git = grads.find(name);
      const double an =
          git == grads.end() ? 0.0 : static_cast<double>((*git->second)[j]);
      ParamMap<float> work = params;
      const float orig = work[name][j];
      work[name][j] = static_cast<float>(static_cast<double>(orig) + h);
      const double lp = gradcheck_detail::pipeline_loss(cfg, work, sample);
      work[name][j] = static_cast<float>(static_cast<double>(orig) - h);
      const double lm = gradcheck_detail::pipeline_loss(cfg, work, sample);
      const double fd = (lp - lm) / (2.0 * h);
      const double err =
          std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 1.0});
      r.max_err = std::max(r.max_err, err);
    }
  }
  r.pass = r.max_err <= tol;
  return r;
}

struct GradCheckSummary {
  std::vector<GradCheckResult> results;
  bool all_pass = true;
  double wall_sec = 0.0;
};

// only_op == "": every kernel (plus the pipeline check in f32 mode).
// f64 mode runs the kernels in double with the tighter step and tolerance.
inline GradCheckSummary run_gradcheck(const std::string& only_op = "", bool f64 = false,
                                      double tol_override = -1.0, int seeds = 20,
                                      std::ostream* log = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  const double h = f64 ? 1e-5 : 1e-3;
  const double tol = tol_override > 0 ? tol_override : (f64 ? 1e-5 : 1e-3);
  GradCheckSummary out;
  auto push = [&](GradCheckResult r) {
    out.all_pass = out.all_pass && r.pass;
    if (log)
      (*log) << (r.pass ? "pass" : "FAIL") << "  " << r.name << "  max_err=" << r.max_err
             << " tol=" << r.tol << "\n";
    out.results.push_back(std::move(r));
  };
  if (only_op.empty() || only_op != "pipeline") {
    for (const std::string& op : gradcheck_ops()) {
      if (!only_op.empty() && op != only_op) continue;
      if (f64)
        push(check_op<double>(op, seeds, h, tol));
      else
        push(check_op<float>(op, seeds, h, tol));
    }
    check_arg(!out.results.empty(), "unknown op for gradcheck: " + only_op);
  }
  if (!f64 && (only_op.empty() || only_op == "pipeline"))
    push(check_pipeline(seeds, tol_override > 0 ? tol_override : 1e-2));
  check_arg(!out.results.empty(), "nothing to gradcheck for op '" + only_op + "'");
  out.wall_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace synwarp
