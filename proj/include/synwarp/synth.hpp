#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "synwarp/bundle.hpp"
#include "synwarp/model.hpp"

// Synthetic blob-avatar data: a gradient background, a pose-driven head
// ellipse, and per-keypoint Gaussian blobs whose centers follow the keypoint
// transformation — keypoints drive appearance, and motion ground truth is
// exact by construction.

namespace synwarp {

struct Palette {
  std::vector<std::array<float, 3>> blob_colors;  // K entries
  std::array<float, 3> head_color{};
  std::array<float, 3> bg_top{}, bg_bottom{};
};

struct SceneSpec {
  int keypoints = 21;
  int size = 64;
  double blob_radius = 0.09;  // normalized units
  double step_cap = 0.08;     // per-frame walk step bound, fraction of each range
  Palette palette;
};

namespace synth_detail {
inline std::array<float, 3> hsv(double h, double s, double v) {
  h = h - std::floor(h);
  const double c = v * s, x = c * (1.0 - std::fabs(std::fmod(h * 6.0, 2.0) - 1.0)), m = v - c;
  double r = 0, g = 0, b = 0;
  const int sector = static_cast<int>(h * 6.0) % 6;
  switch (sector) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  return {static_cast<float>(r + m), static_cast<float>(g + m), static_cast<float>(b + m)};
}
}  // namespace synth_detail

inline Palette random_palette(Rng& rng, int K) {
  Palette p;
  const double base_hue = rng.uniform(0.0, 1.0);
  for (int k = 0; k < K; ++k)
    p.blob_colors.push_back(synth_detail::hsv(base_hue + static_cast<double>(k) / K +
                                                  rng.uniform(-0.03, 0.03),
                                              0.75, 0.95));
  p.head_color = synth_detail::hsv(rng.uniform(0.0, 1.0), 0.25, 0.75);
  p.bg_top = synth_detail::hsv(rng.uniform(0.0, 1.0), 0.35, 0.30);
  p.bg_bottom = synth_detail::hsv(rng.uniform(0.0, 1.0), 0.35, 0.15);
  return p;
}

// Deterministic soft renderer; all math in double, stored once as f32.
inline Tensor render_frame(const Tensor& xc, const MotionParams& p, const SceneSpec& spec) {
  const int S = spec.size, K = xc.dim(0);
  check_arg(static_cast<int>(spec.palette.blob_colors.size()) == K,
            "render_frame: palette size must match keypoint count");
  Tensor img({3, S, S});
  const Tensor kp = transform_keypoints(xc, p);

  const double cx = p.t[0], cy = p.t[1];
  // Yaw narrows the ellipse (profile turn), roll tilts it.
  const double rx = 0.62 * p.s * (1.0 - 0.35 * std::fabs(std::sin(p.yaw)));
  const double ry = 0.78 * p.s;
  const double ca = std::cos(p.roll), sa = std::sin(p.roll);
  const double edge = 0.06;
  const double rb2 = 2.0 * spec.blob_radius * spec.blob_radius;

  for (int iy = 0; iy < S; ++iy) {
    const double gy = ops::detail::axis_coord(iy, S);
    const double frac = S > 1 ? static_cast<double>(iy) / (S - 1) : 0.0;
    for (int ix = 0; ix < S; ++ix) {
      const double gx = ops::detail::axis_coord(ix, S);
      double r = spec.palette.bg_top[0] + (spec.palette.bg_bottom[0] - spec.palette.bg_top[0]) * frac;
      double g = spec.palette.bg_top[1] + (spec.palette.bg_bottom[1] - spec.palette.bg_top[1]) * frac;
      double b = spec.palette.bg_top[2] + (spec.palette.bg_bottom[2] - spec.palette.bg_top[2]) * frac;

      const double dx = gx - cx, dy = gy - cy;
      const double ex = (dx * ca + dy * sa) / rx, ey = (-dx * sa + dy * ca) / ry;
      const double d_ell = std::sqrt(ex * ex + ey * ey);
      double alpha = 0.0;
      if (d_ell < 1.0 + edge) alpha = d_ell < 1.0 - edge ? 1.0 : (1.0 + edge - d_ell) / (2.0 * edge);
      r += alpha * (spec.palette.head_color[0] - r);
      g += alpha * (spec.palette.head_color[1] - g);
      b += alpha * (spec.palette.head_color[2] - b);

      for (int k = 0; k < K; ++k) {
        const double bx = gx - kp[k * 3 + 0], by = gy - kp[k * 3 + 1];
        const double a = std::exp(-(bx * bx + by * by) / rb2);
        r += a * (spec.palette.blob_colors[static_cast<size_t>(k)][0] - r);
        g += a * (spec.palette.blob_colors[static_cast<size_t>(k)][1] - g);
        b += a * (spec.palette.blob_colors[static_cast<size_t>(k)][2] - b);
      }
      img[(0L * S + iy) * S + ix] = static_cast<float>(std::clamp(r, 0.0, 1.0));
      img[(1L * S + iy) * S + ix] = static_cast<float>(std::clamp(g, 0.0, 1.0));
      img[(2L * S + iy) * S + ix] = static_cast<float>(std::clamp(b, 0.0, 1.0));
    }
  }
  return img;
}

struct SequenceRecord {
  int id = 0;
  std::uint64_t seed = 0;
  SceneSpec spec;
  Tensor xc;  // K x 3
  std::vector<MotionParams> params;
  std::vector<Tensor> frames;
};

namespace synth_detail {
struct WalkVar {
  double value = 0.0, lo = 0.0, hi = 0.0, kappa = 0.25;
  void init(Rng& rng, double l, double h) {
    lo = l;
    hi = h;
    value = rng.uniform(0.55 * l, 0.55 * h);
  }
  // Mean-reverting step, hard-capped so per-frame deltas stay bounded.
  void step(Rng& rng, double cap_frac) {
    const double cap = cap_frac * (hi - lo);
    double d = rng.normal() * 0.6 * cap - kappa * value * cap_frac;
    d = std::clamp(d, -cap, cap);
    value = std::clamp(value + d, lo, hi);
  }
};
}  // namespace synth_detail

inline SequenceRecord gen_sequence(Rng& rng, int T, const SceneSpec& base_spec) {
  check_arg(T >= 2, "gen_sequence: need at least 2 frames");
  SequenceRecord rec;
  rec.spec = base_spec;
  rec.seed = rng.next_u64();
  Rng local(rec.seed);
  const int K = base_spec.keypoints;
  rec.spec.palette = random_palette(local, K);

  rec.xc = Tensor({K, 3});
  for (long i = 0; i < rec.xc.numel(); ++i) rec.xc[i] = static_cast<float>(local.uniform(-0.55, 0.55));

  using synth_detail::WalkVar;
  WalkVar yaw, pitch, roll, tx, ty, tz, logs;
  yaw.init(local, -0.5, 0.5);
  pitch.init(local, -0.4, 0.4);
  roll.init(local, -0.5, 0.5);
  tx.init(local, -0.3, 0.3);
  ty.init(local, -0.3, 0.3);
  tz.init(local, -0.2, 0.2);
  logs.init(local, -0.12, 0.12);
  std::vector<WalkVar> dvars(static_cast<size_t>(K) * 3);
  for (auto& v : dvars) v.init(local, -0.15, 0.15);

  for (int t = 0; t < T; ++t) {
    if (t > 0) {
      const double cap = rec.spec.step_cap;
      yaw.step(local, cap);
      pitch.step(local, cap);
      roll.step(local, cap);
      tx.step(local, cap);
      ty.step(local, cap);
      tz.step(local, cap);
      logs.step(local, cap);
      for (auto& v : dvars) v.step(local, cap);
    }
    MotionParams p;
    p.yaw = yaw.value;
    p.pitch = pitch.value;
    p.roll = roll.value;
    p.t[0] = static_cast<float>(tx.value);
    p.t[1] = static_cast<float>(ty.value);
    p.t[2] = static_cast<float>(tz.value);
    p.s = std::exp(logs.value);
    p.delta = Tensor({K, 3});
    for (long i = 0; i < p.delta.numel(); ++i)
      p.delta[i] = static_cast<float>(dvars[static_cast<size_t>(i)].value);
    rec.params.push_back(p);
    rec.frames.push_back(render_frame(rec.xc, p, rec.spec));
  }
  return rec;
}

// ---- PPM (P6, maxval 255) ----

inline void write_ppm(const std::filesystem::path& path, const Tensor& img) {
  check_arg(img.rank() == 3 && img.dim(0) == 3, "write_ppm: image must be 3 x H x W");
  const int H = img.dim(1), W = img.dim(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "P6\n" << W << " " << H << "\n255\n";
  const long plane = static_cast<long>(H) * W;
  for (long i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(static_cast<double>(img[c * plane + i]), 0.0, 1.0);
      out.put(static_cast<char>(static_cast<int>(std::lround(v * 255.0))));
    }
  if (!out) throw IoError("write failed: " + path.string());
}

inline Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || maxval != 255 || w <= 0 || h <= 0)
    throw IoError("unsupported PPM (want P6 maxval 255): " + path.string());
  in.get();  // single whitespace after header
  Tensor img({3, h, w});
  const long plane = static_cast<long>(h) * w;
  for (long i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c) {
      const int byte = in.get();
      if (byte < 0) throw IoError("truncated PPM: " + path.string());
      img[c * plane + i] = static_cast<float>(byte) / 255.0f;
    }
  return img;
}

// ---- dataset layout: DIR/seq_%04d/{frame_%04d.ppm, frame_%04d.swnb, meta.swnb} ----

namespace synth_detail {
inline std::string zero_pad(int v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", v);
  return buf;
}
}  // namespace synth_detail

inline std::filesystem::path sequence_dir(const std::filesystem::path& root, int id) {
  return root / ("seq_" + synth_detail::zero_pad(id));
}

inline void write_sequence(const std::filesystem::path& root, const SequenceRecord& rec) {
  namespace fs = std::filesystem;
  const fs::path dir = sequence_dir(root, rec.id);
  fs::create_directories(dir);
  const int T = static_cast<int>(rec.frames.size());
  const int K = rec.spec.keypoints;

  Bundle meta;
  meta.f32["xc"] = rec.xc;
  TensorD yaw({T}), pitch({T}), roll({T}), s({T});
  Tensor t({T, 3}), delta({T, K, 3});
  for (int i = 0; i < T; ++i) {
    const MotionParams& p = rec.params[static_cast<size_t>(i)];
    yaw[i] = p.yaw;
    pitch[i] = p.pitch;
    roll[i] = p.roll;
    s[i] = p.s;
    for (int j = 0; j < 3; ++j) t[i * 3 + j] = p.t[j];
    for (long j = 0; j < static_cast<long>(K) * 3; ++j) delta[i * K * 3 + j] = p.delta[j];
  }
  meta.f64["yaw"] = yaw;
  meta.f64["pitch"] = pitch;
  meta.f64["roll"] = roll;
  meta.f64["s"] = s;
  meta.f32["t"] = t;
  meta.f32["delta"] = delta;
  Tensor blobs({K, 3});
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < 3; ++j) blobs[k * 3 + j] = rec.spec.palette.blob_colors[static_cast<size_t>(k)][j];
  meta.f32["palette.blobs"] = blobs;
  Tensor head({3}), bg({2, 3});
  for (int j = 0; j < 3; ++j) {
    head[j] = rec.spec.palette.head_color[j];
    bg[j] = rec.spec.palette.bg_top[j];
    bg[3 + j] = rec.spec.palette.bg_bottom[j];
  }
  meta.f32["palette.head"] = head;
  meta.f32["palette.bg"] = bg;
  meta.put_scalar("blob_radius", rec.spec.blob_radius);
  meta.put_scalar("step_cap", rec.spec.step_cap);
  meta.put_scalar("size", rec.spec.size);
  // Split across two 32-bit halves: a double cannot hold every u64 exactly.
  meta.put_scalar("seed_hi", static_cast<double>(rec.seed >> 32));
  meta.put_scalar("seed_lo", static_cast<double>(rec.seed & 0xffffffffull));
  meta.save(dir / "meta.swnb");

  for (int i = 0; i < T; ++i) {
    const std::string stem = "frame_" + synth_detail::zero_pad(i);
    write_ppm(dir / (stem + ".ppm"), rec.frames[static_cast<size_t>(i)]);
    Bundle fb;
    fb.f32["image"] = rec.frames[static_cast<size_t>(i)];
    fb.save(dir / (stem + ".swnb"));
  }
}

inline SequenceRecord read_sequence(const std::filesystem::path& root, int id) {
  namespace fs = std::filesystem;
  const fs::path dir = sequence_dir(root, id);
  Bundle meta = Bundle::load(dir / "meta.swnb");
  SequenceRecord rec;
  rec.id = id;
  rec.xc = meta.get_f32("xc");
  const int K = rec.xc.dim(0);
  rec.spec.keypoints = K;
  rec.spec.size = static_cast<int>(meta.scalar("size"));
  rec.spec.blob_radius = meta.scalar("blob_radius");
  rec.spec.step_cap = meta.scalar("step_cap");
  rec.seed = (static_cast<std::uint64_t>(meta.scalar("seed_hi")) << 32) |
             static_cast<std::uint64_t>(meta.scalar("seed_lo"));
  const Tensor& blobs = meta.get_f32("palette.blobs");
  for (int k = 0; k < K; ++k)
    rec.spec.palette.blob_colors.push_back(
        {blobs[k * 3 + 0], blobs[k * 3 + 1], blobs[k * 3 + 2]});
  const Tensor& head = meta.get_f32("palette.head");
  const Tensor& bg = meta.get_f32("palette.bg");
  for (int j = 0; j < 3; ++j) {
    rec.spec.palette.head_color[j] = head[j];
    rec.spec.palette.bg_top[j] = bg[j];
    rec.spec.palette.bg_bottom[j] = bg[3 + j];
  }
  const TensorD& yaw = meta.get_f64("yaw");
  const int T = yaw.dim(0);
  const Tensor& t = meta.get_f32("t");
  const Tensor& delta = meta.get_f32("delta");
  for (int i = 0; i < T; ++i) {
    MotionParams p;
    p.yaw = yaw[i];
    p.pitch = meta.get_f64("pitch")[i];
    p.roll = meta.get_f64("roll")[i];
    p.s = meta.get_f64("s")[i];
    for (int j = 0; j < 3; ++j) p.t[j] = t[i * 3 + j];
    p.delta = Tensor({K, 3});
    for (long j = 0; j < static_cast<long>(K) * 3; ++j) p.delta[j] = delta[i * K * 3 + j];
    rec.params.push_back(p);
    rec.frames.push_back(Bundle::load(dir / ("frame_" + synth_detail::zero_pad(i) + ".swnb"))
                             .get_f32("image"));
  }
  return rec;
}

inline int count_sequences(const std::filesystem::path& root) {
  int n = 0;
  while (std::filesystem::exists(sequence_dir(root, n) / "meta.swnb")) ++n;
  return n;
}

inline void gen_dataset(const std::filesystem::path& root, int seqs, int frames,
                        const SceneSpec& spec, std::uint64_t seed) {
  check_arg(seqs >= 1, "gen_dataset: need at least one sequence");
  std::filesystem::create_directories(root);
  Rng rng(seed);
  for (int i = 0; i < seqs; ++i) {
    Rng seq_rng = rng.fork(static_cast<std::uint64_t>(i));
    SequenceRecord rec = gen_sequence(seq_rng, frames, spec);
    rec.id = i;
    write_sequence(root, rec);
  }
}

// ---- sample assembly (shared by training and evaluation) ----

// R=1: the source frame is the sole reference. R>=2: add R-1 frames spread
// evenly through the sequence, stepping past the driving frame on collision.
inline std::vector<int> reference_frames(int T, int src, int drv, int R) {
  std::vector<int> out{src};
  for (int j = 1; j < R; ++j) {
    int idx = static_cast<int>((static_cast<long>(j) * T) / R);
    if (idx == drv) idx = (idx + 1) % T;
    out.push_back(idx);
  }
  return out;
}

inline Sample make_sample(const SequenceRecord& rec, int src, int drv, int refs) {
  const int T = static_cast<int>(rec.frames.size());
  check_arg(src >= 0 && src < T && drv >= 0 && drv < T, "make_sample: frame index out of range");
  Sample s;
  s.source = rec.frames[static_cast<size_t>(src)];
  s.driving = rec.frames[static_cast<size_t>(drv)];
  s.xc = rec.xc;
  s.ps = rec.params[static_cast<size_t>(src)];
  s.pd = rec.params[static_cast<size_t>(drv)];
  for (int idx : reference_frames(T, src, drv, refs)) {
    s.ref_images.push_back(rec.frames[static_cast<size_t>(idx)]);
    s.pr.push_back(rec.params[static_cast<size_t>(idx)]);
  }
  return s;
}

}  // namespace synwarp
