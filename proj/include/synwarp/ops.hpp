#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "synwarp/tensor.hpp"

// Forward kernels. All reductions accumulate in double and round once on
// store, so results are independent of loop tiling and reproducible
// bit-for-bit for a given build.

namespace synwarp::ops {

// Attributes consumed by shape-parameterized kernels; unused fields are
// ignored by ops that do not need them.
struct OpAttrs {
  int axis = 0;       // softmax
  int stride = 1;     // conv2d/conv3d
  int pad = 0;        // conv2d/conv3d
  double alpha = 1.0; // affine: y = alpha*x + beta; leaky_relu slope
  double beta = 0.0;
  double sigma2 = 0.01;  // gaussian_heatmap variance
  int depth = 1, height = 1, width = 1;  // target grid dims (candidate_flows, gaussian_heatmap)
};

namespace detail {
// Axis coordinate: endpoint-inclusive linspace on [-1,1]; single-cell axes map to 0.
inline double axis_coord(int idx, int n) {
  return n > 1 ? -1.0 + 2.0 * static_cast<double>(idx) / static_cast<double>(n - 1) : 0.0;
}
// Inverse of axis_coord: continuous cell index of a normalized coordinate.
inline double axis_index(double coord, int n) {
  return n > 1 ? (coord + 1.0) * 0.5 * static_cast<double>(n - 1) : 0.0;
}
}  // namespace detail

// Normalized coordinate grid, shape d x h x w x 3. The trailing 3-vector is
// ordered (x, y, z) = (w-index, h-index, d-index) coordinates.
template <typename T>
TensorT<T> grid_coords(int d, int h, int w) {
  check_arg(d >= 1 && h >= 1 && w >= 1, "grid_coords: extents must be >= 1");
  TensorT<T> g({d, h, w, 3});
  long i = 0;
  for (int z = 0; z < d; ++z) {
    const T cz = static_cast<T>(detail::axis_coord(z, d));
    for (int y = 0; y < h; ++y) {
      const T cy = static_cast<T>(detail::axis_coord(y, h));
      for (int x = 0; x < w; ++x) {
        g[i++] = static_cast<T>(detail::axis_coord(x, w));
        g[i++] = cy;
        g[i++] = cz;
      }
    }
  }
  return g;
}

// Trilinear sampling of feature (C x D x H x W) at normalized coords
// (D' x H' x W' x 3). Out-of-range corners contribute zero; axes of extent 1
// are degenerate and always read their single slice.
template <typename T>
TensorT<T> trilinear_sample(const TensorT<T>& feature, const TensorT<T>& coords) {
  check_arg(feature.rank() == 4, "trilinear_sample: feature must be C x D x H x W");
  check_arg(coords.rank() == 4 && coords.dim(3) == 3, "trilinear_sample: coords must be D' x H' x W' x 3");
  const int C = feature.dim(0), D = feature.dim(1), H = feature.dim(2), W = feature.dim(3);
  const int Do = coords.dim(0), Ho = coords.dim(1), Wo = coords.dim(2);
  TensorT<T> out({C, Do, Ho, Wo});
  const long nvox = static_cast<long>(Do) * Ho * Wo;
  const long cstride = static_cast<long>(D) * H * W;
  for (long v = 0; v < nvox; ++v) {
    const double cx = coords[v * 3 + 0];
    const double cy = coords[v * 3 + 1];
    const double cz = coords[v * 3 + 2];
    const double ux = detail::axis_index(cx, W);
    const double uy = detail::axis_index(cy, H);
    const double uz = detail::axis_index(cz, D);
    const int x0 = static_cast<int>(std::floor(ux)), y0 = static_cast<int>(std::floor(uy)),
              z0 = static_cast<int>(std::floor(uz));
    const double fx = ux - x0, fy = uy - y0, fz = uz - z0;
    const double wx[2] = {1.0 - fx, fx}, wy[2] = {1.0 - fy, fy}, wz[2] = {1.0 - fz, fz};
    for (int c = 0; c < C; ++c) {
      const T* f = feature.data() + c * cstride;
      double acc = 0.0;
      for (int dz = 0; dz < 2; ++dz) {
        const int z = z0 + dz;
        if (z < 0 || z >= D || wz[dz] == 0.0) continue;
        for (int dy = 0; dy < 2; ++dy) {
          const int y = y0 + dy;
          if (y < 0 || y >= H || wy[dy] == 0.0) continue;
          const double wzy = wz[dz] * wy[dy];
          for (int dx = 0; dx < 2; ++dx) {
            const int x = x0 + dx;
            if (x < 0 || x >= W || wx[dx] == 0.0) continue;
            acc += wzy * wx[dx] * static_cast<double>(f[(static_cast<long>(z) * H + y) * W + x]);
          }
        }
      }
      out[c * nvox + v] = static_cast<T>(acc);
    }
  }
  return out;
}

// Max-subtracted softmax along one axis.
template <typename T>
TensorT<T> softmax(const TensorT<T>& t, int axis) {
  check_arg(axis >= 0 && axis < t.rank(), "softmax: axis out of range");
  const int n = t.dim(axis);
  const long inner = t.shape().stride(axis);
  const long outer = t.numel() / (static_cast<long>(n) * inner);
  TensorT<T> out(t.shape());
  std::vector<double> buf(static_cast<size_t>(n));
  for (long o = 0; o < outer; ++o) {
    for (long in = 0; in < inner; ++in) {
      const long base = o * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) mx = std::max(mx, static_cast<double>(t[base + i * inner]));
      double sum = 0.0;
      for (int i = 0; i < n; ++i) {
        buf[i] = std::exp(static_cast<double>(t[base + i * inner]) - mx);
        sum += buf[i];
      }
      for (int i = 0; i < n; ++i) out[base + i * inner] = static_cast<T>(buf[i] / sum);
    }
  }
  return out;
}

inline int conv_out_extent(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// 2D cross-correlation with bias: input C_in x H x W, kernel C_out x C_in x k x k.
template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& kernel, const TensorT<T>& bias,
                  int stride, int pad) {
  check_arg(input.rank() == 3, "conv2d: input must be C x H x W");
  check_arg(kernel.rank() == 4 && kernel.dim(2) == kernel.dim(3), "conv2d: kernel must be Co x Ci x k x k");
  check_arg(kernel.dim(1) == input.dim(0), "conv2d: channel mismatch");
  check_arg(stride >= 1 && pad >= 0, "conv2d: invalid stride/pad");
  const int Ci = input.dim(0), H = input.dim(1), W = input.dim(2);
  const int Co = kernel.dim(0), k = kernel.dim(2);
  check_arg(k <= H + 2 * pad && k <= W + 2 * pad, "conv2d: kernel larger than padded input");
  check_arg(bias.rank() == 1 && bias.dim(0) == Co, "conv2d: bias must have Co entries");
  const int Ho = conv_out_extent(H, k, stride, pad), Wo = conv_out_extent(W, k, stride, pad);
  TensorT<T> out({Co, Ho, Wo});
  std::vector<double> buf(static_cast<size_t>(Ho) * Wo);
  for (int co = 0; co < Co; ++co) {
    std::fill(buf.begin(), buf.end(), static_cast<double>(bias[co]));
    for (int ci = 0; ci < Ci; ++ci) {
      const T* in = input.data() + static_cast<long>(ci) * H * W;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const double wv = kernel.at(co, ci, ky, kx);
          if (wv == 0.0) continue;
          for (int oy = 0; oy < Ho; ++oy) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= H) continue;
            // ox range with ix = ox*stride + kx - pad inside [0, W)
            int ox0 = 0;
            while (ox0 < Wo && ox0 * stride + kx - pad < 0) ++ox0;
            int ox1 = Wo - 1;
            while (ox1 >= 0 && ox1 * stride + kx - pad >= W) --ox1;
            double* b = buf.data() + static_cast<long>(oy) * Wo;
            const T* row = in + static_cast<long>(iy) * W + kx - pad;
            for (int ox = ox0; ox <= ox1; ++ox) b[ox] += wv * static_cast<double>(row[ox * stride]);
          }
        }
      }
    }
    T* o = out.data() + static_cast<long>(co) * Ho * Wo;
    for (size_t i = 0; i < buf.size(); ++i) o[i] = static_cast<T>(buf[i]);
  }
  return out;
}

// 3D cross-correlation with bias: input C_in x D x H x W, kernel Co x Ci x k x k x k.
template <typename T>
TensorT<T> conv3d(const TensorT<T>& input, const TensorT<T>& kernel, const TensorT<T>& bias,
                  int stride, int pad) {
  check_arg(input.rank() == 4, "conv3d: input must be C x D x H x W");
  check_arg(kernel.rank() == 5 && kernel.dim(2) == kernel.dim(3) && kernel.dim(3) == kernel.dim(4),
            "conv3d: kernel must be Co x Ci x k x k x k");
  check_arg(kernel.dim(1) == input.dim(0), "conv3d: channel mismatch");
  check_arg(stride >= 1 && pad >= 0, "conv3d: invalid stride/pad");
  const int Ci = input.dim(0), D = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int Co = kernel.dim(0), k = kernel.dim(2);
  check_arg(k <= D + 2 * pad && k <= H + 2 * pad && k <= W + 2 * pad, "conv3d: kernel larger than padded input");
  check_arg(bias.rank() == 1 && bias.dim(0) == Co, "conv3d: bias must have Co entries");
  const int Do = conv_out_extent(D, k, stride, pad), Ho = conv_out_extent(H, k, stride, pad),
            Wo = conv_out_extent(W, k, stride, pad);
  TensorT<T> out({Co, Do, Ho, Wo});
  std::vector<double> buf(static_cast<size_t>(Do) * Ho * Wo);
  for (int co = 0; co < Co; ++co) {
    std::fill(buf.begin(), buf.end(), static_cast<double>(bias[co]));
    for (int ci = 0; ci < Ci; ++ci) {
      const T* in = input.data() + static_cast<long>(ci) * D * H * W;
      for (int kz = 0; kz < k; ++kz)
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) {
            const double wv = kernel.at(co, ci, kz, ky, kx);
            if (wv == 0.0) continue;
            for (int oz = 0; oz < Do; ++oz) {
              const int iz = oz * stride + kz - pad;
              if (iz < 0 || iz >= D) continue;
              for (int oy = 0; oy < Ho; ++oy) {
                const int iy = oy * stride + ky - pad;
                if (iy < 0 || iy >= H) continue;
                int ox0 = 0;
                while (ox0 < Wo && ox0 * stride + kx - pad < 0) ++ox0;
                int ox1 = Wo - 1;
                while (ox1 >= 0 && ox1 * stride + kx - pad >= W) --ox1;
                double* b = buf.data() + (static_cast<long>(oz) * Ho + oy) * Wo;
                const T* row = in + (static_cast<long>(iz) * H + iy) * W + kx - pad;
                for (int ox = ox0; ox <= ox1; ++ox) b[ox] += wv * static_cast<double>(row[ox * stride]);
              }
            }
          }
    }
    T* o = out.data() + static_cast<long>(co) * Do * Ho * Wo;
    for (size_t i = 0; i < buf.size(); ++i) o[i] = static_cast<T>(buf[i]);
  }
  return out;
}

// Row-major matmul: (n x k) * (k x m) -> (n x m).
template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
  check_arg(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0), "matmul: shape mismatch");
  const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
  TensorT<T> out({n, m});
  std::vector<double> row(static_cast<size_t>(m));
  for (int i = 0; i < n; ++i) {
    std::fill(row.begin(), row.end(), 0.0);
    for (int t = 0; t < k; ++t) {
      const double av = a[static_cast<long>(i) * k + t];
      if (av == 0.0) continue;
      const T* br = b.data() + static_cast<long>(t) * m;
      for (int j = 0; j < m; ++j) row[j] += av * static_cast<double>(br[j]);
    }
    T* o = out.data() + static_cast<long>(i) * m;
    for (int j = 0; j < m; ++j) o[j] = static_cast<T>(row[j]);
  }
  return out;
}

// ---- elementwise ----

template <typename T, typename F>
TensorT<T> map_unary(const TensorT<T>& t, F f) {
  TensorT<T> out(t.shape());
  for (long i = 0; i < t.numel(); ++i) out[i] = f(t[i]);
  return out;
}

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  check_arg(a.shape() == b.shape(), "add: shape mismatch");
  TensorT<T> out(a.shape());
  for (long i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  check_arg(a.shape() == b.shape(), "sub: shape mismatch");
  TensorT<T> out(a.shape());
  for (long i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
  return out;
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  check_arg(a.shape() == b.shape(), "mul: shape mismatch");
  TensorT<T> out(a.shape());
  for (long i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
  return out;
}

template <typename T>
TensorT<T> affine(const TensorT<T>& t, double alpha, double beta) {
  return map_unary(t, [&](T v) { return static_cast<T>(alpha * v + beta); });
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& t) {
  return map_unary(t, [](T v) { return static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(v)))); });
}

template <typename T>
TensorT<T> tanh_op(const TensorT<T>& t) {
  return map_unary(t, [](T v) { return static_cast<T>(std::tanh(static_cast<double>(v))); });
}

template <typename T>
TensorT<T> exp_op(const TensorT<T>& t) {
  return map_unary(t, [](T v) { return static_cast<T>(std::exp(static_cast<double>(v))); });
}

template <typename T>
TensorT<T> relu(const TensorT<T>& t) {
  return map_unary(t, [](T v) { return v > T(0) ? v : T(0); });
}

template <typename T>
TensorT<T> leaky_relu(const TensorT<T>& t, double slope) {
  return map_unary(t, [&](T v) { return v > T(0) ? v : static_cast<T>(slope * v); });
}

// Mean of all elements, returned as a 1-element tensor.
template <typename T>
TensorT<T> mean(const TensorT<T>& t) {
  double acc = 0.0;
  for (long i = 0; i < t.numel(); ++i) acc += static_cast<double>(t[i]);
  TensorT<T> out({1});
  out[0] = static_cast<T>(acc / static_cast<double>(t.numel()));
  return out;
}

// Mean absolute difference, returned as a 1-element tensor.
template <typename T>
TensorT<T> l1_loss(const TensorT<T>& a, const TensorT<T>& b) {
  check_arg(a.shape() == b.shape(), "l1_loss: shape mismatch");
  double acc = 0.0;
  for (long i = 0; i < a.numel(); ++i) acc += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
  TensorT<T> out({1});
  out[0] = static_cast<T>(acc / static_cast<double>(a.numel()));
  return out;
}

// Per-channel spatial mean: C x ... -> C.
template <typename T>
TensorT<T> spatial_mean(const TensorT<T>& t) {
  check_arg(t.rank() >= 2, "spatial_mean: rank must be >= 2");
  const int C = t.dim(0);
  const long inner = t.numel() / C;
  TensorT<T> out({C});
  for (int c = 0; c < C; ++c) {
    double acc = 0.0;
    const T* p = t.data() + c * inner;
    for (long i = 0; i < inner; ++i) acc += static_cast<double>(p[i]);
    out[c] = static_cast<T>(acc / static_cast<double>(inner));
  }
  return out;
}

// Nearest-neighbor 2x upsample: C x H x W -> C x 2H x 2W.
template <typename T>
TensorT<T> upsample2x(const TensorT<T>& t) {
  check_arg(t.rank() == 3, "upsample2x: input must be C x H x W");
  const int C = t.dim(0), H = t.dim(1), W = t.dim(2);
  TensorT<T> out({C, 2 * H, 2 * W});
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < 2 * H; ++y) {
      const T* src = t.data() + (static_cast<long>(c) * H + y / 2) * W;
      T* dst = out.data() + (static_cast<long>(c) * 2 * H + y) * 2 * W;
      for (int x = 0; x < 2 * W; ++x) dst[x] = src[x / 2];
    }
  return out;
}

// 5x5 binomial blur + 2x downsample with edge-clamped borders. Preserves
// constant images exactly (weights are dyadic and sum to 1).
template <typename T>
TensorT<T> pyr_down(const TensorT<T>& t) {
  check_arg(t.rank() == 3, "pyr_down: input must be C x H x W");
  const int C = t.dim(0), H = t.dim(1), W = t.dim(2);
  check_arg(H % 2 == 0 && W % 2 == 0, "pyr_down: extents must be even");
  static const double k5[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  const int Ho = H / 2, Wo = W / 2;
  TensorT<T> out({C, Ho, Wo});
  for (int c = 0; c < C; ++c) {
    const T* in = t.data() + static_cast<long>(c) * H * W;
    for (int oy = 0; oy < Ho; ++oy)
      for (int ox = 0; ox < Wo; ++ox) {
        double acc = 0.0;
        for (int dy = 0; dy < 5; ++dy) {
          const int iy = std::clamp(2 * oy + dy - 2, 0, H - 1);
          double racc = 0.0;
          for (int dx = 0; dx < 5; ++dx) {
            const int ix = std::clamp(2 * ox + dx - 2, 0, W - 1);
            racc += k5[dx] * static_cast<double>(in[static_cast<long>(iy) * W + ix]);
          }
          acc += k5[dy] * racc;
        }
        out[(static_cast<long>(c) * Ho + oy) * Wo + ox] = static_cast<T>(acc);
      }
  }
  return out;
}

// Broadcast a 1 x H x W mask over the channels of x (C x H x W).
template <typename T>
TensorT<T> bcast_mul(const TensorT<T>& mask, const TensorT<T>& x) {
  check_arg(mask.rank() == 3 && mask.dim(0) == 1, "bcast_mul: mask must be 1 x H x W");
  check_arg(x.rank() == 3 && x.dim(1) == mask.dim(1) && x.dim(2) == mask.dim(2),
            "bcast_mul: spatial dims mismatch");
  const int C = x.dim(0);
  const long hw = static_cast<long>(x.dim(1)) * x.dim(2);
  TensorT<T> out(x.shape());
  for (int c = 0; c < C; ++c)
    for (long i = 0; i < hw; ++i) out[c * hw + i] = mask[i] * x[c * hw + i];
  return out;
}

// Concatenate along axis 0; trailing dims must match.
template <typename T>
TensorT<T> concat_ch(const std::vector<const TensorT<T>*>& parts) {
  check_arg(!parts.empty(), "concat_ch: empty input list");
  const Shape& s0 = parts[0]->shape();
  int total = 0;
  for (const auto* p : parts) {
    check_arg(p->rank() == s0.rank(), "concat_ch: rank mismatch");
    for (int i = 1; i < s0.rank(); ++i) check_arg(p->dim(i) == s0[i], "concat_ch: trailing dims mismatch");
    total += p->dim(0);
  }
  std::vector<int> dims{total};
  for (int i = 1; i < s0.rank(); ++i) dims.push_back(s0[i]);
  TensorT<T> out{Shape(dims)};
  long off = 0;
  for (const auto* p : parts) {
    std::copy(p->data(), p->data() + p->numel(), out.data() + off);
    off += p->numel();
  }
  return out;
}

// c x h x w feature map -> (h*w) x c token matrix (row-major spatial order).
template <typename T>
TensorT<T> tokens_from_chw(const TensorT<T>& t) {
  check_arg(t.rank() == 3, "tokens_from_chw: input must be c x h x w");
  const int c = t.dim(0);
  const long hw = static_cast<long>(t.dim(1)) * t.dim(2);
  TensorT<T> out({static_cast<int>(hw), c});
  for (int ch = 0; ch < c; ++ch)
    for (long i = 0; i < hw; ++i) out[i * c + ch] = t[ch * hw + i];
  return out;
}

// (h*w) x c token matrix -> c x h x w feature map.
template <typename T>
TensorT<T> chw_from_tokens(const TensorT<T>& t, int h, int w) {
  check_arg(t.rank() == 2 && t.dim(0) == h * w, "chw_from_tokens: token count mismatch");
  const int c = t.dim(1);
  const long hw = static_cast<long>(h) * w;
  TensorT<T> out({c, h, w});
  for (long i = 0; i < hw; ++i)
    for (int ch = 0; ch < c; ++ch) out[ch * hw + i] = t[i * c + ch];
  return out;
}

// K translation candidates plus the identity flow, from paired keypoints.
// Candidate 0 is w0(p) = p; candidate k is wk(p) = p + (xs_k - xd_k).
template <typename T>
TensorT<T> candidate_flows(const TensorT<T>& xs, const TensorT<T>& xd, int d, int h, int w) {
  check_arg(xs.rank() == 2 && xs.dim(1) == 3, "candidate_flows: xs must be K x 3");
  check_arg(xd.rank() == 2 && xd.dim(1) == 3, "candidate_flows: xd must be K x 3");
  check_arg(xs.dim(0) == xd.dim(0), "candidate_flows: keypoint count mismatch");
  const int K = xs.dim(0);
  const TensorT<T> grid = grid_coords<T>(d, h, w);
  const long gN = grid.numel();
  TensorT<T> out({K + 1, d, h, w, 3});
  std::copy(grid.data(), grid.data() + gN, out.data());
  for (int k = 0; k < K; ++k) {
    const T dx = xs[k * 3 + 0] - xd[k * 3 + 0];
    const T dy = xs[k * 3 + 1] - xd[k * 3 + 1];
    const T dz = xs[k * 3 + 2] - xd[k * 3 + 2];
    T* o = out.data() + static_cast<long>(k + 1) * gN;
    for (long v = 0; v < gN; v += 3) {
      o[v + 0] = grid[v + 0] + dx;
      o[v + 1] = grid[v + 1] + dy;
      o[v + 2] = grid[v + 2] + dz;
    }
  }
  return out;
}

// Per-voxel convex combination of candidate flows by mask weights:
// masks (K+1) x D x H x W, cands (K+1) x D x H x W x 3 -> D x H x W x 3.
template <typename T>
TensorT<T> flow_combine(const TensorT<T>& masks, const TensorT<T>& cands) {
  check_arg(masks.rank() == 4 && cands.rank() == 5 && cands.dim(4) == 3, "flow_combine: bad ranks");
  check_arg(masks.dim(0) == cands.dim(0) && masks.dim(1) == cands.dim(1) &&
                masks.dim(2) == cands.dim(2) && masks.dim(3) == cands.dim(3),
            "flow_combine: shape mismatch");
  const int K1 = masks.dim(0);
  const long nvox = masks.numel() / K1;
  TensorT<T> out({masks.dim(1), masks.dim(2), masks.dim(3), 3});
  for (long v = 0; v < nvox; ++v) {
    double ax = 0.0, ay = 0.0, az = 0.0;
    for (int k = 0; k < K1; ++k) {
      const double m = masks[k * nvox + v];
      const T* c = cands.data() + (k * nvox + v) * 3;
      ax += m * static_cast<double>(c[0]);
      ay += m * static_cast<double>(c[1]);
      az += m * static_cast<double>(c[2]);
    }
    out[v * 3 + 0] = static_cast<T>(ax);
    out[v * 3 + 1] = static_cast<T>(ay);
    out[v * 3 + 2] = static_cast<T>(az);
  }
  return out;
}

// Gaussian spatialization of keypoints: channel k holds
// exp(-||g - x_k||^2 / (2 sigma^2)) on the d x h x w coordinate grid.
template <typename T>
TensorT<T> gaussian_heatmap(const TensorT<T>& kp, int d, int h, int w, double sigma2) {
  check_arg(kp.rank() == 2 && kp.dim(1) == 3, "gaussian_heatmap: keypoints must be K x 3");
  check_arg(sigma2 > 0.0, "gaussian_heatmap: sigma2 must be positive");
  const int K = kp.dim(0);
  TensorT<T> out({K, d, h, w});
  const double inv = 1.0 / (2.0 * sigma2);
  for (int k = 0; k < K; ++k) {
    const double px = kp[k * 3 + 0], py = kp[k * 3 + 1], pz = kp[k * 3 + 2];
    T* o = out.data() + static_cast<long>(k) * d * h * w;
    long i = 0;
    for (int z = 0; z < d; ++z) {
      const double dz = detail::axis_coord(z, d) - pz;
      for (int y = 0; y < h; ++y) {
        const double dy = detail::axis_coord(y, h) - py;
        const double dzy = dz * dz + dy * dy;
        for (int x = 0; x < w; ++x) {
          const double dx = detail::axis_coord(x, w) - px;
          o[i++] = static_cast<T>(std::exp(-(dzy + dx * dx) * inv));
        }
      }
    }
  }
  return out;
}

namespace detail {
// Elementary rotations in row-vector convention (x' = x . M), i.e. the
// transposes of the usual column forms.
inline void rot_x(double th, double m[9], bool deriv) {
  const double c = deriv ? -std::sin(th) : std::cos(th);
  const double s = deriv ? std::cos(th) : std::sin(th);
  const double one = deriv ? 0.0 : 1.0;
  const double vals[9] = {one, 0, 0, 0, c, s, 0, -s, c};
  std::copy(vals, vals + 9, m);
}
inline void rot_y(double th, double m[9], bool deriv) {
  const double c = deriv ? -std::sin(th) : std::cos(th);
  const double s = deriv ? std::cos(th) : std::sin(th);
  const double one = deriv ? 0.0 : 1.0;
  const double vals[9] = {c, 0, -s, 0, one, 0, s, 0, c};
  std::copy(vals, vals + 9, m);
}
inline void rot_z(double th, double m[9], bool deriv) {
  const double c = deriv ? -std::sin(th) : std::cos(th);
  const double s = deriv ? std::cos(th) : std::sin(th);
  const double one = deriv ? 0.0 : 1.0;
  const double vals[9] = {c, s, 0, -s, c, 0, 0, 0, one};
  std::copy(vals, vals + 9, m);
}
inline void mat3_mul(const double a[9], const double b[9], double out[9]) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += a[i * 3 + k] * b[k * 3 + j];
      out[i * 3 + j] = acc;
    }
}
}  // namespace detail

// R = R_z(roll) . R_y(yaw) . R_x(pitch) in row-vector convention; input is the
// angle triple (yaw, pitch, roll).
template <typename T>
TensorT<T> euler_rot(const TensorT<T>& angles) {
  check_arg(angles.numel() == 3, "euler_rot: expected 3 angles (yaw, pitch, roll)");
  double rz[9], ry[9], rx[9], zy[9], r[9];
  detail::rot_z(angles[2], rz, false);
  detail::rot_y(angles[0], ry, false);
  detail::rot_x(angles[1], rx, false);
  detail::mat3_mul(rz, ry, zy);
  detail::mat3_mul(zy, rx, r);
  TensorT<T> out({3, 3});
  for (int i = 0; i < 9; ++i) out[i] = static_cast<T>(r[i]);
  return out;
}

// Scalar broadcast product: s is a 1-element tensor.
template <typename T>
TensorT<T> scalar_mul(const TensorT<T>& s, const TensorT<T>& x) {
  check_arg(s.numel() == 1, "scalar_mul: first input must hold one element");
  TensorT<T> out(x.shape());
  const T sv = s[0];
  for (long i = 0; i < x.numel(); ++i) out[i] = sv * x[i];
  return out;
}

// Subtensor at index i along axis 0 (rank drops by one).
template <typename T>
TensorT<T> slice0(const TensorT<T>& t, int i) {
  check_arg(t.rank() >= 2, "slice0: input must have rank >= 2");
  check_arg(i >= 0 && i < t.dim(0), "slice0: index out of range");
  std::vector<int> dims;
  for (int d = 1; d < t.rank(); ++d) dims.push_back(t.dim(d));
  TensorT<T> out{Shape(dims)};
  const long n = out.numel();
  std::copy(t.data() + static_cast<long>(i) * n, t.data() + (static_cast<long>(i) + 1) * n,
            out.data());
  return out;
}

// Row broadcast add: b (length m) is added to every row of a (n x m).
template <typename T>
TensorT<T> add_rows(const TensorT<T>& a, const TensorT<T>& b) {
  check_arg(a.rank() == 2, "add_rows: first input must be 2-D");
  check_arg(b.numel() == a.dim(1), "add_rows: row length mismatch");
  TensorT<T> out(a.shape());
  const int n = a.dim(0), m = a.dim(1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out[static_cast<long>(i) * m + j] = a[static_cast<long>(i) * m + j] + b[j];
  return out;
}

}  // namespace synwarp::ops
