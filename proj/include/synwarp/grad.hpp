#pragma once

#include <span>
#include <string>
#include <vector>

#include "synwarp/ops.hpp"

// Hand-derived vector-Jacobian products for every forward kernel, plus a
// name-dispatched forward/backward pair used by the tape, the gradient
// checker, and the `gradcheck` CLI.

namespace synwarp::ops {

template <typename T>
TensorT<T> transpose2d(const TensorT<T>& t) {
  check_arg(t.rank() == 2, "transpose2d: input must be 2-D");
  const int n = t.dim(0), m = t.dim(1);
  TensorT<T> out({m, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out[static_cast<long>(j) * n + i] = t[static_cast<long>(i) * m + j];
  return out;
}

template <typename T>
void trilinear_sample_vjp(const TensorT<T>& feature, const TensorT<T>& coords,
                          const TensorT<T>& upstream, TensorT<T>* grad_feature,
                          TensorT<T>* grad_coords) {
  const int C = feature.dim(0), D = feature.dim(1), H = feature.dim(2), W = feature.dim(3);
  const long nvox = static_cast<long>(coords.dim(0)) * coords.dim(1) * coords.dim(2);
  const long cstride = static_cast<long>(D) * H * W;
  std::vector<double> gf;
  if (grad_feature) gf.assign(static_cast<size_t>(feature.numel()), 0.0);
  if (grad_coords) *grad_coords = TensorT<T>(coords.shape());
  const double sx = W > 1 ? 0.5 * (W - 1) : 0.0;
  const double sy = H > 1 ? 0.5 * (H - 1) : 0.0;
  const double sz = D > 1 ? 0.5 * (D - 1) : 0.0;
  for (long v = 0; v < nvox; ++v) {
    const double ux = detail::axis_index(coords[v * 3 + 0], W);
    const double uy = detail::axis_index(coords[v * 3 + 1], H);
    const double uz = detail::axis_index(coords[v * 3 + 2], D);
    const int x0 = static_cast<int>(std::floor(ux)), y0 = static_cast<int>(std::floor(uy)),
              z0 = static_cast<int>(std::floor(uz));
    const double fx = ux - x0, fy = uy - y0, fz = uz - z0;
    const double wx[2] = {1.0 - fx, fx}, wy[2] = {1.0 - fy, fy}, wz[2] = {1.0 - fz, fz};
    const double dwx[2] = {-1.0, 1.0};
    double gx = 0.0, gy = 0.0, gz = 0.0;
    for (int dz = 0; dz < 2; ++dz) {
      const int z = z0 + dz;
      if (z < 0 || z >= D) continue;
      for (int dy = 0; dy < 2; ++dy) {
        const int y = y0 + dy;
        if (y < 0 || y >= H) continue;
        for (int dx = 0; dx < 2; ++dx) {
          const int x = x0 + dx;
          if (x < 0 || x >= W) continue;
          const long cell = (static_cast<long>(z) * H + y) * W + x;
          const double wgt = wz[dz] * wy[dy] * wx[dx];
          for (int c = 0; c < C; ++c) {
            const double u = upstream[c * nvox + v];
            if (grad_feature) gf[static_cast<size_t>(c * cstride + cell)] += wgt * u;
            if (grad_coords) {
              const double f = feature[c * cstride + cell];
              gx += u * f * wz[dz] * wy[dy] * dwx[dx];
              gy += u * f * wz[dz] * dwx[dy] * wx[dx];
              gz += u * f * dwx[dz] * wy[dy] * wx[dx];
            }
          }
        }
      }
    }
    if (grad_coords) {
      (*grad_coords)[v * 3 + 0] = static_cast<T>(gx * sx);
      (*grad_coords)[v * 3 + 1] = static_cast<T>(gy * sy);
      (*grad_coords)[v * 3 + 2] = static_cast<T>(gz * sz);
    }
  }
  if (grad_feature) {
    *grad_feature = TensorT<T>(feature.shape());
    for (long i = 0; i < feature.numel(); ++i) (*grad_feature)[i] = static_cast<T>(gf[static_cast<size_t>(i)]);
  }
}

template <typename T>
TensorT<T> softmax_vjp(const TensorT<T>& x, int axis, const TensorT<T>& upstream) {
  const TensorT<T> y = softmax(x, axis);
  const int n = x.dim(axis);
  const long inner = x.shape().stride(axis);
  const long outer = x.numel() / (static_cast<long>(n) * inner);
  TensorT<T> gx(x.shape());
  for (long o = 0; o < outer; ++o)
    for (long in = 0; in < inner; ++in) {
      const long base = o * n * inner + in;
      double dot = 0.0;
      for (int i = 0; i < n; ++i)
        dot += static_cast<double>(upstream[base + i * inner]) * static_cast<double>(y[base + i * inner]);
      for (int i = 0; i < n; ++i) {
        const long idx = base + i * inner;
        gx[idx] = static_cast<T>(static_cast<double>(y[idx]) * (static_cast<double>(upstream[idx]) - dot));
      }
    }
  return gx;
}

template <typename T>
void conv2d_vjp(const TensorT<T>& input, const TensorT<T>& kernel, const TensorT<T>& upstream,
                int stride, int pad, TensorT<T>* grad_input, TensorT<T>* grad_kernel,
                TensorT<T>* grad_bias) {
  const int Ci = input.dim(0), H = input.dim(1), W = input.dim(2);
  const int Co = kernel.dim(0), k = kernel.dim(2);
  const int Ho = upstream.dim(1), Wo = upstream.dim(2);
  std::vector<double> gi;
  if (grad_input) gi.assign(static_cast<size_t>(input.numel()), 0.0);
  if (grad_kernel) *grad_kernel = TensorT<T>(kernel.shape());
  for (int co = 0; co < Co; ++co) {
    const T* g = upstream.data() + static_cast<long>(co) * Ho * Wo;
    for (int ci = 0; ci < Ci; ++ci) {
      const T* in = input.data() + static_cast<long>(ci) * H * W;
      double* gin = grad_input ? gi.data() + static_cast<long>(ci) * H * W : nullptr;
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const double wv = kernel.at(co, ci, ky, kx);
          double wacc = 0.0;
          for (int oy = 0; oy < Ho; ++oy) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= H) continue;
            int ox0 = 0;
            while (ox0 < Wo && ox0 * stride + kx - pad < 0) ++ox0;
            int ox1 = Wo - 1;
            while (ox1 >= 0 && ox1 * stride + kx - pad >= W) --ox1;
            const T* grow = g + static_cast<long>(oy) * Wo;
            const long ibase = static_cast<long>(iy) * W + kx - pad;
            if (grad_kernel) {
              const T* irow = in + ibase;
              for (int ox = ox0; ox <= ox1; ++ox)
                wacc += static_cast<double>(grow[ox]) * static_cast<double>(irow[ox * stride]);
            }
            if (gin) {
              double* girow = gin + ibase;
              for (int ox = ox0; ox <= ox1; ++ox)
                girow[ox * stride] += wv * static_cast<double>(grow[ox]);
            }
          }
          if (grad_kernel) grad_kernel->at(co, ci, ky, kx) = static_cast<T>(wacc);
        }
    }
  }
  if (grad_input) {
    *grad_input = TensorT<T>(input.shape());
    for (long i = 0; i < input.numel(); ++i) (*grad_input)[i] = static_cast<T>(gi[static_cast<size_t>(i)]);
  }
  if (grad_bias) {
    *grad_bias = TensorT<T>({Co});
    for (int co = 0; co < Co; ++co) {
      double acc = 0.0;
      const T* g = upstream.data() + static_cast<long>(co) * Ho * Wo;
      for (long i = 0; i < static_cast<long>(Ho) * Wo; ++i) acc += static_cast<double>(g[i]);
      (*grad_bias)[co] = static_cast<T>(acc);
    }
  }
}

template <typename T>
void conv3d_vjp(const TensorT<T>& input, const TensorT<T>& kernel, const TensorT<T>& upstream,
                int stride, int pad, TensorT<T>* grad_input, TensorT<T>* grad_kernel,
                TensorT<T>* grad_bias) {
  const int Ci = input.dim(0), D = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int Co = kernel.dim(0), k = kernel.dim(2);
  const int Do = upstream.dim(1), Ho = upstream.dim(2), Wo = upstream.dim(3);
  std::vector<double> gi;
  if (grad_input) gi.assign(static_cast<size_t>(input.numel()), 0.0);
  if (grad_kernel) *grad_kernel = TensorT<T>(kernel.shape());
  const long in_sl = static_cast<long>(D) * H * W;
  const long up_sl = static_cast<long>(Do) * Ho * Wo;
  for (int co = 0; co < Co; ++co) {
    const T* g = upstream.data() + co * up_sl;
    for (int ci = 0; ci < Ci; ++ci) {
      const T* in = input.data() + ci * in_sl;
      double* gin = grad_input ? gi.data() + ci * in_sl : nullptr;
      for (int kz = 0; kz < k; ++kz)
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) {
            const double wv = kernel.at(co, ci, kz, ky, kx);
            double wacc = 0.0;
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
                const T* grow = g + (static_cast<long>(oz) * Ho + oy) * Wo;
                const long ibase = (static_cast<long>(iz) * H + iy) * W + kx - pad;
                if (grad_kernel) {
                  const T* irow = in + ibase;
                  for (int ox = ox0; ox <= ox1; ++ox)
                    wacc += static_cast<double>(grow[ox]) * static_cast<double>(irow[ox * stride]);
                }
                if (gin) {
                  double* girow = gin + ibase;
                  for (int ox = ox0; ox <= ox1; ++ox)
                    girow[ox * stride] += wv * static_cast<double>(grow[ox]);
                }
              }
            }
            if (grad_kernel) grad_kernel->at(co, ci, kz, ky, kx) = static_cast<T>(wacc);
          }
    }
  }
  if (grad_input) {
    *grad_input = TensorT<T>(input.shape());
    for (long i = 0; i < input.numel(); ++i) (*grad_input)[i] = static_cast<T>(gi[static_cast<size_t>(i)]);
  }
  if (grad_bias) {
    *grad_bias = TensorT<T>({Co});
    for (int co = 0; co < Co; ++co) {
      double acc = 0.0;
      const T* g = upstream.data() + co * up_sl;
      for (long i = 0; i < up_sl; ++i) acc += static_cast<double>(g[i]);
      (*grad_bias)[co] = static_cast<T>(acc);
    }
  }
}

// ---- name-dispatched forward/backward ----
//
// Inputs are positional; `needs` marks which input gradients to compute
// (empty means all). Unknown names raise UnsupportedOperation.

template <typename T>
TensorT<T> op_forward(const std::string& op, std::span<const TensorT<T>* const> in,
                      const OpAttrs& a) {
  auto arity = [&](size_t n) {
    check_arg(in.size() == n, op + ": expected " + std::to_string(n) + " inputs");
  };
  if (op == "grid_coords") {
    arity(0);
    return grid_coords<T>(a.depth, a.height, a.width);
  }
  if (op == "trilinear_sample") { arity(2); return trilinear_sample(*in[0], *in[1]); }
  if (op == "softmax") { arity(1); return softmax(*in[0], a.axis); }
  if (op == "conv2d") { arity(3); return conv2d(*in[0], *in[1], *in[2], a.stride, a.pad); }
  if (op == "conv3d") { arity(3); return conv3d(*in[0], *in[1], *in[2], a.stride, a.pad); }
  if (op == "matmul") { arity(2); return matmul(*in[0], *in[1]); }
  if (op == "add") { arity(2); return add(*in[0], *in[1]); }
  if (op == "sub") { arity(2); return sub(*in[0], *in[1]); }
  if (op == "mul") { arity(2); return mul(*in[0], *in[1]); }
  if (op == "affine") { arity(1); return affine(*in[0], a.alpha, a.beta); }
  if (op == "sigmoid") { arity(1); return sigmoid(*in[0]); }
  if (op == "tanh") { arity(1); return tanh_op(*in[0]); }
  if (op == "exp") { arity(1); return exp_op(*in[0]); }
  if (op == "relu") { arity(1); return relu(*in[0]); }
  if (op == "leaky_relu") { arity(1); return leaky_relu(*in[0], a.alpha); }
  if (op == "mean") { arity(1); return mean(*in[0]); }
  if (op == "l1") { arity(2); return l1_loss(*in[0], *in[1]); }
  if (op == "spatial_mean") { arity(1); return spatial_mean(*in[0]); }
  if (op == "upsample2x") { arity(1); return upsample2x(*in[0]); }
  if (op == "pyr_down") { arity(1); return pyr_down(*in[0]); }
  if (op == "bcast_mul") { arity(2); return bcast_mul(*in[0], *in[1]); }
  if (op == "tokens_from_chw") { arity(1); return tokens_from_chw(*in[0]); }
  if (op == "chw_from_tokens") { arity(1); return chw_from_tokens(*in[0], a.height, a.width); }
  if (op == "candidate_flows") { arity(2); return candidate_flows(*in[0], *in[1], a.depth, a.height, a.width); }
  if (op == "flow_combine") { arity(2); return flow_combine(*in[0], *in[1]); }
  if (op == "gaussian_heatmap") { arity(1); return gaussian_heatmap(*in[0], a.depth, a.height, a.width, a.sigma2); }
  if (op == "concat") {
    std::vector<const TensorT<T>*> parts(in.begin(), in.end());
    return concat_ch(parts);
  }
  if (op == "euler_rot") { arity(1); return euler_rot(*in[0]); }
  if (op == "scalar_mul") { arity(2); return scalar_mul(*in[0], *in[1]); }
  if (op == "add_rows") { arity(2); return add_rows(*in[0], *in[1]); }
  if (op == "transpose") { arity(1); return transpose2d(*in[0]); }
  if (op == "slice0") { arity(1); return slice0(*in[0], a.axis); }
  throw UnsupportedOperation("unknown op: " + op);
}

template <typename T>
std::vector<TensorT<T>> op_backward(const std::string& op, std::span<const TensorT<T>* const> in,
                                    const OpAttrs& a, const TensorT<T>& up,
                                    std::span<const bool> needs = {}) {
  auto need = [&](size_t i) { return needs.empty() || (i < needs.size() && needs[i]); };
  std::vector<TensorT<T>> g(in.size());

  if (op == "grid_coords") return g;
  if (op == "trilinear_sample") {
    trilinear_sample_vjp(*in[0], *in[1], up, need(0) ? &g[0] : nullptr, need(1) ? &g[1] : nullptr);
    return g;
  }
  if (op == "softmax") {
    if (need(0)) g[0] = softmax_vjp(*in[0], a.axis, up);
    return g;
  }
  if (op == "conv2d") {
    conv2d_vjp(*in[0], *in[1], up, a.stride, a.pad, need(0) ? &g[0] : nullptr,
               need(1) ? &g[1] : nullptr, need(2) ? &g[2] : nullptr);
    return g;
  }
  if (op == "conv3d") {
    conv3d_vjp(*in[0], *in[1], up, a.stride, a.pad, need(0) ? &g[0] : nullptr,
               need(1) ? &g[1] : nullptr, need(2) ? &g[2] : nullptr);
    return g;
  }
  if (op == "matmul") {
    if (need(0)) g[0] = matmul(up, transpose2d(*in[1]));
    if (need(1)) g[1] = matmul(transpose2d(*in[0]), up);
    return g;
  }
  if (op == "add") {
    if (need(0)) g[0] = up;
    if (need(1)) g[1] = up;
    return g;
  }
  if (op == "sub") {
    if (need(0)) g[0] = up;
    if (need(1)) g[1] = affine(up, -1.0, 0.0);
    return g;
  }
  if (op == "mul") {
    if (need(0)) g[0] = mul(up, *in[1]);
    if (need(1)) g[1] = mul(up, *in[0]);
    return g;
  }
  if (op == "affine") {
    if (need(0)) g[0] = affine(up, a.alpha, 0.0);
    return g;
  }
  if (op == "sigmoid") {
    if (need(0)) {
      const TensorT<T> y = sigmoid(*in[0]);
      g[0] = TensorT<T>(y.shape());
      for (long i = 0; i < y.numel(); ++i)
        g[0][i] = static_cast<T>(static_cast<double>(up[i]) * y[i] * (1.0 - y[i]));
    }
    return g;
  }
  if (op == "tanh") {
    if (need(0)) {
      const TensorT<T> y = tanh_op(*in[0]);
      g[0] = TensorT<T>(y.shape());
      for (long i = 0; i < y.numel(); ++i)
        g[0][i] = static_cast<T>(static_cast<double>(up[i]) * (1.0 - static_cast<double>(y[i]) * y[i]));
    }
    return g;
  }
  if (op == "exp") {
    if (need(0)) {
      g[0] = TensorT<T>(in[0]->shape());
      for (long i = 0; i < g[0].numel(); ++i)
        g[0][i] = static_cast<T>(static_cast<double>(up[i]) * std::exp(static_cast<double>((*in[0])[i])));
    }
    return g;
  }
  if (op == "relu") {
    if (need(0)) {
      g[0] = TensorT<T>(in[0]->shape());
      for (long i = 0; i < g[0].numel(); ++i) g[0][i] = (*in[0])[i] > T(0) ? up[i] : T(0);
    }
    return g;
  }
  if (op == "leaky_relu") {
    if (need(0)) {
      g[0] = TensorT<T>(in[0]->shape());
      for (long i = 0; i < g[0].numel(); ++i)
        g[0][i] = (*in[0])[i] > T(0) ? up[i] : static_cast<T>(a.alpha * up[i]);
    }
    return g;
  }
  if (op == "mean") {
    if (need(0)) {
      const double s = static_cast<double>(up[0]) / static_cast<double>(in[0]->numel());
      g[0] = TensorT<T>::full(in[0]->shape(), static_cast<T>(s));
    }
    return g;
  }
  if (op == "l1") {
    const double s = static_cast<double>(up[0]) / static_cast<double>(in[0]->numel());
    for (size_t which = 0; which < 2; ++which) {
      if (!need(which)) continue;
      g[which] = TensorT<T>(in[0]->shape());
      for (long i = 0; i < g[which].numel(); ++i) {
        const double d = static_cast<double>((*in[0])[i]) - static_cast<double>((*in[1])[i]);
        const double sg = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        g[which][i] = static_cast<T>((which == 0 ? sg : -sg) * s);
      }
    }
    return g;
  }
  if (op == "spatial_mean") {
    if (need(0)) {
      const int C = in[0]->dim(0);
      const long inner = in[0]->numel() / C;
      g[0] = TensorT<T>(in[0]->shape());
      for (int c = 0; c < C; ++c) {
        const T v = static_cast<T>(static_cast<double>(up[c]) / static_cast<double>(inner));
        for (long i = 0; i < inner; ++i) g[0][c * inner + i] = v;
      }
    }
    return g;
  }
  if (op == "upsample2x") {
    if (need(0)) {
      const int C = in[0]->dim(0), H = in[0]->dim(1), W = in[0]->dim(2);
      g[0] = TensorT<T>(in[0]->shape());
      for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx)
                acc += static_cast<double>(up[(static_cast<long>(c) * 2 * H + 2 * y + dy) * 2 * W + 2 * x + dx]);
            g[0][(static_cast<long>(c) * H + y) * W + x] = static_cast<T>(acc);
          }
    }
    return g;
  }
  if (op == "pyr_down") {
    if (need(0)) {
      const int C = in[0]->dim(0), H = in[0]->dim(1), W = in[0]->dim(2);
      const int Ho = H / 2, Wo = W / 2;
      static const double k5[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
      std::vector<double> gi(static_cast<size_t>(in[0]->numel()), 0.0);
      for (int c = 0; c < C; ++c) {
        double* gslice = gi.data() + static_cast<long>(c) * H * W;
        for (int oy = 0; oy < Ho; ++oy)
          for (int ox = 0; ox < Wo; ++ox) {
            const double u = up[(static_cast<long>(c) * Ho + oy) * Wo + ox];
            for (int dy = 0; dy < 5; ++dy) {
              const int iy = std::clamp(2 * oy + dy - 2, 0, H - 1);
              for (int dx = 0; dx < 5; ++dx) {
                const int ix = std::clamp(2 * ox + dx - 2, 0, W - 1);
                gslice[static_cast<long>(iy) * W + ix] += k5[dy] * k5[dx] * u;
              }
            }
          }
      }
      g[0] = TensorT<T>(in[0]->shape());
      for (long i = 0; i < g[0].numel(); ++i) g[0][i] = static_cast<T>(gi[static_cast<size_t>(i)]);
    }
    return g;
  }
  if (op == "bcast_mul") {
    const int C = in[1]->dim(0);
    const long hw = static_cast<long>(in[1]->dim(1)) * in[1]->dim(2);
    if (need(0)) {
      g[0] = TensorT<T>(in[0]->shape());
      for (long i = 0; i < hw; ++i) {
        double acc = 0.0;
        for (int c = 0; c < C; ++c)
          acc += static_cast<double>(up[c * hw + i]) * static_cast<double>((*in[1])[c * hw + i]);
        g[0][i] = static_cast<T>(acc);
      }
    }
    if (need(1)) {
      g[1] = TensorT<T>(in[1]->shape());
      for (int c = 0; c < C; ++c)
        for (long i = 0; i < hw; ++i) g[1][c * hw + i] = (*in[0])[i] * up[c * hw + i];
    }
    return g;
  }
  if (op == "tokens_from_chw") {
    if (need(0)) g[0] = chw_from_tokens(up, in[0]->dim(1), in[0]->dim(2));
    return g;
  }
  if (op == "chw_from_tokens") {
    if (need(0)) g[0] = tokens_from_chw(up);
    return g;
  }
  if (op == "candidate_flows") {
    const int K = in[0]->dim(0);
    const long nv = static_cast<long>(a.depth) * a.height * a.width;
    for (size_t which = 0; which < 2; ++which) {
      if (!need(which)) continue;
      g[which] = TensorT<T>({K, 3});
      for (int k = 0; k < K; ++k)
        for (int axd = 0; axd < 3; ++axd) {
          double acc = 0.0;
          const T* u = up.data() + (static_cast<long>(k + 1) * nv) * 3 + axd;
          for (long v = 0; v < nv; ++v) acc += static_cast<double>(u[v * 3]);
          g[which][k * 3 + axd] = static_cast<T>(which == 0 ? acc : -acc);
        }
    }
    return g;
  }
  if (op == "flow_combine") {
    const int K1 = in[0]->dim(0);
    const long nv = in[0]->numel() / K1;
    if (need(0)) {
      g[0] = TensorT<T>(in[0]->shape());
      for (int k = 0; k < K1; ++k)
        for (long v = 0; v < nv; ++v) {
          double acc = 0.0;
          for (int axd = 0; axd < 3; ++axd)
            acc += static_cast<double>(up[v * 3 + axd]) * static_cast<double>((*in[1])[(k * nv + v) * 3 + axd]);
          g[0][k * nv + v] = static_cast<T>(acc);
        }
    }
    if (need(1)) {
      g[1] = TensorT<T>(in[1]->shape());
      for (int k = 0; k < K1; ++k)
        for (long v = 0; v < nv; ++v)
          for (int axd = 0; axd < 3; ++axd)
            g[1][(k * nv + v) * 3 + axd] = (*in[0])[k * nv + v] * up[v * 3 + axd];
    }
    return g;
  }
  if (op == "gaussian_heatmap") {
    if (need(0)) {
      const int K = in[0]->dim(0);
      const TensorT<T> h = gaussian_heatmap(*in[0], a.depth, a.height, a.width, a.sigma2);
      const double inv = 1.0 / a.sigma2;
      g[0] = TensorT<T>({K, 3});
      for (int k = 0; k < K; ++k) {
        double gx = 0.0, gy = 0.0, gz = 0.0;
        long i = static_cast<long>(k) * a.depth * a.height * a.width;
        for (int z = 0; z < a.depth; ++z) {
          const double cz = detail::axis_coord(z, a.depth);
          for (int y = 0; y < a.height; ++y) {
            const double cy = detail::axis_coord(y, a.height);
            for (int x = 0; x < a.width; ++x, ++i) {
              const double cx = detail::axis_coord(x, a.width);
              const double scale = static_cast<double>(up[i]) * static_cast<double>(h[i]) * inv;
              gx += scale * (cx - (*in[0])[k * 3 + 0]);
              gy += scale * (cy - (*in[0])[k * 3 + 1]);
              gz += scale * (cz - (*in[0])[k * 3 + 2]);
            }
          }
        }
        g[0][k * 3 + 0] = static_cast<T>(gx);
        g[0][k * 3 + 1] = static_cast<T>(gy);
        g[0][k * 3 + 2] = static_cast<T>(gz);
      }
    }
    return g;
  }
  if (op == "concat") {
    long off = 0;
    for (size_t i = 0; i < in.size(); ++i) {
      if (need(i)) {
        g[i] = TensorT<T>(in[i]->shape());
        std::copy(up.data() + off, up.data() + off + in[i]->numel(), g[i].data());
      }
      off += in[i]->numel();
    }
    return g;
  }
  if (op == "euler_rot") {
    if (need(0)) {
      double rz[9], ry[9], rx[9], dz[9], dy[9], dx[9], t1[9], t2[9];
      detail::rot_z((*in[0])[2], rz, false);
      detail::rot_y((*in[0])[0], ry, false);
      detail::rot_x((*in[0])[1], rx, false);
      detail::rot_z((*in[0])[2], dz, true);
      detail::rot_y((*in[0])[0], dy, true);
      detail::rot_x((*in[0])[1], dx, true);
      g[0] = TensorT<T>(in[0]->shape());
      auto dot_up = [&](const double a[9], const double b[9]) {
        double m[9], acc = 0.0;
        detail::mat3_mul(a, b, m);
        for (int i = 0; i < 9; ++i) acc += static_cast<double>(up[i]) * m[i];
        return acc;
      };
      detail::mat3_mul(rz, dy, t1);
      g[0][0] = static_cast<T>(dot_up(t1, rx));  // yaw
      detail::mat3_mul(rz, ry, t2);
      g[0][1] = static_cast<T>(dot_up(t2, dx));  // pitch
      detail::mat3_mul(dz, ry, t1);
      g[0][2] = static_cast<T>(dot_up(t1, rx));  // roll
    }
    return g;
  }
  if (op == "scalar_mul") {
    if (need(0)) {
      double acc = 0.0;
      for (long i = 0; i < up.numel(); ++i)
        acc += static_cast<double>(up[i]) * static_cast<double>((*in[1])[i]);
      g[0] = TensorT<T>::full(in[0]->shape(), static_cast<T>(acc));
    }
    if (need(1)) g[1] = scalar_mul(*in[0], up);
    return g;
  }
  if (op == "add_rows") {
    if (need(0)) g[0] = up;
    if (need(1)) {
      const int n = in[0]->dim(0), m = in[0]->dim(1);
      g[1] = TensorT<T>(in[1]->shape());
      for (int j = 0; j < m; ++j) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += static_cast<double>(up[static_cast<long>(i) * m + j]);
        g[1][j] = static_cast<T>(acc);
      }
    }
    return g;
  }
  if (op == "transpose") {
    if (need(0)) g[0] = transpose2d(up);
    return g;
  }
  if (op == "slice0") {
    if (need(0)) {
      g[0] = TensorT<T>(in[0]->shape());
      std::copy(up.data(), up.data() + up.numel(), g[0].data() + static_cast<long>(a.axis) * up.numel());
    }
    return g;
  }
  throw UnsupportedOperation("unknown op: " + op);
}

}  // namespace synwarp::ops
