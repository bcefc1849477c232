#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "synwarp/tensor.hpp"

// Reenactment quality metrics: L1, PSNR, single-scale SSIM, and the
// frame-difference temporal-consistency substitute.

namespace synwarp {

inline double l1_metric(const Tensor& a, const Tensor& b) {
  check_arg(a.shape() == b.shape(), "l1_metric: shape mismatch");
  double acc = 0.0;
  for (long i = 0; i < a.numel(); ++i) acc += std::fabs(static_cast<double>(a[i]) - b[i]);
  return acc / static_cast<double>(a.numel());
}

// 10*log10(1/MSE) with unit dynamic range; identical images give +infinity.
inline double psnr(const Tensor& a, const Tensor& b) {
  check_arg(a.shape() == b.shape(), "psnr: shape mismatch");
  double mse = 0.0;
  for (long i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.numel());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace metric_detail {
inline std::vector<double> grayscale(const Tensor& img) {
  check_arg(img.rank() == 3 && img.dim(0) == 3, "ssim: image must be 3 x H x W");
  const long plane = static_cast<long>(img.dim(1)) * img.dim(2);
  std::vector<double> g(static_cast<size_t>(plane));
  for (long i = 0; i < plane; ++i)
    g[static_cast<size_t>(i)] =
        (static_cast<double>(img[i]) + img[plane + i] + img[2 * plane + i]) / 3.0;
  return g;
}
inline std::vector<double> ssim_window() {
  std::vector<double> w(121);
  double sum = 0.0;
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 11; ++x) {
      const double dy = y - 5, dx = x - 5;
      w[static_cast<size_t>(y * 11 + x)] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
      sum += w[static_cast<size_t>(y * 11 + x)];
    }
  for (double& v : w) v /= sum;
  return w;
}
}  // namespace metric_detail

// Single-scale SSIM on the channel-mean image: 11x11 Gaussian window with
// sigma 1.5, C1=(0.01)^2, C2=(0.03)^2, averaged over valid window positions.
inline double ssim(const Tensor& a, const Tensor& b) {
  check_arg(a.shape() == b.shape(), "ssim: shape mismatch");
  const int H = a.dim(1), W = a.dim(2);
  check_arg(H >= 11 && W >= 11, "ssim: image smaller than the 11x11 window");
  const std::vector<double> ga = metric_detail::grayscale(a), gb = metric_detail::grayscale(b);
  static const std::vector<double> win = metric_detail::ssim_window();
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  long count = 0;
  for (int y = 0; y + 11 <= H; ++y)
    for (int x = 0; x + 11 <= W; ++x) {
      double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
      for (int wy = 0; wy < 11; ++wy)
        for (int wx = 0; wx < 11; ++wx) {
          const double wv = win[static_cast<size_t>(wy * 11 + wx)];
          const double va = ga[static_cast<size_t>((y + wy) * W + x + wx)];
          const double vb = gb[static_cast<size_t>((y + wy) * W + x + wx)];
          mx += wv * va;
          my += wv * vb;
          mxx += wv * va * va;
          myy += wv * vb * vb;
          mxy += wv * va * vb;
        }
      const double vx = mxx - mx * mx, vy = myy - my * my, cov = mxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cov + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return total / static_cast<double>(count);
}

// Mean over t of |L1(pred_t, pred_{t-1}) - L1(gt_t, gt_{t-1})|: how far the
// predicted frame-to-frame change drifts from the true change. Lower is
// better.
inline double temporal_consistency(const std::vector<Tensor>& pred,
                                   const std::vector<Tensor>& gt) {
  check_arg(pred.size() == gt.size(), "temporal_consistency: length mismatch");
  check_arg(pred.size() >= 2, "temporal_consistency: need at least 2 frames");
  double acc = 0.0;
  for (size_t t = 1; t < pred.size(); ++t)
    acc += std::fabs(l1_metric(pred[t], pred[t - 1]) - l1_metric(gt[t], gt[t - 1]));
  return acc / static_cast<double>(pred.size() - 1);
}

}  // namespace synwarp
