#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "resdehaze/common.hpp"
#include "resdehaze/tensor.hpp"

namespace resdehaze {

// PSNR in dB for unit peak. Identical images return the cap instead of inf so
// the value aggregates in CSV.
template <typename S>
double psnr(const Tensor<S>& x, const Tensor<S>& y) {
  require_same_shape(x, y, "psnr");
  require(x.size() > 0, "psnr: empty image");
  double mse = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(x.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

namespace detail {
// 11x11 Gaussian window, sigma 1.5, normalized to sum 1.
inline const std::vector<double>& ssim_window() {
  static const std::vector<double> w = [] {
    std::vector<double> v(11 * 11);
    double sum = 0.0;
    for (int y = 0; y < 11; ++y)
      for (int x = 0; x < 11; ++x) {
        const double dy = y - 5, dx = x - 5;
        v[y * 11 + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
        sum += v[y * 11 + x];
      }
    for (double& e : v) e /= sum;
    return v;
  }();
  return w;
}
}  // namespace detail

// Mean structural similarity: 11x11 Gaussian window (sigma 1.5), stabilizers
// C1=(0.01)^2 and C2=(0.03)^2 on unit dynamic range, windows fully inside the
// image, computed per channel and averaged.
template <typename S>
double ssim(const Tensor<S>& x, const Tensor<S>& y) {
  require_same_shape(x, y, "ssim");
  require(x.h() >= 11 && x.w() >= 11, "ssim: image smaller than the 11x11 window");
  const auto& win = detail::ssim_window();
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  long count = 0;
  for (int ch = 0; ch < x.c(); ++ch) {
    for (int oy = 0; oy + 11 <= x.h(); ++oy) {
      for (int ox = 0; ox + 11 <= x.w(); ++ox) {
        double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
        for (int wy = 0; wy < 11; ++wy)
          for (int wx = 0; wx < 11; ++wx) {
            const double wgt = win[wy * 11 + wx];
            const double a = static_cast<double>(x(ch, oy + wy, ox + wx));
            const double b = static_cast<double>(y(ch, oy + wy, ox + wx));
            mx += wgt * a;
            my += wgt * b;
            mxx += wgt * a * a;
            myy += wgt * b * b;
            mxy += wgt * a * b;
          }
        const double vx = mxx - mx * mx;
        const double vy = myy - my * my;
        const double cxy = mxy - mx * my;
        total += ((2 * mx * my + c1) * (2 * cxy + c2)) /
                 ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace resdehaze
