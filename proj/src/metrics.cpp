#include "snnsir/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace snnsir {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_window() {
  std::vector<double> g(kWin);
  const int half = kWin / 2;
  double sum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - half;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Separable valid-region Gaussian filter on one plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int64_t h, int64_t w,
                                 const std::vector<double>& g) {
  const int64_t vh = h - kWin + 1, vw = w - kWin + 1;
  std::vector<double> rows(static_cast<size_t>(h * vw), 0.0);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < vw; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWin; ++k) acc += g[k] * plane[y * w + x + k];
      rows[y * vw + x] = acc;
    }
  }
  std::vector<double> out(static_cast<size_t>(vh * vw), 0.0);
  for (int64_t y = 0; y < vh; ++y) {
    for (int64_t x = 0; x < vw; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWin; ++k) acc += g[k] * rows[(y + k) * vw + x];
      out[y * vw + x] = acc;
    }
  }
  return out;
}

std::vector<double> clipped(const Tensor& t) {
  std::vector<double> v(t.data().begin(), t.data().end());
  for (double& x : v) x = std::clamp(x, 0.0, 1.0);
  return v;
}

}  // namespace

double mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mse: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  const std::vector<double> av = clipped(a), bv = clipped(b);
  double acc = 0.0;
  for (size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    acc += d * d;
  }
  return av.empty() ? 0.0 : acc / static_cast<double>(av.size());
}

double psnr(const Tensor& a, const Tensor& b) {
  const double m = mse(a, b);
  if (m < 1e-10) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / m));
}

double ssim(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("ssim: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  if (a.ndim() != 3) throw ShapeError("ssim: expected [C,H,W] images");
  const int64_t c = a.dim(0), h = a.dim(1), w = a.dim(2);
  if (h < kWin || w < kWin) {
    throw ShapeError("ssim: image smaller than the 11x11 window");
  }
  static const std::vector<double> g = gaussian_window();
  const std::vector<double> av = clipped(a), bv = clipped(b);
  const int64_t plane = h * w;
  const int64_t vh = h - kWin + 1, vw = w - kWin + 1;
  double total = 0.0;
  for (int64_t ch = 0; ch < c; ++ch) {
    std::vector<double> x(av.begin() + ch * plane, av.begin() + (ch + 1) * plane);
    std::vector<double> y(bv.begin() + ch * plane, bv.begin() + (ch + 1) * plane);
    std::vector<double> xx(x.size()), yy(y.size()), xy(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, g);
    const auto my = filter_valid(y, h, w, g);
    const auto mxx = filter_valid(xx, h, w, g);
    const auto myy = filter_valid(yy, h, w, g);
    const auto mxy = filter_valid(xy, h, w, g);
    double acc = 0.0;
    for (int64_t i = 0; i < vh * vw; ++i) {
      const double sx = mxx[i] - mx[i] * mx[i];
      const double sy = myy[i] - my[i] * my[i];
      const double sxy = mxy[i] - mx[i] * my[i];
      const double num = (2.0 * mx[i] * my[i] + kC1) * (2.0 * sxy + kC2);
      const double den = (mx[i] * mx[i] + my[i] * my[i] + kC1) * (sx + sy + kC2);
      acc += num / den;
    }
    total += acc / static_cast<double>(vh * vw);
  }
  return total / static_cast<double>(c);
}

double psnr_pair(const StereoPair& a, const StereoPair& b) {
  return 0.5 * (psnr(a.left, b.left) + psnr(a.right, b.right));
}

double ssim_pair(const StereoPair& a, const StereoPair& b) {
  return 0.5 * (ssim(a.left, b.left) + ssim(a.right, b.right));
}

}  // namespace snnsir
