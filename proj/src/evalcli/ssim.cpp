#include "mosaic/evalcli/ssim.hpp"

#include <vector>

namespace mosaic::evalcli {
namespace {

// Summed-area table with a zero border: s[(r+1)*(w+1) + c+1] = sum of v over [0,r] x [0,c].
std::vector<double> integral(const std::vector<double>& v, std::size_t h, std::size_t w) {
  std::vector<double> s((h + 1) * (w + 1), 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    double row = 0.0;
    for (std::size_t c = 0; c < w; ++c) {
      row += v[r * w + c];
      s[(r + 1) * (w + 1) + c + 1] = s[r * (w + 1) + c + 1] + row;
    }
  }
  return s;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || a.shape() != b.shape())
    throw ShapeError("ssim: images must be 2-D with equal shapes, got " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  const std::size_t h = a.dim(0), w = a.dim(1), k = kSsimWindow;
  if (h < k || w < k) throw ShapeError("ssim: image smaller than the window");

  const auto x = a.data(), y = b.data();
  std::vector<double> xv(x.begin(), x.end()), yv(y.begin(), y.end()), xx(h * w), yy(h * w), xy(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto sx = integral(xv, h, w), sy = integral(yv, h, w), sxx = integral(xx, h, w),
             syy = integral(yy, h, w), sxy = integral(xy, h, w);
  const std::size_t ws = w + 1;
  auto box = [&](const std::vector<double>& s, std::size_t r, std::size_t c) {
    return s[(r + k) * ws + c + k] - s[r * ws + c + k] - s[(r + k) * ws + c] + s[r * ws + c];
  };

  const double n = static_cast<double>(k * k);
  double total = 0.0;
  for (std::size_t r = 0; r + k <= h; ++r)
    for (std::size_t c = 0; c + k <= w; ++c) {
      const double mx = box(sx, r, c) / n, my = box(sy, r, c) / n;
      const double vx = box(sxx, r, c) / n - mx * mx;
      const double vy = box(syy, r, c) / n - my * my;
      const double cxy = box(sxy, r, c) / n - mx * my;
      total += ((2.0 * mx * my + kSsimC1) * (2.0 * cxy + kSsimC2)) /
               ((mx * mx + my * my + kSsimC1) * (vx + vy + kSsimC2));
    }
  return total / static_cast<double>((h - k + 1) * (w - k + 1));
}

}  // namespace mosaic::evalcli
