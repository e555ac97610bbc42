#include "mosaic/numerics/fft.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace mosaic {
namespace {

void check_grid(const Shape& shape) {
  if (shape.size() < 2) throw ShapeError("fft2 needs at least two dimensions");
  const auto h = shape[shape.size() - 2], w = shape.back();
  if (!is_power_of_two(h) || !is_power_of_two(w)) {
    throw ShapeError("fft2 extents must be powers of two, got " + shape_str(shape));
  }
}

ComplexGrid transform2(ComplexGrid g, bool inverse) {
  check_grid(g.shape);
  const std::size_t h = g.height(), w = g.width(), plane = h * w;
  const std::size_t batch = g.values.size() / plane;
  std::vector<std::complex<double>> column(h);
  for (std::size_t b = 0; b < batch; ++b) {
    auto* base = g.values.data() + b * plane;
    for (std::size_t r = 0; r < h; ++r) fft_inplace({base + r * w, w}, inverse);
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t r = 0; r < h; ++r) column[r] = base[r * w + c];
      fft_inplace(column, inverse);
      for (std::size_t r = 0; r < h; ++r) base[r * w + c] = column[r];
    }
  }
  return g;
}

}  // namespace

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_inplace(std::span<std::complex<double>> data, bool inverse) {
  const std::size_t n = data.size();
  if (!is_power_of_two(n)) throw ShapeError("fft length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        // Twiddles from cos/sin directly rather than a running product keeps
        // the round-trip error near machine precision.
        const std::complex<double> wk(std::cos(ang * static_cast<double>(k)),
                                      std::sin(ang * static_cast<double>(k)));
        const auto u = data[i + k];
        const auto v = data[i + k + len / 2] * wk;
        data[i + k] = u + v;
        data[i + k + len / 2] = u - v;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& x : data) x *= inv;
  }
}

ComplexGrid fft2(const Tensor& x) {
  ComplexGrid g{x.shape(), {}};
  g.values.reserve(x.size());
  for (double v : x.data()) g.values.emplace_back(v, 0.0);
  return transform2(std::move(g), false);
}

ComplexGrid fft2(const ComplexGrid& x) { return transform2(x, false); }

ComplexGrid ifft2(const ComplexGrid& x) { return transform2(x, true); }

Tensor real_part(const ComplexGrid& x) {
  std::vector<double> v(x.values.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = x.values[i].real();
  return Tensor(x.shape, std::move(v));
}

}  // namespace mosaic
