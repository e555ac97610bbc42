#include "mosaic/pipeline/fourier.hpp"

#include <cmath>
#include <stdexcept>

#include "mosaic/numerics/tape.hpp"

namespace mosaic::pipeline {
namespace {

double wrapped(std::size_t k, std::size_t n) {
  return k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
}

void check_t(double t) {
  if (!(t > 0.0 && t <= 1.0)) throw std::domain_error("fourier_correct: t must be in (0, 1]");
}

// Shared by the forward value and the adjoint.
std::vector<double> filter_values(std::vector<double> x, std::size_t batch, std::size_t grid,
                                  double t, const FourierOptions& opts) {
  Tensor in({batch, grid, grid}, std::move(x));
  return fourier_filter(in, t, opts).to_vector();
}

}  // namespace

double FourierOptions::radius(std::size_t grid) const {
  return cutoff < 0.0 ? static_cast<double>(grid) / 8.0 : cutoff;
}

std::vector<double> low_pass_mask(std::size_t h, std::size_t w, double radius) {
  std::vector<double> mask(h * w, 0.0);
  for (std::size_t ky = 0; ky < h; ++ky)
    for (std::size_t kx = 0; kx < w; ++kx) {
      const double fy = wrapped(ky, h), fx = wrapped(kx, w);
      if (std::sqrt(fy * fy + fx * fx) <= radius) mask[ky * w + kx] = 1.0;
    }
  return mask;
}

Bands split_bands(const ComplexGrid& f, double radius) {
  const std::size_t h = f.height(), w = f.width(), plane = h * w;
  const auto mask = low_pass_mask(h, w, radius);
  Bands b{f, f};
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    if (mask[i % plane] != 0.0)
      b.high.values[i] = 0.0;
    else
      b.low.values[i] = 0.0;
  }
  return b;
}

double high_band_scale(double t) { return t >= 2.0 / 3.0 ? 1.5 : 1.0 / t; }

ComplexGrid correct_spectrum(const ComplexGrid& spectrum, double t, const FourierOptions& opts) {
  check_t(t);
  ComplexGrid f = spectrum;
  const std::size_t h = f.height(), w = f.width(), plane = h * w;
  const auto mask = low_pass_mask(h, w, opts.radius(w));
  const double low = opts.alpha * t, high = high_band_scale(t);
  for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] *= mask[i % plane] != 0.0 ? low : high;
  return f;
}

Tensor fourier_filter(const Tensor& x, double t, const FourierOptions& opts) {
  check_t(t);
  if (x.rank() < 2) throw ShapeError("fourier_filter: needs a 2-D grid");
  return real_part(ifft2(correct_spectrum(fft2(x), t, opts)));
}

Tensor fourier_correct(const Tensor& residual, std::size_t grid, double t,
                       const FourierOptions& opts) {
  check_t(t);
  const std::size_t m = grid * grid;
  if (residual.rank() != 2 || residual.rows() != m)
    throw ShapeError("fourier_correct: residual must be (grid*grid) x d, got " +
                     shape_str(residual.shape()));
  const std::size_t d = residual.cols();

  // m x d rows <-> d channel planes.
  auto to_planes = [m, d](std::span<const double> r) {
    std::vector<double> p(m * d);
    for (std::size_t pos = 0; pos < m; ++pos)
      for (std::size_t c = 0; c < d; ++c) p[c * m + pos] = r[pos * d + c];
    return p;
  };
  auto from_planes = [m, d](const std::vector<double>& p) {
    std::vector<double> r(m * d);
    for (std::size_t pos = 0; pos < m; ++pos)
      for (std::size_t c = 0; c < d; ++c) r[pos * d + c] = p[c * m + pos];
    return r;
  };

  auto out = from_planes(filter_values(to_planes(residual.data()), d, grid, t, opts));
  return make_result({m, d}, std::move(out), {residual},
                     [residual, grid, t, opts, d, to_planes, from_planes](TensorImpl& o) {
                       auto& in = *residual.impl();
                       if (!in.requires_grad) return;
                       in.ensure_grad();
                       const auto g =
                           from_planes(filter_values(to_planes(o.grad), d, grid, t, opts));
                       for (std::size_t i = 0; i < g.size(); ++i) in.grad[i] += g[i];
                     });
}

}  // namespace mosaic::pipeline
