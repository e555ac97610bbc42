#pragma once

#include "mosaic/numerics/fft.hpp"

namespace mosaic::pipeline {

struct FourierOptions {
  double alpha = 1.0;
  // Disk radius around DC in frequency-index units. Negative: a quarter of
  // the Nyquist index (grid / 8).
  double cutoff = -1.0;

  double radius(std::size_t grid) const;
};

// M_low over an h x w spectrum: 1 where the wrapped frequency (fy, fx) lies in
// the disk of the given radius, else 0. Symmetric under (fy, fx) -> -(fy, fx).
std::vector<double> low_pass_mask(std::size_t h, std::size_t w, double radius);

struct Bands {
  ComplexGrid low;
  ComplexGrid high;
};

// Unscaled split f = M_low f + (1 - M_low) f.
Bands split_bands(const ComplexGrid& f, double radius);

// 1 / min(t, 2/3); exactly 1.5 once t >= 2/3.
double high_band_scale(double t);

// alpha * t * M_low f + (1 - M_low) f / min(t, 2/3) on every plane of f.
ComplexGrid correct_spectrum(const ComplexGrid& f, double t, const FourierOptions& opts);

// ifft2(alpha * t * M_low f + (1 - M_low) f / min(t, 2/3)), real part, for
// every leading batch index of x. Throws std::domain_error unless t is in (0, 1].
Tensor fourier_filter(const Tensor& x, double t, const FourierOptions& opts);

// Applies fourier_filter to an m x d control residual viewed as d channels on
// a grid x grid patch layout (row = gy * grid + gx). Differentiable; the
// filter is a real symmetric linear map so its adjoint is itself.
Tensor fourier_correct(const Tensor& residual, std::size_t grid, double t,
                       const FourierOptions& opts);

}  // namespace mosaic::pipeline
