#pragma once

#include <complex>
#include <span>
#include <vector>

#include "mosaic/numerics/tensor.hpp"

namespace mosaic {

// Complex values over a shape whose last two extents form the transform grid.
struct ComplexGrid {
  Shape shape;
  std::vector<std::complex<double>> values;

  std::size_t height() const { return shape[shape.size() - 2]; }
  std::size_t width() const { return shape.back(); }
};

bool is_power_of_two(std::size_t n);

// In-place radix-2 transform; the inverse includes the 1/n factor.
void fft_inplace(std::span<std::complex<double>> data, bool inverse);

// 2-D transforms over the last two extents (each a power of two); leading
// extents are batch dimensions. The inverse is normalized by 1/(H*W).
ComplexGrid fft2(const Tensor& x);
ComplexGrid fft2(const ComplexGrid& x);
ComplexGrid ifft2(const ComplexGrid& x);
Tensor real_part(const ComplexGrid& x);

}  // namespace mosaic
