#pragma once

#include "mosaic/numerics/tensor.hpp"

namespace mosaic::evalcli {

inline constexpr std::size_t kSsimWindow = 8;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

// Mean SSIM over every 8x8 window (stride 1) of two equally shaped 2-D
// images on a unit dynamic range. Window statistics use population
// (1/N) moments. Throws ShapeError on mismatched or too small inputs.
double ssim(const Tensor& a, const Tensor& b);

}  // namespace mosaic::evalcli
