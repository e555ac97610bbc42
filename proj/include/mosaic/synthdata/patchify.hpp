#pragma once

#include "mosaic/numerics/tensor.hpp"

namespace mosaic::synth {

// H x W -> (H/p * W/p) x p^2, patches in row-major order, pixels within a
// patch row-major as well.
Tensor patchify(const Tensor& image, std::size_t p);
// Both are differentiable.
Tensor unpatchify(const Tensor& tokens, std::size_t height, std::size_t width, std::size_t p);

}  // namespace mosaic::synth
