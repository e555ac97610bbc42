#pragma once

#include <functional>

#include "mosaic/numerics/tensor.hpp"

namespace mosaic {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

enum class Stencil {
  Central,   // (f(x+h) - f(x-h)) / 2h
  FivePoint  // fourth-order; tolerates a larger h, so less rounding noise
};

// Compares the reverse-mode gradient of the scalar f(x) with respect to x
// against finite differences of step eps. The error per coordinate is
// |a - n| / max(|a|, |n|, f), where f is 1e-5 times the largest analytic
// component (at least 1e-8). x must be a leaf that f reads; it is
// restored bit-exactly afterwards. Throws ShapeError when f is not scalar.
// With max_coords > 0 only that many evenly strided coordinates are probed.
GradCheckResult grad_check_detail(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                                  double eps = 1e-5, std::size_t max_coords = 0,
                                  Stencil stencil = Stencil::Central);

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps = 1e-5,
                  std::size_t max_coords = 0, Stencil stencil = Stencil::Central);

}  // namespace mosaic
