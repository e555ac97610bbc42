#include "mosaic/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mosaic/numerics/tape.hpp"

namespace mosaic {

GradCheckResult grad_check_detail(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                                  double eps, std::size_t max_coords, Stencil stencil) {
  const bool was_tracked = x.requires_grad();
  x.set_requires_grad(true);
  x.zero_grad();
  Tape::current().clear();

  const Tensor y = f(x);
  if (y.size() != 1) {
    Tape::current().clear();
    x.set_requires_grad(was_tracked);
    throw ShapeError("grad_check needs a scalar-valued function, got shape " +
                     shape_str(y.shape()));
  }
  backward(y);
  std::vector<double> analytic(x.size(), 0.0);
  if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());
  x.zero_grad();

  // Coordinates whose true derivative is zero (a key bias under softmax, say)
  // would otherwise be judged on pure rounding noise.
  double scale = 0.0;
  for (double a : analytic) scale = std::max(scale, std::abs(a));
  const double floor = std::max(1e-8, 1e-5 * scale);

  GradCheckResult res;
  NoGradGuard guard;
  auto data = x.mutable_data();
  const std::size_t stride =
      max_coords == 0 || max_coords >= data.size() ? 1 : (data.size() + max_coords - 1) / max_coords;
  for (std::size_t i = 0; i < data.size(); i += stride) {
    const double orig = data[i];
    auto at = [&](double h) {
      data[i] = orig + h;
      const double v = f(x).item();
      data[i] = orig;
      return v;
    };
    const double numeric =
        stencil == Stencil::Central
            ? (at(eps) - at(-eps)) / (2.0 * eps)
            : (8.0 * (at(eps) - at(-eps)) - (at(2.0 * eps) - at(-2.0 * eps))) / (12.0 * eps);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), floor});
    const double err = std::abs(a - numeric) / denom;
    if (err > res.max_rel_error || i == 0) {
      res = {std::max(err, res.max_rel_error), i, a, numeric};
    }
  }
  x.set_requires_grad(was_tracked);
  return res;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps,
                  std::size_t max_coords, Stencil stencil) {
  return grad_check_detail(f, std::move(x), eps, max_coords, stencil).max_rel_error;
}

}  // namespace mosaic
