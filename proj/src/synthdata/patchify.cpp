#include "mosaic/synthdata/patchify.hpp"

#include "mosaic/numerics/tape.hpp"

namespace mosaic::synth {
namespace {

// Index map from image position (r, c) to flat token-grid position.
std::vector<std::size_t> token_index(std::size_t h, std::size_t w, std::size_t p) {
  const std::size_t gw = w / p;
  std::vector<std::size_t> idx(h * w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c)
      idx[r * w + c] = ((r / p) * gw + c / p) * p * p + (r % p) * p + c % p;
  return idx;
}

// out[dst[i]] = in[i] (scatter) or out[i] = in[src[i]] (gather), differentiable.
Tensor permute(const Tensor& x, Shape shape, std::vector<std::size_t> idx, bool scatter) {
  const auto src = x.data();
  std::vector<double> out(src.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (scatter)
      out[idx[i]] = src[i];
    else
      out[i] = src[idx[i]];
  }
  auto px = x.impl();
  return make_result(std::move(shape), std::move(out), {x},
                     [px, idx = std::move(idx), scatter](TensorImpl& o) {
                       px->ensure_grad();
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                         if (scatter)
                           px->grad[i] += o.grad[idx[i]];
                         else
                           px->grad[idx[i]] += o.grad[i];
                       }
                     });
}

}  // namespace

Tensor patchify(const Tensor& image, std::size_t p) {
  if (image.rank() != 2) throw ShapeError("patchify expects a 2-D map");
  const std::size_t h = image.dim(0), w = image.dim(1);
  if (p == 0 || h % p != 0 || w % p != 0)
    throw ShapeError("extents " + shape_str(image.shape()) + " not divisible by patch " +
                     std::to_string(p));
  const std::size_t m = (h / p) * (w / p);
  return permute(image, {m, p * p}, token_index(h, w, p), true);
}

Tensor unpatchify(const Tensor& tokens, std::size_t h, std::size_t w, std::size_t p) {
  if (p == 0 || h % p != 0 || w % p != 0) throw ShapeError("unpatchify: extents not divisible");
  const std::size_t m = (h / p) * (w / p);
  if (tokens.rows() != m || tokens.cols() != p * p)
    throw ShapeError("unpatchify: token grid " + shape_str(tokens.shape()) + " does not fit");
  return permute(tokens, {h, w}, token_index(h, w, p), false);
}

}  // namespace mosaic::synth
