#include "mosaic/numerics/nn.hpp"

namespace mosaic::nn {

Linear make_linear(ParameterStore& store, const std::string& name, std::size_t in,
                   std::size_t out, InitSpec weight_init) {
  return {store.add(name + ".w", {in, out}, weight_init),
          store.add(name + ".b", {1, out}, InitSpec::zero())};
}

Tensor modulate(const Tensor& x, const Tensor& shift, const Tensor& scale) {
  return ops::add_row(ops::mul_row(ops::layer_norm(x), ops::add_scalar(scale, 1.0)), shift);
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Linear& out_proj,
                 std::size_t heads) {
  return out_proj(ops::scaled_dot_product_attention(q, k, v, heads));
}

FeedForward make_feed_forward(ParameterStore& store, const std::string& name, std::size_t width,
                              std::size_t hidden, InitSpec in_init, InitSpec out_init) {
  return {make_linear(store, name + ".in", width, hidden, in_init),
          make_linear(store, name + ".out", hidden, width, out_init)};
}

std::vector<Tensor> chunk_row(const Tensor& row, std::size_t n) {
  const std::size_t total = row.cols();
  if (n == 0 || total % n != 0) throw ShapeError("chunk_row: width not divisible");
  const std::size_t w = total / n;
  std::vector<Tensor> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(ops::slice_cols(row, i * w, w));
  return out;
}

}  // namespace mosaic::nn
