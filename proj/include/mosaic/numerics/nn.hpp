#pragma once

#include <string>

#include "mosaic/numerics/ops.hpp"
#include "mosaic/numerics/parameter_store.hpp"

namespace mosaic::nn {

// y = x W + b with W: in x out and b: 1 x out.
struct Linear {
  Tensor weight;
  Tensor bias;

  Tensor operator()(const Tensor& x) const { return ops::add_row(ops::matmul(x, weight), bias); }
};

Linear make_linear(ParameterStore& store, const std::string& name, std::size_t in,
                   std::size_t out, InitSpec weight_init);

// LN(x) * (1 + scale) + shift with scale/shift as single rows.
Tensor modulate(const Tensor& x, const Tensor& shift, const Tensor& scale);

// softmax(Q K^T / sqrt(d_k)) V followed by the output projection. When the
// projection is zero-initialized the result is exactly zero.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Linear& out_proj,
                 std::size_t heads);

// Two-layer GELU feed-forward.
struct FeedForward {
  Linear in;
  Linear out;

  Tensor operator()(const Tensor& x) const { return out(ops::gelu(in(x))); }
};

FeedForward make_feed_forward(ParameterStore& store, const std::string& name, std::size_t width,
                              std::size_t hidden, InitSpec in_init, InitSpec out_init);

// Splits a 1 x (n*width) row into n rows of width `width`.
std::vector<Tensor> chunk_row(const Tensor& row, std::size_t n);

}  // namespace mosaic::nn
