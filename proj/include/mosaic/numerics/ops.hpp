#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mosaic/numerics/tensor.hpp"

// Differentiable tensor operations. Matrix ops take rank-2 tensors (a rank-1
// tensor counts as one row). Element-wise ops require identical shapes; the
// *_row variants broadcast a single row across all rows.
namespace mosaic::ops {

constexpr double kLayerNormEps = 1e-6;

Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_row(const Tensor& x, const Tensor& row);
Tensor mul_row(const Tensor& x, const Tensor& row);
Tensor add_scalar(const Tensor& x, double s);
Tensor scale(const Tensor& x, double s);
// Multiplies row r by the constant factors[r].
Tensor mul_rows(const Tensor& x, std::span<const double> factors);

Tensor gelu(const Tensor& x);
// Normalizes the last axis to zero mean and unit variance (no scale/shift).
Tensor layer_norm(const Tensor& x, double eps = kLayerNormEps);
// axis < 0 counts from the end; supports rank 1 and 2.
Tensor softmax(const Tensor& x, int axis = -1);
// Entries whose keep flag is 0 are replaced by `fill` and receive no gradient.
Tensor masked_fill(const Tensor& x, std::span<const std::uint8_t> keep, double fill);

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor reshape(const Tensor& x, Shape shape);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Sum of squared entries.
Tensor sum_squares(const Tensor& x);

// Rows of `table` selected by ids.
Tensor embedding(const Tensor& table, std::span<const int> ids);

// Multi-head softmax(Q K^T / sqrt(d_head)) V, fused. q: n x d, k: s x d,
// v: s x dv, with d and dv divisible by heads. Output n x dv.
Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                    std::size_t heads);

}  // namespace mosaic::ops
