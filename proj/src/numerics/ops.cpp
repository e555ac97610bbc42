#include "mosaic/numerics/ops.hpp"

#include <cmath>
#include <limits>

#include "mosaic/numerics/kernels.hpp"
#include "mosaic/numerics/tape.hpp"

namespace mosaic::ops {
namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

Shape matrix_shape(std::size_t r, std::size_t c) { return {r, c}; }

double* grad_of(const ImplPtr& p) {
  p->ensure_grad();
  return p->grad.data();
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner extents differ " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  std::vector<double> out(n * m);
  kernels::gemm_nn(a.data().data(), b.data().data(), out.data(), n, k, m);
  ImplPtr pa = a.impl(), pb = b.impl();
  return make_result(matrix_shape(n, m), std::move(out), {a, b}, [pa, pb, n, k, m](TensorImpl& o) {
    if (pa->requires_grad)
      kernels::gemm_nt(o.grad.data(), pb->data.data(), grad_of(pa), n, m, k, true);
    if (pb->requires_grad)
      kernels::gemm_tn(pa->data.data(), o.grad.data(), grad_of(pb), n, k, m, true);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  if (b.cols() != k) {
    throw ShapeError("matmul_nt: inner extents differ " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()) + "^T");
  }
  std::vector<double> out(n * m);
  kernels::gemm_nt(a.data().data(), b.data().data(), out.data(), n, k, m);
  ImplPtr pa = a.impl(), pb = b.impl();
  return make_result(matrix_shape(n, m), std::move(out), {a, b}, [pa, pb, n, k, m](TensorImpl& o) {
    if (pa->requires_grad)
      kernels::gemm_nn(o.grad.data(), pb->data.data(), grad_of(pa), n, m, k, true);
    if (pb->requires_grad)
      kernels::gemm_tn(o.grad.data(), pa->data.data(), grad_of(pb), n, m, k, true);
  });
}

Tensor transpose(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * c);
  const auto d = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = d[i * c + j];
  ImplPtr pa = a.impl();
  return make_result(matrix_shape(c, r), std::move(out), {a}, [pa, r, c](TensorImpl& o) {
    double* g = grad_of(pa);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += o.grad[j * r + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  ImplPtr pa = a.impl(), pb = b.impl();
  return make_result(a.shape(), std::move(out), {a, b}, [pa, pb](TensorImpl& o) {
    for (const auto& p : {pa, pb}) {
      if (!p->requires_grad) continue;
      double* g = grad_of(p);
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  ImplPtr pa = a.impl(), pb = b.impl();
  return make_result(a.shape(), std::move(out), {a, b}, [pa, pb](TensorImpl& o) {
    if (pa->requires_grad) {
      double* g = grad_of(pa);
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
    if (pb->requires_grad) {
      double* g = grad_of(pb);
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  ImplPtr pa = a.impl(), pb = b.impl();
  return make_result(a.shape(), std::move(out), {a, b}, [pa, pb](TensorImpl& o) {
    if (pa->requires_grad) {
      double* g = grad_of(pa);
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * pb->data[i];
    }
    if (pb->requires_grad) {
      double* g = grad_of(pb);
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * pa->data[i];
    }
  });
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  const std::size_t r = x.rows(), c = x.cols();
  if (row.size() != c) {
    throw ShapeError("add_row: row of " + std::to_string(row.size()) + " vs " +
                     std::to_string(c) + " columns");
  }
  std::vector<double> out(r * c);
  const auto xd = x.data(), rd = row.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xd[i * c + j] + rd[j];
  ImplPtr px = x.impl(), pr = row.impl();
  return make_result(x.shape(), std::move(out), {x, row}, [px, pr, r, c](TensorImpl& o) {
    if (px->requires_grad) {
      double* g = grad_of(px);
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
    if (pr->requires_grad) {
      double* g = grad_of(pr);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[j] += o.grad[i * c + j];
    }
  });
}

Tensor mul_row(const Tensor& x, const Tensor& row) {
  const std::size_t r = x.rows(), c = x.cols();
  if (row.size() != c) {
    throw ShapeError("mul_row: row of " + std::to_string(row.size()) + " vs " +
                     std::to_string(c) + " columns");
  }
  std::vector<double> out(r * c);
  const auto xd = x.data(), rd = row.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xd[i * c + j] * rd[j];
  ImplPtr px = x.impl(), pr = row.impl();
  return make_result(x.shape(), std::move(out), {x, row}, [px, pr, r, c](TensorImpl& o) {
    if (px->requires_grad) {
      double* g = grad_of(px);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += o.grad[i * c + j] * pr->data[j];
    }
    if (pr->requires_grad) {
      double* g = grad_of(pr);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[j] += o.grad[i * c + j] * px->data[i * c + j];
    }
  });
}

Tensor add_scalar(const Tensor& x, double s) {
  std::vector<double> out(x.size());
  const auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] + s;
  ImplPtr px = x.impl();
  return make_result(x.shape(), std::move(out), {x}, [px](TensorImpl& o) {
    double* g = grad_of(px);
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor scale(const Tensor& x, double s) {
  std::vector<double> out(x.size());
  const auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * s;
  ImplPtr px = x.impl();
  return make_result(x.shape(), std::move(out), {x}, [px, s](TensorImpl& o) {
    double* g = grad_of(px);
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * s;
  });
}

Tensor mul_rows(const Tensor& x, std::span<const double> factors) {
  const std::size_t r = x.rows(), c = x.cols();
  if (factors.size() != r) throw ShapeError("mul_rows: factor count differs from row count");
  std::vector<double> f(factors.begin(), factors.end());
  std::vector<double> out(r * c);
  const auto xd = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xd[i * c + j] * f[i];
  ImplPtr px = x.impl();
  return make_result(x.shape(), std::move(out), {x}, [px, f = std::move(f), c](TensorImpl& o) {
    double* g = grad_of(px);
    for (std::size_t i = 0; i < f.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += o.grad[i * c + j] * f[i];
  });
}

Tensor gelu(const Tensor& x) {
  // tanh approximation
  constexpr double kAlpha = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kBeta = 0.044715;
  const std::size_t n = x.size();
  const auto xd = x.data();
  std::vector<double> th(n), out(n);
  for (std::size_t i = 0; i < n; ++i) th[i] = kAlpha * (xd[i] + kBeta * xd[i] * xd[i] * xd[i]);
  kernels::tanh_values(th.data(), th.data(), n);
  for (std::size_t i = 0; i < n; ++i) out[i] = 0.5 * xd[i] * (1.0 + th[i]);
  ImplPtr px = x.impl();
  const bool track = Tape::current().recording() && x.requires_grad();
  if (!track) th.clear();
  return make_result(x.shape(), std::move(out), {x}, [px, th = std::move(th)](TensorImpl& o) {
    double* g = grad_of(px);
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const double v = px->data[i];
      const double d =
          0.5 * (1.0 + th[i]) + 0.5 * v * (1.0 - th[i] * th[i]) * kAlpha * (1.0 + 3.0 * kBeta * v * v);
      g[i] += o.grad[i] * d;
    }
  });
}

Tensor layer_norm(const Tensor& x, double eps) {
  const std::size_t c = x.shape().back();
  if (c == 0) throw ShapeError("layer_norm over a zero-length axis");
  const std::size_t r = x.size() / c;
  std::vector<double> out(x.size());
  std::vector<double> rstd(r);
  kernels::layer_norm_rows(x.data().data(), out.data(), rstd.data(), r, c, eps);
  ImplPtr px = x.impl();
  const bool track = Tape::current().recording() && x.requires_grad();
  std::vector<double> y_saved = track ? out : std::vector<double>{};
  return make_result(x.shape(), std::move(out), {x},
                     [px, y = std::move(y_saved), rstd = std::move(rstd), r, c](TensorImpl& o) {
                       double* g = grad_of(px);
                       const double inv_c = 1.0 / static_cast<double>(c);
                       for (std::size_t i = 0; i < r; ++i) {
                         const double* dy = o.grad.data() + i * c;
                         const double* yi = y.data() + i * c;
                         double mdy = 0.0, mdyy = 0.0;
                         for (std::size_t j = 0; j < c; ++j) {
                           mdy += dy[j];
                           mdyy += dy[j] * yi[j];
                         }
                         mdy *= inv_c;
                         mdyy *= inv_c;
                         for (std::size_t j = 0; j < c; ++j)
                           g[i * c + j] += rstd[i] * (dy[j] - mdy - yi[j] * mdyy);
                       }
                     });
}

Tensor softmax(const Tensor& x, int axis) {
  const int rank = static_cast<int>(x.rank());
  if (rank < 1 || rank > 2) throw ShapeError("softmax supports rank 1 or 2");
  const int ax = axis < 0 ? axis + rank : axis;
  if (ax < 0 || ax >= rank) throw ShapeError("softmax: axis out of range");
  if (rank == 2 && ax == 0) return transpose(softmax(transpose(x), 1));
  const std::size_t c = x.shape().back();
  const std::size_t r = x.size() / c;
  std::vector<double> out(x.size());
  kernels::softmax_rows(x.data().data(), out.data(), r, c);
  ImplPtr px = x.impl();
  const bool track = Tape::current().recording() && x.requires_grad();
  std::vector<double> y_saved = track ? out : std::vector<double>{};
  return make_result(x.shape(), std::move(out), {x},
                     [px, y = std::move(y_saved), r, c](TensorImpl& o) {
                       double* g = grad_of(px);
                       for (std::size_t i = 0; i < r; ++i) {
                         const double* dy = o.grad.data() + i * c;
                         const double* yi = y.data() + i * c;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < c; ++j) dot += dy[j] * yi[j];
                         for (std::size_t j = 0; j < c; ++j) g[i * c + j] += yi[j] * (dy[j] - dot);
                       }
                     });
}

Tensor masked_fill(const Tensor& x, std::span<const std::uint8_t> keep, double fill) {
  if (keep.size() != x.size()) throw ShapeError("masked_fill: mask size differs from tensor");
  std::vector<std::uint8_t> k(keep.begin(), keep.end());
  std::vector<double> out(x.size());
  const auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = k[i] ? xd[i] : fill;
  ImplPtr px = x.impl();
  return make_result(x.shape(), std::move(out), {x}, [px, k = std::move(k)](TensorImpl& o) {
    double* g = grad_of(px);
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      if (k[i]) g[i] += o.grad[i];
  });
}

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count) {
  const std::size_t r = x.rows(), c = x.cols();
  if (start + count > r) throw ShapeError("slice_rows out of range");
  const auto xd = x.data();
  std::vector<double> out(xd.begin() + static_cast<std::ptrdiff_t>(start * c),
                          xd.begin() + static_cast<std::ptrdiff_t>((start + count) * c));
  ImplPtr px = x.impl();
  return make_result(matrix_shape(count, c), std::move(out), {x},
                     [px, start, c](TensorImpl& o) {
                       double* g = grad_of(px) + start * c;
                       for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
                     });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
  const std::size_t r = x.rows(), c = x.cols();
  if (start + count > c) throw ShapeError("slice_cols out of range");
  std::vector<double> out(r * count);
  const auto xd = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = xd[i * c + start + j];
  ImplPtr px = x.impl();
  return make_result(matrix_shape(r, count), std::move(out), {x},
                     [px, start, count, r, c](TensorImpl& o) {
                       double* g = grad_of(px);
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < count; ++j)
                           g[i * c + start + j] += o.grad[i * count + j];
                     });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  const std::size_t c = a.cols();
  if (b.cols() != c) throw ShapeError("concat_rows: column counts differ");
  const std::size_t ra = a.rows(), rb = b.rows();
  std::vector<double> out;
  out.reserve((ra + rb) * c);
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  ImplPtr pa = a.impl(), pb = b.impl();
  return make_result(matrix_shape(ra + rb, c), std::move(out), {a, b},
                     [pa, pb, ra, c](TensorImpl& o) {
                       const std::size_t split = ra * c;
                       if (pa->requires_grad) {
                         double* g = grad_of(pa);
                         for (std::size_t i = 0; i < split; ++i) g[i] += o.grad[i];
                       }
                       if (pb->requires_grad) {
                         double* g = grad_of(pb);
                         for (std::size_t i = split; i < o.grad.size(); ++i)
                           g[i - split] += o.grad[i];
                       }
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.size()) {
    throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  ImplPtr px = x.impl();
  return make_result(std::move(shape), x.to_vector(), {x}, [px](TensorImpl& o) {
    double* g = grad_of(px);
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  ImplPtr px = x.impl();
  return make_result({1}, {s}, {x}, [px](TensorImpl& o) {
    double* g = grad_of(px);
    for (std::size_t i = 0; i < px->data.size(); ++i) g[i] += o.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor sum_squares(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v * v;
  ImplPtr px = x.impl();
  return make_result({1}, {s}, {x}, [px](TensorImpl& o) {
    double* g = grad_of(px);
    for (std::size_t i = 0; i < px->data.size(); ++i) g[i] += 2.0 * px->data[i] * o.grad[0];
  });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  const std::size_t vocab = table.rows(), c = table.cols();
  std::vector<int> idv(ids.begin(), ids.end());
  std::vector<double> out(idv.size() * c);
  const auto td = table.data();
  for (std::size_t i = 0; i < idv.size(); ++i) {
    if (idv[i] < 0 || static_cast<std::size_t>(idv[i]) >= vocab)
      throw ShapeError("embedding id " + std::to_string(idv[i]) + " out of range");
    const std::size_t src = static_cast<std::size_t>(idv[i]) * c;
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = td[src + j];
  }
  ImplPtr pt = table.impl();
  Shape shape = matrix_shape(idv.size(), c);
  return make_result(std::move(shape), std::move(out), {table},
                     [pt, idv = std::move(idv), c](TensorImpl& o) {
                       double* g = grad_of(pt);
                       for (std::size_t i = 0; i < idv.size(); ++i) {
                         const std::size_t dst = static_cast<std::size_t>(idv[i]) * c;
                         for (std::size_t j = 0; j < c; ++j) g[dst + j] += o.grad[i * c + j];
                       }
                     });
}

namespace {

void gather_cols(const double* src, std::size_t rows, std::size_t stride, std::size_t col0,
                 std::size_t width, double* dst) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < width; ++j) dst[i * width + j] = src[i * stride + col0 + j];
}

void scatter_add_cols(const double* src, std::size_t rows, std::size_t stride, std::size_t col0,
                      std::size_t width, double* dst) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < width; ++j) dst[i * stride + col0 + j] += src[i * width + j];
}

}  // namespace

Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                    std::size_t heads) {
  const std::size_t n = q.rows(), d = q.cols(), s = k.rows(), dv = v.cols();
  if (k.cols() != d) throw ShapeError("attention: Q and K key dimensions differ");
  if (v.rows() != s) throw ShapeError("attention: K and V row counts differ");
  if (heads == 0 || d % heads != 0 || dv % heads != 0)
    throw ShapeError("attention: head count must divide the key and value widths");
  const std::size_t dh = d / heads, dvh = dv / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool track =
      Tape::current().recording() && (q.requires_grad() || k.requires_grad() || v.requires_grad());

  std::vector<double> out(n * dv);
  std::vector<double> probs_all(track ? heads * n * s : 0);
  // Scratch reused across calls on this thread.
  thread_local std::vector<double> qh, kh, vh, scores, probs, oh;
  qh.resize(n * dh);
  kh.resize(s * dh);
  vh.resize(s * dvh);
  scores.resize(n * s);
  probs.resize(n * s);
  oh.resize(n * dvh);
  for (std::size_t h = 0; h < heads; ++h) {
    gather_cols(q.data().data(), n, d, h * dh, dh, qh.data());
    gather_cols(k.data().data(), s, d, h * dh, dh, kh.data());
    gather_cols(v.data().data(), s, dv, h * dvh, dvh, vh.data());
    kernels::gemm_nt(qh.data(), kh.data(), scores.data(), n, dh, s);
    for (std::size_t i = 0; i < n * s; ++i) scores[i] *= sc;
    kernels::softmax_rows(scores.data(), probs.data(), n, s);
    kernels::gemm_nn(probs.data(), vh.data(), oh.data(), n, s, dvh);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < dvh; ++j) out[i * dv + h * dvh + j] = oh[i * dvh + j];
    if (track) std::copy(probs.begin(), probs.begin() + static_cast<std::ptrdiff_t>(n * s), probs_all.begin() + static_cast<std::ptrdiff_t>(h * n * s));
  }

  ImplPtr pq = q.impl(), pk = k.impl(), pv = v.impl();
  return make_result(
      matrix_shape(n, dv), std::move(out), {q, k, v},
      [pq, pk, pv, P = std::move(probs_all), heads, n, s, d, dv, dh, dvh, sc](TensorImpl& o) {
        thread_local std::vector<double> qh, kh, vh, doh, dp, ds, tmp_q, tmp_k, tmp_v;
        qh.resize(n * dh);
        kh.resize(s * dh);
        vh.resize(s * dvh);
        doh.resize(n * dvh);
        dp.resize(n * s);
        ds.resize(n * s);
        tmp_q.resize(n * dh);
        tmp_k.resize(s * dh);
        tmp_v.resize(s * dvh);
        for (std::size_t h = 0; h < heads; ++h) {
          const double* ph = P.data() + h * n * s;
          gather_cols(o.grad.data(), n, dv, h * dvh, dvh, doh.data());
          if (pv->requires_grad) {
            kernels::gemm_tn(ph, doh.data(), tmp_v.data(), n, s, dvh);
            scatter_add_cols(tmp_v.data(), s, dv, h * dvh, dvh, grad_of(pv));
          }
          if (!pq->requires_grad && !pk->requires_grad) continue;
          gather_cols(pv->data.data(), s, dv, h * dvh, dvh, vh.data());
          kernels::gemm_nt(doh.data(), vh.data(), dp.data(), n, dvh, s);
          for (std::size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < s; ++j) dot += dp[i * s + j] * ph[i * s + j];
            for (std::size_t j = 0; j < s; ++j)
              ds[i * s + j] = ph[i * s + j] * (dp[i * s + j] - dot) * sc;
          }
          if (pq->requires_grad) {
            gather_cols(pk->data.data(), s, d, h * dh, dh, kh.data());
            kernels::gemm_nn(ds.data(), kh.data(), tmp_q.data(), n, s, dh);
            scatter_add_cols(tmp_q.data(), n, d, h * dh, dh, grad_of(pq));
          }
          if (pk->requires_grad) {
            gather_cols(pq->data.data(), n, d, h * dh, dh, qh.data());
            kernels::gemm_tn(ds.data(), qh.data(), tmp_k.data(), n, s, dh);
            scatter_add_cols(tmp_k.data(), s, d, h * dh, dh, grad_of(pk));
          }
        }
      });
}

}  // namespace mosaic::ops
