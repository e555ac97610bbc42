#include "mosaic/numerics/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstdint>
#include <cstring>
#include <cmath>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mosaic::kernels {
namespace {

std::atomic<Mode> g_mode{Mode::Parallel};

// Below this many multiply-adds the OpenMP fork costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

// Eight doubles; the compiler splits it when the target has narrower registers.
typedef double V8 __attribute__((vector_size(64)));

inline V8 load8(const double* p) {
  V8 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store8(double* p, V8 v) { std::memcpy(p, &v, sizeof v); }

// An R x (8 * NV) block of c = A * b held in registers. A(i, p) lives at
// a[i * ars + p * acs], which covers both a and a^T. Each element sums over p
// in increasing order, so the result does not depend on the tiling.
template <std::size_t R, std::size_t NV>
inline void tile(const double* a, std::size_t ars, std::size_t acs, const double* b,
                 std::size_t ldb, double* c, std::size_t ldc, std::size_t k, bool accumulate) {
  V8 acc[R][NV];
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t v = 0; v < NV; ++v) acc[r][v] = accumulate ? load8(c + r * ldc + 8 * v) : V8{};
  for (std::size_t p = 0; p < k; ++p) {
    V8 bv[NV];
    for (std::size_t v = 0; v < NV; ++v) bv[v] = load8(b + p * ldb + 8 * v);
    for (std::size_t r = 0; r < R; ++r) {
      const double s = a[r * ars + p * acs];
      for (std::size_t v = 0; v < NV; ++v) acc[r][v] += s * bv[v];
    }
  }
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t v = 0; v < NV; ++v) store8(c + r * ldc + 8 * v, acc[r][v]);
}

// Same for a single column.
template <std::size_t R>
inline void tile_col(const double* a, std::size_t ars, std::size_t acs, const double* b,
                     std::size_t ldb, double* c, std::size_t ldc, std::size_t k, bool accumulate) {
  double acc[R];
  for (std::size_t r = 0; r < R; ++r) acc[r] = accumulate ? c[r * ldc] : 0.0;
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t r = 0; r < R; ++r) acc[r] += a[r * ars + p * acs] * b[p * ldb];
  for (std::size_t r = 0; r < R; ++r) c[r * ldc] = acc[r];
}

template <std::size_t R>
void tile_row_block(const double* a, std::size_t ars, std::size_t acs, const double* b,
                    double* c, std::size_t k, std::size_t m, bool accumulate) {
  std::size_t j = 0;
  for (; j + 16 <= m; j += 16) tile<R, 2>(a, ars, acs, b + j, m, c + j, m, k, accumulate);
  for (; j + 8 <= m; j += 8) tile<R, 1>(a, ars, acs, b + j, m, c + j, m, k, accumulate);
  for (; j < m; ++j) tile_col<R>(a, ars, acs, b + j, m, c + j, m, k, accumulate);
}

// Rows [r0, r1) of c = A * b with A given by strides as in tile().
void strided_rows(const double* a, std::size_t ars, std::size_t acs, const double* b, double* c,
                  std::size_t r0, std::size_t r1, std::size_t k, std::size_t m, bool accumulate) {
  std::size_t i = r0;
  for (; i + 4 <= r1; i += 4) tile_row_block<4>(a + i * ars, ars, acs, b, c + i * m, k, m, accumulate);
  for (; i < r1; ++i) tile_row_block<1>(a + i * ars, ars, acs, b, c + i * m, k, m, accumulate);
}

void gemm_nn_rows(const double* a, const double* b, double* c, std::size_t r0, std::size_t r1,
                  std::size_t k, std::size_t m, bool accumulate) {
  strided_rows(a, k, 1, b, c, r0, r1, k, m, accumulate);
}

// Rows [r0, r1) of c = a * bt^T via row dot products. Used when the output is
// too narrow for the streaming kernel; eight partial sums per dot product.
void dot_rows(const double* a, const double* bt, double* c, std::size_t r0, std::size_t r1,
              std::size_t k, std::size_t m, bool accumulate) {
  const std::size_t k8 = k - k % 8;
  for (std::size_t i = r0; i < r1; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double* bj = bt + j * k;
      double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
      for (std::size_t p = 0; p < k8; p += 8)
        for (std::size_t q = 0; q < 8; ++q) acc[q] += ai[p + q] * bj[p + q];
      double s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
      for (std::size_t p = k8; p < k; ++p) s += ai[p] * bj[p];
      c[i * m + j] = accumulate ? c[i * m + j] + s : s;
    }
  }
}

// Outputs narrower than this use dot_rows.
constexpr std::size_t kNarrow = 8;

// Rows [r0, r1) of c = a^T * b where a is n x k, so output row i reads column i of a.
void gemm_tn_rows(const double* a, const double* b, double* c, std::size_t r0, std::size_t r1,
                  std::size_t n, std::size_t k, std::size_t m, bool accumulate) {
  strided_rows(a, 1, k, b, c, r0, r1, n, m, accumulate);
}

std::vector<double> transpose(const double* b, std::size_t rows, std::size_t cols) {
  std::vector<double> t(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = b[r * cols + c];
  return t;
}

// Branch-free exp for the vectorizer: x = k ln2 + r with |r| <= ln2/2, then a
// degree-13 Taylor polynomial and an exponent-field scale. About 1 ulp.
inline double exp_approx(double x) {
  constexpr double kLog2e = 1.4426950408889634;
  constexpr double kLn2Hi = 0.6931471803691238;
  constexpr double kLn2Lo = 1.9082149292705877e-10;
  constexpr double kShift = 6755399441055744.0;  // 1.5 * 2^52
  x = x < -708.0 ? -708.0 : x;
  x = x > 709.0 ? 709.0 : x;
  const double kd = x * kLog2e + kShift;
  const double k = kd - kShift;
  const double r = (x - k * kLn2Hi) - k * kLn2Lo;
  double p = 1.0 / 6227020800.0;
  p = p * r + 1.0 / 479001600.0;
  p = p * r + 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;
  const std::int64_t ki = std::bit_cast<std::int64_t>(kd) - std::bit_cast<std::int64_t>(kShift);
  const auto bits = static_cast<std::uint64_t>(ki + 1023) << 52;
  return p * std::bit_cast<double>(bits);
}

// Eight interleaved partial results keep the reductions vectorizable while
// fixing the summation order.
double row_max(const double* x, std::size_t n) {
  double lane[8];
  for (double& l : lane) l = -std::numeric_limits<double>::infinity();
  const std::size_t n8 = n - n % 8;
  for (std::size_t j = 0; j < n8; j += 8)
    for (std::size_t q = 0; q < 8; ++q) lane[q] = x[j + q] > lane[q] ? x[j + q] : lane[q];
  for (std::size_t j = n8; j < n; ++j) lane[0] = x[j] > lane[0] ? x[j] : lane[0];
  double mx = lane[0];
  for (std::size_t q = 1; q < 8; ++q) mx = lane[q] > mx ? lane[q] : mx;
  return mx;
}

double row_sum(const double* x, std::size_t n) {
  double lane[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  const std::size_t n8 = n - n % 8;
  for (std::size_t j = 0; j < n8; j += 8)
    for (std::size_t q = 0; q < 8; ++q) lane[q] += x[j + q];
  double s = ((lane[0] + lane[4]) + (lane[1] + lane[5])) + ((lane[2] + lane[6]) + (lane[3] + lane[7]));
  for (std::size_t j = n8; j < n; ++j) s += x[j];
  return s;
}

void softmax_row(const double* x, double* y, std::size_t cols) {
  const double mx = row_max(x, cols);
  if (mx == -std::numeric_limits<double>::infinity()) {
    std::fill(y, y + cols, 0.0);
    return;
  }
  for (std::size_t j = 0; j < cols; ++j) y[j] = exp_approx(x[j] - mx);
  const double inv = 1.0 / row_sum(y, cols);
  for (std::size_t j = 0; j < cols; ++j) y[j] *= inv;
}

void layer_norm_row(const double* x, double* y, double* rstd, std::size_t cols, double eps) {
  double mean = 0.0;
  for (std::size_t j = 0; j < cols; ++j) mean += x[j];
  mean /= static_cast<double>(cols);
  double var = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    const double d = x[j] - mean;
    var += d * d;
  }
  var /= static_cast<double>(cols);
  const double r = 1.0 / std::sqrt(var + eps);
  *rstd = r;
  for (std::size_t j = 0; j < cols; ++j) y[j] = (x[j] - mean) * r;
}

}  // namespace

void exp_values(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = exp_approx(x[i]);
}

void tanh_values(const double* x, double* y, std::size_t n) {
  // tanh(u) = sign(u) (1 - 2 / (exp(2|u|) + 1))
  for (std::size_t i = 0; i < n; ++i) {
    const double a = x[i] < 0.0 ? -x[i] : x[i];
    const double t = 1.0 - 2.0 / (exp_approx(2.0 * a) + 1.0);
    y[i] = x[i] < 0.0 ? -t : t;
  }
}

void set_mode(Mode m) { g_mode.store(m); }
Mode mode() { return g_mode.load(); }

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace serial {

void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate) {
  if (m < kNarrow) {
    const auto bt = transpose(b, k, m);
    dot_rows(a, bt.data(), c, 0, n, k, m, accumulate);
    return;
  }
  gemm_nn_rows(a, b, c, 0, n, k, m, accumulate);
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate) {
  if (m < kNarrow) {
    dot_rows(a, b, c, 0, n, k, m, accumulate);
    return;
  }
  const auto bt = transpose(b, m, k);
  gemm_nn_rows(a, bt.data(), c, 0, n, k, m, accumulate);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate) {
  if (m < kNarrow) {
    const auto at = transpose(a, n, k), bt = transpose(b, n, m);
    dot_rows(at.data(), bt.data(), c, 0, k, n, m, accumulate);
    return;
  }
  gemm_tn_rows(a, b, c, 0, k, n, k, m, accumulate);
}

void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) softmax_row(x + r * cols, y + r * cols, cols);
}

void layer_norm_rows(const double* x, double* y, double* rstd, std::size_t rows, std::size_t cols,
                     double eps) {
  for (std::size_t r = 0; r < rows; ++r)
    layer_norm_row(x + r * cols, y + r * cols, rstd + r, cols, eps);
}

}  // namespace serial

namespace parallel {

namespace {

void dot_rows_parallel(const double* a, const double* bt, double* c, std::size_t n, std::size_t k,
                       std::size_t m, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n * k * m >= kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    dot_rows(a, bt, c, r, r + 1, k, m, accumulate);
  }
}

}  // namespace

void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate) {
  if (m < kNarrow) {
    const auto bt = transpose(b, k, m);
    dot_rows_parallel(a, bt.data(), c, n, k, m, accumulate);
    return;
  }
  const std::ptrdiff_t blocks = static_cast<std::ptrdiff_t>((n + 3) / 4);
#pragma omp parallel for schedule(static) if (n * k * m >= kParallelWork)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t r0 = static_cast<std::size_t>(blk) * 4;
    gemm_nn_rows(a, b, c, r0, std::min(n, r0 + 4), k, m, accumulate);
  }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate) {
  if (m < kNarrow) {
    dot_rows_parallel(a, b, c, n, k, m, accumulate);
    return;
  }
  const auto bt = transpose(b, m, k);
  gemm_nn(a, bt.data(), c, n, k, m, accumulate);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate) {
  if (m < kNarrow) {
    const auto at = transpose(a, n, k), bt = transpose(b, n, m);
    dot_rows_parallel(at.data(), bt.data(), c, k, n, m, accumulate);
    return;
  }
  const std::ptrdiff_t blocks = static_cast<std::ptrdiff_t>((k + 3) / 4);
#pragma omp parallel for schedule(static) if (n * k * m >= kParallelWork)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t r0 = static_cast<std::size_t>(blk) * 4;
    gemm_tn_rows(a, b, c, r0, std::min(k, r0 + 4), n, k, m, accumulate);
  }
}

void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols) {
  const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelWork)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    const auto o = static_cast<std::size_t>(r) * cols;
    softmax_row(x + o, y + o, cols);
  }
}

void layer_norm_rows(const double* x, double* y, double* rstd, std::size_t rows, std::size_t cols,
                     double eps) {
  const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelWork)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    const auto o = static_cast<std::size_t>(r) * cols;
    layer_norm_row(x + o, y + o, rstd + r, cols, eps);
  }
}

}  // namespace parallel

void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate) {
  if (mode() == Mode::Parallel)
    parallel::gemm_nn(a, b, c, n, k, m, accumulate);
  else
    serial::gemm_nn(a, b, c, n, k, m, accumulate);
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate) {
  if (mode() == Mode::Parallel)
    parallel::gemm_nt(a, b, c, n, k, m, accumulate);
  else
    serial::gemm_nt(a, b, c, n, k, m, accumulate);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate) {
  if (mode() == Mode::Parallel)
    parallel::gemm_tn(a, b, c, n, k, m, accumulate);
  else
    serial::gemm_tn(a, b, c, n, k, m, accumulate);
}

void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols) {
  if (mode() == Mode::Parallel)
    parallel::softmax_rows(x, y, rows, cols);
  else
    serial::softmax_rows(x, y, rows, cols);
}

void layer_norm_rows(const double* x, double* y, double* rstd, std::size_t rows, std::size_t cols,
                     double eps) {
  if (mode() == Mode::Parallel)
    parallel::layer_norm_rows(x, y, rstd, rows, cols, eps);
  else
    serial::layer_norm_rows(x, y, rstd, rows, cols, eps);
}

}  // namespace mosaic::kernels
