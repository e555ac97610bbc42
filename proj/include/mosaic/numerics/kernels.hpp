#pragma once

#include <cstddef>

// Dense compute kernels. Each kernel has a serial reference and an OpenMP
// version that parallelizes over output rows only, so both produce
// bit-identical results (the reduction order inside a row never changes).
namespace mosaic::kernels {

enum class Mode { Serial, Parallel };

void set_mode(Mode mode);
Mode mode();

class ScopedMode {
 public:
  explicit ScopedMode(Mode m) : prev_(mode()) { set_mode(m); }
  ~ScopedMode() { set_mode(prev_); }
  ScopedMode(const ScopedMode&) = delete;
  ScopedMode& operator=(const ScopedMode&) = delete;

 private:
  Mode prev_;
};

// All matrices are row-major. With accumulate=false the output is overwritten.
// c[n x m] (+)= a[n x k] * b[k x m]
void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate = false);
// c[n x m] (+)= a[n x k] * b[m x k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate = false);
// c[k x m] (+)= a[n x k]^T * b[n x m]
void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate = false);

// Element-wise exp and tanh (about 1 ulp). Pure arithmetic, so the results do
// not depend on vector width or position.
void exp_values(const double* x, double* y, std::size_t n);
void tanh_values(const double* x, double* y, std::size_t n);

// Row-wise numerically stabilized softmax; rows equal to -inf everywhere become zeros.
void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols);

// Row-wise normalization to zero mean / unit variance; writes the per-row
// reciprocal standard deviation to rstd (length rows).
void layer_norm_rows(const double* x, double* y, double* rstd, std::size_t rows, std::size_t cols,
                     double eps);

namespace serial {
void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate);
void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate);
void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate);
void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols);
void layer_norm_rows(const double* x, double* y, double* rstd, std::size_t rows, std::size_t cols,
                     double eps);
}  // namespace serial

namespace parallel {
void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate);
void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate);
void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate);
void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols);
void layer_norm_rows(const double* x, double* y, double* rstd, std::size_t rows, std::size_t cols,
                     double eps);
}  // namespace parallel

int max_threads();

}  // namespace mosaic::kernels
