#include "rcd/kernels.hpp"

#include <string>

#ifdef RCD_HAVE_OPENMP
#include <omp.h>
#endif

#include "rcd/error.hpp"

namespace rcd::kernels {

namespace {

void check(bool ok, const char* op, const Tensor& a, const Tensor& b) {
  if (!ok) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                     b.shape_string());
  }
}

// Row kernels: each computes one output row with ascending inner-index order.

inline void matmul_row(const Tensor& a, const Tensor& b, Tensor& out, std::size_t i) {
  const std::size_t inner = a.cols(), m = b.cols();
  double* o = &out(i, 0);
  for (std::size_t j = 0; j < m; ++j) o[j] = 0.0;
  for (std::size_t k = 0; k < inner; ++k) {
    const double aik = a(i, k);
    const double* brow = b.values().data() + k * b.cols();
    for (std::size_t j = 0; j < m; ++j) o[j] += aik * brow[j];
  }
}

inline void matmul_nt_row(const Tensor& a, const Tensor& b, Tensor& out, std::size_t i) {
  const std::size_t inner = a.cols(), m = b.rows();
  const double* arow = a.values().data() + i * a.cols();
  for (std::size_t j = 0; j < m; ++j) {
    const double* brow = b.values().data() + j * b.cols();
    double s = 0.0;
    for (std::size_t k = 0; k < inner; ++k) s += arow[k] * brow[k];
    out(i, j) += s;
  }
}

inline void matmul_tn_row(const Tensor& a, const Tensor& b, Tensor& out, std::size_t i) {
  const std::size_t inner = a.rows(), m = b.cols();
  double* o = &out(i, 0);
  for (std::size_t k = 0; k < inner; ++k) {
    const double aki = a(k, i);
    if (aki == 0.0) continue;
    const double* brow = b.values().data() + k * b.cols();
    for (std::size_t j = 0; j < m; ++j) o[j] += aki * brow[j];
  }
}

void prepare_matmul(const Tensor& a, const Tensor& b, Tensor& out) {
  check(a.cols() == b.rows(), "matmul", a, b);
  if (out.rows() != a.rows() || out.cols() != b.cols()) out = Tensor(a.rows(), b.cols());
}

void check_nt(const Tensor& a, const Tensor& b, const Tensor& out) {
  check(a.cols() == b.cols() && out.rows() == a.rows() && out.cols() == b.rows(), "matmul_nt", a,
        b);
}

void check_tn(const Tensor& a, const Tensor& b, const Tensor& out) {
  check(a.rows() == b.rows() && out.rows() == a.cols() && out.cols() == b.cols(), "matmul_tn", a,
        b);
}

}  // namespace

namespace serial {

void matmul(const Tensor& a, const Tensor& b, Tensor& out) {
  prepare_matmul(a, b, out);
  for (std::size_t i = 0; i < a.rows(); ++i) matmul_row(a, b, out, i);
}

void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  check_nt(a, b, out);
  for (std::size_t i = 0; i < a.rows(); ++i) matmul_nt_row(a, b, out, i);
}

void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  check_tn(a, b, out);
  // The skipped zero terms add exactly 0.0 and cannot change the sum.
  for (std::size_t i = 0; i < a.cols(); ++i) matmul_tn_row(a, b, out, i);
}

}  // namespace serial

namespace parallel {

void matmul(const Tensor& a, const Tensor& b, Tensor& out) {
  prepare_matmul(a, b, out);
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) matmul_row(a, b, out, static_cast<std::size_t>(i));
}

void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  check_nt(a, b, out);
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) matmul_nt_row(a, b, out, static_cast<std::size_t>(i));
}

void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  check_tn(a, b, out);
  const auto n = static_cast<std::ptrdiff_t>(a.cols());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) matmul_tn_row(a, b, out, static_cast<std::size_t>(i));
}

}  // namespace parallel

namespace {
bool use_parallel(std::size_t work) {
#ifdef RCD_HAVE_OPENMP
  return work >= kParallelThreshold && !omp_in_parallel();
#else
  (void)work;
  return false;
#endif
}
}  // namespace

void matmul(const Tensor& a, const Tensor& b, Tensor& out) {
  if (use_parallel(a.rows() * a.cols() * b.cols()))
    parallel::matmul(a, b, out);
  else
    serial::matmul(a, b, out);
}

void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  if (use_parallel(a.rows() * a.cols() * b.rows()))
    parallel::matmul_nt_acc(a, b, out);
  else
    serial::matmul_nt_acc(a, b, out);
}

void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  if (use_parallel(a.rows() * a.cols() * b.cols()))
    parallel::matmul_tn_acc(a, b, out);
  else
    serial::matmul_tn_acc(a, b, out);
}

int max_threads() {
#ifdef RCD_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace rcd::kernels
