#pragma once

// Matrix-product kernels used by the autodiff ops. Every variant computes each
// output element as a sum over the inner index in ascending order, so the
// parallel kernels (which only split the output rows across threads) produce
// results bitwise identical to the serial reference.

#include <cstddef>

#include "rcd/tensor.hpp"

namespace rcd::kernels {

namespace serial {
// out = a * b
void matmul(const Tensor& a, const Tensor& b, Tensor& out);
// out += a * b^T
void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& out);
// out += a^T * b
void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& out);
}  // namespace serial

namespace parallel {
void matmul(const Tensor& a, const Tensor& b, Tensor& out);
void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& out);
void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& out);
}  // namespace parallel

// Multiply-add count above which the dispatchers use the parallel kernels.
inline constexpr std::size_t kParallelThreshold = std::size_t{1} << 18;

void matmul(const Tensor& a, const Tensor& b, Tensor& out);
void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& out);
void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& out);

// Number of worker threads OpenMP would use, 1 without OpenMP.
int max_threads();

}  // namespace rcd::kernels
