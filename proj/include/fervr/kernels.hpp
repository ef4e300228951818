#pragma once

#include "fervr/matrix.hpp"

// Dense matrix kernels in two builds: a serial reference and an OpenMP
// version parallelized over independent output rows. Both accumulate every
// output element in the same fixed order, so results are bitwise identical
// regardless of thread count -- training stays reproducible either way.
namespace fervr::kernels {

enum class Execution { serial, parallel };

Execution execution();
void set_execution(Execution mode);

// Dispatching entry points: use the configured execution mode, falling back
// to serial for problems too small to be worth a parallel region.
Matrix matmul(const Matrix& a, const Matrix& b);     // A * B
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // A * B^T
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // A^T * B

namespace serial {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
}  // namespace serial

namespace parallel {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
}  // namespace parallel

}  // namespace fervr::kernels
