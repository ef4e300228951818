#include "fervr/kernels.hpp"

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace fervr::kernels {

namespace {

std::atomic<Execution> g_execution{Execution::parallel};

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelCutoff = 32768;

void require_shapes(const Matrix& a, const Matrix& b, std::size_t a_inner, std::size_t b_inner,
                    const char* name) {
    if (a.empty() || b.empty()) {
        throw std::runtime_error(std::string(name) + ": empty operand");
    }
    if (a_inner != b_inner) {
        throw std::runtime_error(std::string(name) + ": incompatible shapes (" +
                                 std::to_string(a.rows) + "x" + std::to_string(a.cols) + ", " +
                                 std::to_string(b.rows) + "x" + std::to_string(b.cols) + ")");
    }
}

// Shared element loops. Each output element accumulates in a fixed order
// (k ascending), so serial and row-parallel execution agree bitwise.
inline void matmul_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
    double* crow = c.data.data() + i * c.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
        const double aik = a(i, k);
        const double* brow = b.data.data() + k * b.cols;
        for (std::size_t j = 0; j < b.cols; ++j) {
            crow[j] += aik * brow[j];
        }
    }
}

inline void matmul_nt_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
    const double* arow = a.data.data() + i * a.cols;
    for (std::size_t j = 0; j < b.rows; ++j) {
        const double* brow = b.data.data() + j * b.cols;
        double sum = 0.0;
        for (std::size_t k = 0; k < a.cols; ++k) {
            sum += arow[k] * brow[k];
        }
        c(i, j) = sum;
    }
}

inline void matmul_tn_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
    // c(i, j) = sum_s a(s, i) * b(s, j)
    double* crow = c.data.data() + i * c.cols;
    for (std::size_t s = 0; s < a.rows; ++s) {
        const double asi = a(s, i);
        const double* brow = b.data.data() + s * b.cols;
        for (std::size_t j = 0; j < b.cols; ++j) {
            crow[j] += asi * brow[j];
        }
    }
}

}  // namespace

Execution execution() { return g_execution.load(std::memory_order_relaxed); }

void set_execution(Execution mode) { g_execution.store(mode, std::memory_order_relaxed); }

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
    require_shapes(a, b, a.cols, b.rows, "matmul");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        matmul_row(a, b, c, i);
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    require_shapes(a, b, a.cols, b.cols, "matmul_nt");
    Matrix c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        matmul_nt_row(a, b, c, i);
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    require_shapes(a, b, a.rows, b.rows, "matmul_tn");
    Matrix c(a.cols, b.cols);
    for (std::size_t i = 0; i < a.cols; ++i) {
        matmul_tn_row(a, b, c, i);
    }
    return c;
}

}  // namespace serial

namespace parallel {

Matrix matmul(const Matrix& a, const Matrix& b) {
    require_shapes(a, b, a.cols, b.rows, "matmul");
    Matrix c(a.rows, b.cols);
    const auto n = static_cast<std::int64_t>(a.rows);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        matmul_row(a, b, c, static_cast<std::size_t>(i));
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    require_shapes(a, b, a.cols, b.cols, "matmul_nt");
    Matrix c(a.rows, b.rows);
    const auto n = static_cast<std::int64_t>(a.rows);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        matmul_nt_row(a, b, c, static_cast<std::size_t>(i));
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    require_shapes(a, b, a.rows, b.rows, "matmul_tn");
    Matrix c(a.cols, b.cols);
    const auto n = static_cast<std::int64_t>(a.cols);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        matmul_tn_row(a, b, c, static_cast<std::size_t>(i));
    }
    return c;
}

}  // namespace parallel

namespace {

bool go_parallel(std::size_t out_rows, std::size_t out_cols, std::size_t inner) {
    return execution() == Execution::parallel && out_rows * out_cols * inner >= kParallelCutoff;
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    return go_parallel(a.rows, b.cols, a.cols) ? parallel::matmul(a, b) : serial::matmul(a, b);
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    return go_parallel(a.rows, b.rows, a.cols) ? parallel::matmul_nt(a, b)
                                               : serial::matmul_nt(a, b);
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    return go_parallel(a.cols, b.cols, a.rows) ? parallel::matmul_tn(a, b)
                                               : serial::matmul_tn(a, b);
}

}  // namespace fervr::kernels
