#include "fervr/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace fervr {

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& indices) {
    Matrix out(indices.size(), m.cols);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= m.rows) {
            throw std::runtime_error("take_rows: index " + std::to_string(indices[r]) +
                                     " out of range for " + std::to_string(m.rows) + " rows");
        }
        const double* src = m.data.data() + indices[r] * m.cols;
        std::copy(src, src + m.cols, out.data.data() + r * m.cols);
    }
    return out;
}

Matrix hcat(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) {
        throw std::runtime_error("hcat: row counts differ (" + std::to_string(a.rows) + " vs " +
                                 std::to_string(b.rows) + ")");
    }
    Matrix out(a.rows, a.cols + b.cols);
    for (std::size_t r = 0; r < a.rows; ++r) {
        std::copy(a.data.begin() + r * a.cols, a.data.begin() + (r + 1) * a.cols,
                  out.data.begin() + r * out.cols);
        std::copy(b.data.begin() + r * b.cols, b.data.begin() + (r + 1) * b.cols,
                  out.data.begin() + r * out.cols + a.cols);
    }
    return out;
}

void check_finite(const Matrix& m, const std::string& context) {
    for (double v : m.data) {
        if (!std::isfinite(v)) {
            throw std::runtime_error(context + ": non-finite entry");
        }
    }
}

void check_finite(const Vector& v, const std::string& context) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw std::runtime_error(context + ": non-finite entry");
        }
    }
}

}  // namespace fervr
