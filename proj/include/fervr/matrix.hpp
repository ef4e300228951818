#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fervr {

using Vector = std::vector<double>;

// Row-major dense matrix of 64-bit floats.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double value = 0.0)
        : rows(r), cols(c), data(r * c, value) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    bool empty() const { return rows == 0 || cols == 0; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

// Gathers the given rows into a new matrix, in index order.
Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& indices);

// Appends b to the right of a. Row counts must match.
Matrix hcat(const Matrix& a, const Matrix& b);

// Throws if any entry is NaN or infinite. `context` prefixes the message.
void check_finite(const Matrix& m, const std::string& context);
void check_finite(const Vector& v, const std::string& context);

}  // namespace fervr
