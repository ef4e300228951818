#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <stdexcept>

#include "fervr/kernels.hpp"
#include "fervr/matrix.hpp"

using fervr::Matrix;
namespace kernels = fervr::kernels;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Matrix m(rows, cols);
    for (double& v : m.data) {
        v = dist(rng);
    }
    return m;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            t(c, r) = m(r, c);
        }
    }
    return t;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

struct ExecutionGuard {
    kernels::Execution saved = kernels::execution();
    ~ExecutionGuard() { kernels::set_execution(saved); }
};

}  // namespace

TEST_CASE("matmul matches a hand-computed product") {
    Matrix a(2, 3);
    a.data = {1, 2, 3, 4, 5, 6};
    Matrix b(3, 2);
    b.data = {7, 8, 9, 10, 11, 12};
    Matrix c = kernels::matmul(a, b);
    REQUIRE(c.rows == 2);
    REQUIRE(c.cols == 2);
    CHECK(c(0, 0) == 58.0);
    CHECK(c(0, 1) == 64.0);
    CHECK(c(1, 0) == 139.0);
    CHECK(c(1, 1) == 154.0);
}

TEST_CASE("identity leaves the other operand unchanged") {
    Matrix a = random_matrix(5, 5, 1);
    Matrix eye(5, 5, 0.0);
    for (std::size_t i = 0; i < 5; ++i) {
        eye(i, i) = 1.0;
    }
    CHECK(bitwise_equal(kernels::matmul(a, eye), a));
    CHECK(bitwise_equal(kernels::matmul(eye, a), a));
}

TEST_CASE("matmul_nt equals matmul against the explicit transpose, bitwise") {
    Matrix a = random_matrix(17, 9, 2);
    Matrix b = random_matrix(13, 9, 3);
    Matrix direct = kernels::matmul_nt(a, b);
    Matrix via_transpose = kernels::matmul(a, transpose(b));
    CHECK(bitwise_equal(direct, via_transpose));
}

TEST_CASE("matmul_tn equals matmul against the explicit transpose, bitwise") {
    Matrix a = random_matrix(21, 6, 4);
    Matrix b = random_matrix(21, 11, 5);
    Matrix direct = kernels::matmul_tn(a, b);
    Matrix via_transpose = kernels::matmul(transpose(a), b);
    CHECK(bitwise_equal(direct, via_transpose));
}

TEST_CASE("incompatible shapes are rejected") {
    Matrix a(2, 3, 0.0);
    Matrix b(4, 2, 0.0);
    CHECK_THROWS_AS(kernels::matmul(a, b), std::runtime_error);
    Matrix c(4, 5, 0.0);
    CHECK_THROWS_AS(kernels::matmul_nt(a, c), std::runtime_error);  // needs equal col counts
    CHECK_THROWS_AS(kernels::matmul_tn(a, b), std::runtime_error);  // needs equal row counts
}

TEST_CASE("empty operands are rejected") {
    Matrix a;
    Matrix b(3, 3, 0.0);
    CHECK_THROWS_AS(kernels::matmul(a, b), std::runtime_error);
    CHECK_THROWS_AS(kernels::matmul(b, a), std::runtime_error);
}

TEST_CASE("serial and parallel kernels agree bitwise across shapes") {
    ExecutionGuard guard;
    // Shapes straddle the size cutoff, so both dispatch paths are exercised.
    const std::size_t shapes[][3] = {
        {1, 1, 1}, {2, 3, 4}, {7, 63, 7}, {64, 64, 64}, {128, 63, 128}, {200, 97, 150},
    };
    std::uint64_t seed = 100;
    for (const auto& s : shapes) {
        Matrix a = random_matrix(s[0], s[1], seed++);
        Matrix b = random_matrix(s[1], s[2], seed++);
        Matrix serial = kernels::serial::matmul(a, b);
        Matrix parallel = kernels::parallel::matmul(a, b);
        CHECK(bitwise_equal(serial, parallel));

        Matrix bt = random_matrix(s[2], s[1], seed++);
        CHECK(bitwise_equal(kernels::serial::matmul_nt(a, bt), kernels::parallel::matmul_nt(a, bt)));

        Matrix b2 = random_matrix(s[0], s[2], seed++);
        CHECK(bitwise_equal(kernels::serial::matmul_tn(a, b2), kernels::parallel::matmul_tn(a, b2)));
    }
}

TEST_CASE("dispatching kernels give the same answer in either execution mode") {
    ExecutionGuard guard;
    Matrix a = random_matrix(150, 80, 42);
    Matrix b = random_matrix(80, 120, 43);
    kernels::set_execution(kernels::Execution::serial);
    Matrix serial = kernels::matmul(a, b);
    kernels::set_execution(kernels::Execution::parallel);
    Matrix parallel = kernels::matmul(a, b);
    CHECK(bitwise_equal(serial, parallel));
}

TEST_CASE("execution mode round-trips") {
    ExecutionGuard guard;
    kernels::set_execution(kernels::Execution::serial);
    CHECK(kernels::execution() == kernels::Execution::serial);
    kernels::set_execution(kernels::Execution::parallel);
    CHECK(kernels::execution() == kernels::Execution::parallel);
}
