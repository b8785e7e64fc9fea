#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mpc {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool operator==(const Matrix&) const = default;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

// Cosine similarity; throws Error(ZeroVector) if either input has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

// y = W^T x + b for W stored as (in x out).
Vec affine(const Matrix& w, std::span<const double> b, std::span<const double> x);

bool all_finite(std::span<const double> v);

}  // namespace mpc
