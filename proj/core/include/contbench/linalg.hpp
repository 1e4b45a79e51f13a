#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "contbench/errors.hpp"

namespace contbench {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles. Column vectors are n x 1 where a
/// Matrix is required.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;  // row-major, size rows*cols

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), values(static_cast<size_t>(r) * c, 0.0) {}
    Matrix(int r, int c, std::vector<double> v);

    double& operator()(int r, int c) { return values[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return values[static_cast<size_t>(r) * cols + c]; }

    double* row_ptr(int r) { return values.data() + static_cast<size_t>(r) * cols; }
    const double* row_ptr(int r) const { return values.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return values.size(); }
    bool same_shape(const Matrix& other) const { return rows == other.rows && cols == other.cols; }

    static Matrix identity(int n);

    bool all_finite() const;
};

double dot(const Vector& a, const Vector& b);
double norm(const Vector& v);

Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& m, const Vector& v);
Matrix transpose(const Matrix& m);

// Frobenius inner product sum_ij a_ij * b_ij.
double frobenius_dot(const Matrix& a, const Matrix& b);

/// Orthonormalizes v against an orthonormal basis. Returns the unit residual,
/// or nullopt when the residual norm falls below tol * |v| (v is numerically
/// inside span(basis)).
std::optional<Vector> gram_schmidt_extend(const std::vector<Vector>& basis, const Vector& v,
                                          double tol = 1e-10);

/// trace(G * D * A * D^T): the quadratic form vec(D)^T (A kron G) vec(D)
/// under column-stacking vec, for symmetric A and G. G is out x out,
/// A is in x in, D is out x in.
double kron_quad_form(const Matrix& g, const Matrix& d, const Matrix& a);

}  // namespace contbench
