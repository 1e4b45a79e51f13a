#include "contbench/linalg.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace contbench {

Matrix::Matrix(int r, int c, std::vector<double> v) : rows(r), cols(c), values(std::move(v)) {
    if (values.size() != static_cast<size_t>(r) * c) {
        throw DimensionError("Matrix: values length " + std::to_string(values.size()) +
                             " does not match " + std::to_string(r) + "x" + std::to_string(c));
    }
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool Matrix::all_finite() const {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) {
        throw DimensionError("dot: length mismatch " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
    }
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const Vector& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw DimensionError("matmul: " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                             " times " + std::to_string(b.rows) + "x" + std::to_string(b.cols));
    }
    Matrix c(a.rows, b.cols);
    // i-k-j order: inner loop runs over contiguous rows of b and c.
    for (int i = 0; i < a.rows; ++i) {
        double* crow = c.row_ptr(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.row_ptr(k);
            for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Vector matvec(const Matrix& m, const Vector& v) {
    if (static_cast<size_t>(m.cols) != v.size()) {
        throw DimensionError("matvec: " + std::to_string(m.cols) + " cols vs vector length " +
                             std::to_string(v.size()));
    }
    Vector out(static_cast<size_t>(m.rows));
    for (int i = 0; i < m.rows; ++i) {
        const double* row = m.row_ptr(i);
        double s = 0.0;
        for (int j = 0; j < m.cols; ++j) s += row[j] * v[j];
        out[i] = s;
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}

double frobenius_dot(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw DimensionError("frobenius_dot: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
    return s;
}

std::optional<Vector> gram_schmidt_extend(const std::vector<Vector>& basis, const Vector& v,
                                          double tol) {
    const double vnorm = norm(v);
    if (vnorm == 0.0) return std::nullopt;

    Vector r = v;
    // Two orthogonalization sweeps; one is not enough near the tolerance.
    for (int sweep = 0; sweep < 2; ++sweep) {
        for (const Vector& b : basis) {
            const double proj = dot(r, b);
            for (size_t i = 0; i < r.size(); ++i) r[i] -= proj * b[i];
        }
    }

    const double rnorm = norm(r);
    if (rnorm < tol * vnorm) return std::nullopt;
    for (double& x : r) x /= rnorm;
    return r;
}

double kron_quad_form(const Matrix& g, const Matrix& d, const Matrix& a) {
    if (g.rows != g.cols || a.rows != a.cols || d.rows != g.rows || d.cols != a.rows) {
        throw DimensionError("kron_quad_form: G " + std::to_string(g.rows) + "x" +
                             std::to_string(g.cols) + ", D " + std::to_string(d.rows) + "x" +
                             std::to_string(d.cols) + ", A " + std::to_string(a.rows) + "x" +
                             std::to_string(a.cols));
    }
    // trace(G D A D^T) = <G * (D A), D>_F
    return frobenius_dot(matmul(g, matmul(d, a)), d);
}

}  // namespace contbench
