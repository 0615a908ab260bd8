#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "cvfr/errors.hpp"
#include "cvfr/parallel.hpp"
#include "cvfr/rng.hpp"

// Dense row-major double-precision linear algebra: just enough for this
// library (GEMM in AXPY form, LU with partial pivoting, explicit inverse
// with one Newton refinement step, singular-value extremes by power
// iteration). All reductions have a fixed summation order.

namespace cvfr {

using Vector = std::vector<double>;

struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

    double* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
    const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// GCC's range propagation misreads the unrolled block when dot() is inlined
// against small fixed-size buffers; the i + 8 <= n guard keeps it in bounds.
#if defined(__GNUC__) && !defined(__clang__)
#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Warray-bounds"
#endif
inline double dot(const double* __restrict a, const double* __restrict b, int n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
        s4 += a[i + 4] * b[i + 4];
        s5 += a[i + 5] * b[i + 5];
        s6 += a[i + 6] * b[i + 6];
        s7 += a[i + 7] * b[i + 7];
    }
    double s = ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}
#if defined(__GNUC__) && !defined(__clang__)
#pragma GCC diagnostic pop
#endif

inline void axpy(double a, const double* __restrict x, double* __restrict y, int n) {
    for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

inline double dot(const Vector& a, const Vector& b) {
    return dot(a.data(), b.data(), static_cast<int>(a.size()));
}

inline double norm2(const Vector& v) { return std::sqrt(dot(v, v)); }

inline double norm_inf(const Vector& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline bool all_finite(const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x[i])) return false;
    }
    return true;
}

/// y = A x.
inline Vector matvec(const Matrix& A, const Vector& x) {
    if (static_cast<int>(x.size()) != A.cols) throw DimensionError("matvec: size mismatch");
    Vector y(A.rows);
    for (int i = 0; i < A.rows; ++i) y[i] = dot(A.row(i), x.data(), A.cols);
    return y;
}

/// y = A^T x, accumulated row-wise so memory access stays contiguous.
inline Vector matvec_transposed(const Matrix& A, const Vector& x) {
    if (static_cast<int>(x.size()) != A.rows) throw DimensionError("matvec_transposed: size mismatch");
    Vector y(A.cols, 0.0);
    for (int i = 0; i < A.rows; ++i) axpy(x[i], A.row(i), y.data(), A.cols);
    return y;
}

inline Matrix transpose(const Matrix& A) {
    Matrix T(A.cols, A.rows);
    for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < A.cols; ++j) T(j, i) = A(i, j);
    return T;
}

/// C = A B. Tiled over the inner dimension so B is streamed once per tile;
/// row i of C is always accumulated in ascending k order.
inline Matrix matmul(const Matrix& A, const Matrix& B) {
    if (A.cols != B.rows) throw DimensionError("matmul: inner dimensions differ");
    Matrix C(A.rows, B.cols);
    constexpr int kTile = 64;
    for (int k0 = 0; k0 < A.cols; k0 += kTile) {
        const int k1 = std::min(A.cols, k0 + kTile);
        parallel_for(A.rows, 16, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t i = lo; i < hi; ++i) {
                double* crow = C.row(static_cast<int>(i));
                const double* arow = A.row(static_cast<int>(i));
                for (int k = k0; k < k1; ++k) axpy(arow[k], B.row(k), crow, B.cols);
            }
        });
    }
    return C;
}

// ---------------------------------------------------------------------------
// LU factorization with partial pivoting.
// ---------------------------------------------------------------------------

struct LuFactor {
    Matrix lu;              // L (unit diagonal, strictly lower) and U packed
    std::vector<int> piv;   // row interchanges: row i swapped with piv[i]
};

inline LuFactor lu_factor(Matrix a) {
    if (a.rows != a.cols) throw DimensionError("lu_factor: matrix not square");
    const int n = a.rows;
    LuFactor f{std::move(a), std::vector<int>(n)};
    Matrix& m = f.lu;
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        double best = std::abs(m(col, col));
        for (int r = col + 1; r < n; ++r) {
            const double v = std::abs(m(r, col));
            if (v > best) {
                best = v;
                pivot = r;
            }
        }
        f.piv[col] = pivot;
        if (best == 0.0) throw SingularMatrixError("lu_factor: exact zero pivot");
        if (pivot != col) {
            for (int j = 0; j < n; ++j) std::swap(m(col, j), m(pivot, j));
        }
        const double inv_p = 1.0 / m(col, col);
        for (int r = col + 1; r < n; ++r) {
            const double l = m(r, col) * inv_p;
            m(r, col) = l;
            if (l != 0.0) axpy(-l, m.row(col) + col + 1, m.row(r) + col + 1, n - col - 1);
        }
    }
    return f;
}

/// Solves A x = b in place.
inline void lu_solve(const LuFactor& f, double* b) {
    const int n = f.lu.rows;
    for (int i = 0; i < n; ++i) {
        if (f.piv[i] != i) std::swap(b[i], b[f.piv[i]]);
    }
    for (int i = 1; i < n; ++i) b[i] -= dot(f.lu.row(i), b, i);
    for (int i = n - 1; i >= 0; --i) {
        b[i] -= dot(f.lu.row(i) + i + 1, b + i + 1, n - i - 1);
        b[i] /= f.lu(i, i);
    }
}

/// Explicit inverse: one LU solve per unit column, parallel over columns.
inline Matrix lu_invert(const LuFactor& f) {
    const int n = f.lu.rows;
    Matrix inv(n, n);
    parallel_for(n, 8, [&](std::int64_t lo, std::int64_t hi) {
        Vector col(n);
        for (std::int64_t j = lo; j < hi; ++j) {
            std::fill(col.begin(), col.end(), 0.0);
            col[static_cast<std::size_t>(j)] = 1.0;
            lu_solve(f, col.data());
            for (int i = 0; i < n; ++i) inv(i, static_cast<int>(j)) = col[i];
        }
    });
    return inv;
}

inline Matrix invert(const Matrix& a) { return lu_invert(lu_factor(a)); }

/// Largest singular value by power iteration on A^T A from a fixed
/// pseudo-random start; an estimate, not a certified bound.
inline double sigma_max_estimate(const Matrix& A, int iters = 16) {
    if (A.rows == 0 || A.cols == 0) return 0.0;
    Vector v(A.cols);
    SplitMix64 stream(0x51b3a7c0de0501ffull);
    for (auto& x : v) x = stream.next_unit() - 0.5;
    double nv = norm2(v);
    if (nv == 0.0) v[0] = nv = 1.0;
    for (auto& x : v) x /= nv;
    double sigma = 0.0;
    for (int it = 0; it < iters; ++it) {
        Vector u = matvec(A, v);
        sigma = norm2(u);
        if (sigma == 0.0) return 0.0;
        Vector w = matvec_transposed(A, u);
        const double nw = norm2(w);
        if (nw == 0.0) return sigma;
        for (int i = 0; i < A.cols; ++i) v[i] = w[i] / nw;
    }
    return sigma;
}

/// Condition estimate from explicit inverse: sigma_max(A) * sigma_max(A^-1).
inline double condition_estimate(const Matrix& A, const Matrix& A_inv) {
    return sigma_max_estimate(A) * sigma_max_estimate(A_inv);
}

} // namespace cvfr
