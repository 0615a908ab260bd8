#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "cvfr/errors.hpp"
#include "cvfr/matrix.hpp"

// Eigenvalues of a dense real non-symmetric matrix: Householder reduction to
// upper Hessenberg form, then Francis double-shift QR with deflation,
// eigenvalues read off 1x1 and 2x2 diagonal blocks. No eigenvectors.

namespace cvfr {

namespace detail {

inline void hessenberg_reduce(Matrix& a) {
    const int n = a.rows;
    Vector v(n), w(n);
    for (int k = 0; k + 2 < n; ++k) {
        // Householder vector for column k, rows k+1..n-1.
        double scale = 0.0;
        for (int i = k + 1; i < n; ++i) scale = std::max(scale, std::abs(a(i, k)));
        if (scale == 0.0) continue;
        double ssq = 0.0;
        for (int i = k + 1; i < n; ++i) {
            const double t = a(i, k) / scale;
            ssq += t * t;
        }
        const double x1 = a(k + 1, k);
        double sigma = scale * std::sqrt(ssq);
        if (x1 < 0.0) sigma = -sigma;
        for (int i = k + 1; i < n; ++i) v[i] = a(i, k);
        v[k + 1] += sigma;
        const double vtv = 2.0 * sigma * (sigma + x1);
        if (vtv == 0.0) continue;
        const double two_over_vtv = 2.0 / vtv;

        // Left: A[k+1.., k..] -= (2/v'v) v (v' A).
        for (int j = k; j < n; ++j) {
            double s = 0.0;
            for (int i = k + 1; i < n; ++i) s += v[i] * a(i, j);
            w[j] = s * two_over_vtv;
        }
        for (int i = k + 1; i < n; ++i) {
            const double vi = v[i];
            if (vi != 0.0) axpy(-vi, w.data() + k, a.row(i) + k, n - k);
        }
        // Right: A[.., k+1..] -= (2/v'v) (A v) v'.
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            const double* arow = a.row(i);
            for (int j = k + 1; j < n; ++j) s += arow[j] * v[j];
            w[i] = s * two_over_vtv;
        }
        for (int i = 0; i < n; ++i) {
            const double wi = w[i];
            if (wi != 0.0) {
                double* arow = a.row(i);
                for (int j = k + 1; j < n; ++j) arow[j] -= wi * v[j];
            }
        }
        a(k + 1, k) = -sigma;
        for (int i = k + 2; i < n; ++i) a(i, k) = 0.0;
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix; destroys h.
inline void hessenberg_qr_eigenvalues(Matrix& h, Vector& wr, Vector& wi, int iteration_budget) {
    const int n = h.rows;
    wr.assign(n, 0.0);
    wi.assign(n, 0.0);
    if (n == 0) return;
    const double eps = std::numeric_limits<double>::epsilon();

    double anorm = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(h(i, j));
    if (anorm == 0.0) return; // zero matrix: all eigenvalues zero

    int en = n - 1;
    double t = 0.0; // accumulated exceptional shift
    int total_iters = 0;

    while (en >= 0) {
        int its = 0;
        for (;;) {
            // Look for a single negligible subdiagonal element.
            int l;
            for (l = en; l >= 1; --l) {
                double s = std::abs(h(l - 1, l - 1)) + std::abs(h(l, l));
                if (s == 0.0) s = anorm;
                if (std::abs(h(l, l - 1)) <= eps * s) {
                    h(l, l - 1) = 0.0;
                    break;
                }
            }
            if (l < 0) l = 0;

            double x = h(en, en);
            if (l == en) { // 1x1 block
                wr[en] = x + t;
                wi[en] = 0.0;
                --en;
                break;
            }
            double y = h(en - 1, en - 1);
            double w = h(en, en - 1) * h(en - 1, en);
            if (l == en - 1) { // 2x2 block
                double p = 0.5 * (y - x);
                double q = p * p + w;
                double z = std::sqrt(std::abs(q));
                x += t;
                if (q >= 0.0) { // real pair
                    z = p + (p >= 0.0 ? std::abs(z) : -std::abs(z));
                    wr[en - 1] = wr[en] = x + z;
                    if (z != 0.0) wr[en] = x - w / z;
                    wi[en - 1] = wi[en] = 0.0;
                } else { // complex conjugate pair
                    wr[en - 1] = wr[en] = x + p;
                    wi[en - 1] = z;
                    wi[en] = -z;
                }
                en -= 2;
                break;
            }

            if (total_iters >= iteration_budget)
                throw ConvergenceError("eigenvalue QR iteration exceeded budget");
            if (its == 10 || its == 20) { // exceptional shift
                t += x;
                for (int i = 0; i <= en; ++i) h(i, i) -= x;
                double s = std::abs(h(en, en - 1)) + std::abs(h(en - 1, en - 2));
                x = y = 0.75 * s;
                w = -0.4375 * s * s;
            }
            ++its;
            ++total_iters;

            // Form the first column of (H - a I)(H - b I) and look for two
            // consecutive small subdiagonals to start the bulge chase at.
            int m;
            double p = 0.0, q = 0.0, r = 0.0;
            for (m = en - 2; m >= l; --m) {
                double z = h(m, m);
                double rr = x - z;
                double ss = y - z;
                p = (rr * ss - w) / h(m + 1, m) + h(m, m + 1);
                q = h(m + 1, m + 1) - z - rr - ss;
                r = h(m + 2, m + 1);
                double s = std::abs(p) + std::abs(q) + std::abs(r);
                p /= s;
                q /= s;
                r /= s;
                if (m == l) break;
                const double u = std::abs(h(m, m - 1)) * (std::abs(q) + std::abs(r));
                const double v = std::abs(p) * (std::abs(h(m - 1, m - 1)) + std::abs(z) + std::abs(h(m + 1, m + 1)));
                if (u <= eps * v) break;
            }
            for (int i = m + 2; i <= en; ++i) h(i, i - 2) = 0.0;
            for (int i = m + 3; i <= en; ++i) h(i, i - 3) = 0.0;

            // Double QR sweep on rows l..en, columns m..en.
            for (int k = m; k <= en - 1; ++k) {
                const bool notlast = (k != en - 1);
                if (k != m) {
                    p = h(k, k - 1);
                    q = h(k + 1, k - 1);
                    r = notlast ? h(k + 2, k - 1) : 0.0;
                    x = std::abs(p) + std::abs(q) + std::abs(r);
                    if (x == 0.0) continue;
                    p /= x;
                    q /= x;
                    r /= x;
                }
                double s = std::sqrt(p * p + q * q + r * r);
                if (p < 0.0) s = -s;
                if (k != m) {
                    h(k, k - 1) = -s * x;
                } else if (l != m) {
                    h(k, k - 1) = -h(k, k - 1);
                }
                p += s;
                x = p / s;
                y = q / s;
                double z = r / s;
                q /= p;
                r /= p;
                for (int j = k; j <= en; ++j) { // row modification
                    double pp = h(k, j) + q * h(k + 1, j);
                    if (notlast) {
                        pp += r * h(k + 2, j);
                        h(k + 2, j) -= pp * z;
                    }
                    h(k + 1, j) -= pp * y;
                    h(k, j) -= pp * x;
                }
                const int last_row = std::min(en, k + 3);
                for (int i = l; i <= last_row; ++i) { // column modification
                    double pp = x * h(i, k) + y * h(i, k + 1);
                    if (notlast) {
                        pp += z * h(i, k + 2);
                        h(i, k + 2) -= pp * r;
                    }
                    h(i, k + 1) -= pp * q;
                    h(i, k) -= pp;
                }
            }
        }
    }
}

} // namespace detail

/// All eigenvalues of a square real matrix, unordered.
/// Iteration budget: 100 * n QR sweeps in total.
inline std::vector<std::complex<double>> eigenvalues(const Matrix& a) {
    if (a.rows != a.cols) throw DimensionError("eigenvalues: matrix not square");
    if (!all_finite(a.data.data(), a.data.size()))
        throw NonFiniteStateError("eigenvalues: matrix has non-finite entries");
    Matrix h = a;
    detail::hessenberg_reduce(h);
    Vector wr, wi;
    detail::hessenberg_qr_eigenvalues(h, wr, wi, 100 * a.rows);
    std::vector<std::complex<double>> out(a.rows);
    for (int i = 0; i < a.rows; ++i) out[i] = {wr[i], wi[i]};
    return out;
}

} // namespace cvfr
