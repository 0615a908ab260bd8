#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "cvfr/errors.hpp"
#include "cvfr/matrix.hpp"
#include "cvfr/rng.hpp"

// Spectrally parameterized coupling matrix A = V diag(w) V^-1 where the
// first k columns of V (and the first k diagonal entries of w) are frozen to
// the planted attractor images and their shared eigenvalue. Only the
// remaining columns/eigenvalues train.

namespace cvfr {

struct SpectralCoupling {
    int n = 0;                          // neurons / pixels
    int k = 0;                          // planted attractors / classes
    Matrix eigvecs;                     // n x n; columns [0, k) frozen after embedding
    Vector eigvals;                     // length n; entries [0, k) frozen
    double planted_eigenvalue = 0.0;    // shared eigenvalue of the planted columns
    double hill_c = 1.0;                // activation constant
    double beta = 0.0;                  // 1/sqrt(n), exactly
    std::vector<std::uint8_t> frozen_cols; // length n, 1 for frozen
    std::uint64_t seed = 0;             // seed the free entries were drawn from

    bool frozen(int col) const { return frozen_cols[static_cast<std::size_t>(col)] != 0; }
};

namespace detail {

inline constexpr std::uint64_t kSeedTagEigvecs = 0xA0;
inline constexpr std::uint64_t kSeedTagEigvals = 0xA1;

/// (Re)draws the trainable entries: free eigvec entries ~ N(0, 1/n) in
/// row-major order over columns [k, n), free eigenvalues ~ U[-1, 0).
inline void draw_free_parameters(SpectralCoupling& sc, std::uint64_t seed) {
    const double std_dev = 1.0 / std::sqrt(static_cast<double>(sc.n));
    const std::uint64_t vec_seed = derive_seed(seed, kSeedTagEigvecs);
    std::uint64_t counter = 0;
    for (int i = 0; i < sc.n; ++i) {
        for (int j = sc.k; j < sc.n; ++j) {
            sc.eigvecs(i, j) = std_dev * gauss_unit_at(vec_seed, counter++);
        }
    }
    const std::uint64_t val_seed = derive_seed(seed, kSeedTagEigvals);
    for (int j = sc.k; j < sc.n; ++j) {
        sc.eigvals[static_cast<std::size_t>(j)] = uniform_at(val_seed, static_cast<std::uint64_t>(j - sc.k)) - 1.0;
    }
    sc.seed = seed;
}

} // namespace detail

/// Fresh coupling with zeroed planted columns (filled by embedding) and
/// seeded random free parameters.
inline SpectralCoupling new_spectral_coupling(int n, int k, double planted_eigenvalue,
                                              double hill_c, std::uint64_t seed) {
    if (n <= 0 || k <= 0) throw DimensionError("new_spectral_coupling: n and k must be positive");
    if (k > n) throw DimensionError("new_spectral_coupling: k exceeds n");
    if (!(hill_c > 0.0)) throw RealityConditionError("new_spectral_coupling: c must be positive");
    if (!(hill_c < planted_eigenvalue * planted_eigenvalue / (4.0 * n)))
        throw RealityConditionError("new_spectral_coupling: c >= lambda^2/(4n), stationary values would be complex");

    SpectralCoupling sc;
    sc.n = n;
    sc.k = k;
    sc.eigvecs = Matrix(n, n);
    sc.eigvals.assign(static_cast<std::size_t>(n), 0.0);
    sc.planted_eigenvalue = planted_eigenvalue;
    sc.hill_c = hill_c;
    sc.beta = 1.0 / std::sqrt(static_cast<double>(n));
    sc.frozen_cols.assign(static_cast<std::size_t>(n), 0);
    for (int j = 0; j < k; ++j) {
        sc.frozen_cols[static_cast<std::size_t>(j)] = 1;
        sc.eigvals[static_cast<std::size_t>(j)] = planted_eigenvalue;
    }
    detail::draw_free_parameters(sc, seed);
    return sc;
}

/// Coupling matrix together with the eigenvector inverse used to build it.
struct AssembledCoupling {
    Matrix coupling;        // A = V diag(w) V^-1
    Matrix inverse_eigvecs; // V^-1, refined
};

/// Assembles A = V diag(w) V^-1. The LU inverse gets one Newton refinement
/// step (B <- B(2I - VB)) so the planted eigen-relation survives moderately
/// ill-conditioned V.
inline AssembledCoupling assemble_full(const SpectralCoupling& sc) {
    Matrix inv;
    try {
        inv = lu_invert(lu_factor(sc.eigvecs));
    } catch (const SingularMatrixError&) {
        throw SingularMatrixError("assemble: eigenvector matrix is singular");
    }
    // Newton step: residual R = I - V B, B += B R.
    Matrix r = matmul(sc.eigvecs, inv);
    for (int i = 0; i < sc.n; ++i) {
        double* rr = r.row(i);
        for (int j = 0; j < sc.n; ++j) rr[j] = (i == j ? 1.0 : 0.0) - rr[j];
    }
    double resid = 0.0;
    for (double v : r.data) resid = std::max(resid, std::abs(v));
    if (!(resid < 1e-4)) throw SingularMatrixError("assemble: inverse residual too large");
    Matrix correction = matmul(inv, r);
    for (std::size_t i = 0; i < inv.data.size(); ++i) inv.data[i] += correction.data[i];

    // A = V * (diag(w) B): scale rows of B by the eigenvalues, then multiply.
    Matrix scaled = inv;
    for (int i = 0; i < sc.n; ++i) {
        const double w = sc.eigvals[static_cast<std::size_t>(i)];
        double* row = scaled.row(i);
        for (int j = 0; j < sc.n; ++j) row[j] *= w;
    }
    AssembledCoupling out;
    out.coupling = matmul(sc.eigvecs, scaled);
    out.inverse_eigvecs = std::move(inv);
    return out;
}

inline Matrix assemble(const SpectralCoupling& sc) { return assemble_full(sc).coupling; }

struct CouplingGradients {
    Matrix eigvecs; // same shape as V, frozen columns zeroed
    Vector eigvals; // length n, frozen entries zeroed
};

/// Adjoint of the assembly. With B = V^-1 and G = dL/dA:
///   dL/dw   = diag(V^T G B^T)
///   dL/dV   = G B^T diag(w) - B^T (diag(w) V^T G) B^T
/// Frozen columns/entries are zeroed before returning.
inline CouplingGradients backprop_assemble_with(const SpectralCoupling& sc,
                                                const AssembledCoupling& assembled,
                                                const Matrix& grad_coupling) {
    const int n = sc.n;
    if (grad_coupling.rows != n || grad_coupling.cols != n)
        throw DimensionError("backprop_assemble: gradient shape mismatch");

    const Matrix bt = transpose(assembled.inverse_eigvecs);
    const Matrix gbt = matmul(grad_coupling, bt);

    CouplingGradients out;
    out.eigvals.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int a = 0; a < n; ++a) s += sc.eigvecs(a, i) * gbt(a, i);
        out.eigvals[static_cast<std::size_t>(i)] = s;
    }

    // term1 = (G B^T) diag(w)
    Matrix term1 = gbt;
    for (int i = 0; i < n; ++i) {
        double* row = term1.row(i);
        for (int j = 0; j < n; ++j) row[j] *= sc.eigvals[static_cast<std::size_t>(j)];
    }
    // term2 = B^T (diag(w) V^T G) B^T
    Matrix s = matmul(transpose(sc.eigvecs), grad_coupling);
    for (int i = 0; i < n; ++i) {
        const double w = sc.eigvals[static_cast<std::size_t>(i)];
        double* row = s.row(i);
        for (int j = 0; j < n; ++j) row[j] *= w;
    }
    Matrix term2 = matmul(bt, matmul(s, bt));

    out.eigvecs = Matrix(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) out.eigvecs(i, j) = term1(i, j) - term2(i, j);
    }

    // Frozen parameters never receive gradient.
    for (int j = 0; j < n; ++j) {
        if (!sc.frozen(j)) continue;
        for (int i = 0; i < n; ++i) out.eigvecs(i, j) = 0.0;
        out.eigvals[static_cast<std::size_t>(j)] = 0.0;
    }
    return out;
}

inline CouplingGradients backprop_assemble(const SpectralCoupling& sc, const Matrix& grad_coupling) {
    return backprop_assemble_with(sc, assemble_full(sc), grad_coupling);
}

} // namespace cvfr
