#include <doctest.h>

#include <cmath>

#include "cvfr/spectral.hpp"
#include "test_helpers.hpp"

using namespace cvfr;

TEST_CASE("construction counts free parameters and validates inputs") {
    const double lambda = 5.0 * std::sqrt(8.0);
    const SpectralCoupling sc = new_spectral_coupling(8, 2, lambda, 1.0, 7);
    CHECK(sc.beta == 1.0 / std::sqrt(8.0));
    int frozen = 0, free_nonzero = 0;
    for (int j = 0; j < 8; ++j) {
        if (sc.frozen(j)) {
            ++frozen;
            for (int i = 0; i < 8; ++i) CHECK(sc.eigvecs(i, j) == 0.0); // zero until embedding
            CHECK(sc.eigvals[static_cast<std::size_t>(j)] == lambda);
        } else {
            for (int i = 0; i < 8; ++i) free_nonzero += sc.eigvecs(i, j) != 0.0;
            CHECK(sc.eigvals[static_cast<std::size_t>(j)] >= -1.0);
            CHECK(sc.eigvals[static_cast<std::size_t>(j)] < 0.0);
        }
    }
    CHECK(frozen == 2);
    CHECK(free_nonzero == 48); // 6 free columns x 8 rows

    CHECK_THROWS_AS(new_spectral_coupling(4, 2, 1.0, 1.0, 0), RealityConditionError); // 1 >= 1/16
    CHECK_THROWS_AS(new_spectral_coupling(4, 5, 40.0, 1.0, 0), DimensionError);
}

TEST_CASE("identical seeds give bit-identical free parameters") {
    const double lambda = 5.0 * std::sqrt(8.0);
    const SpectralCoupling a = new_spectral_coupling(8, 2, lambda, 1.0, 123);
    const SpectralCoupling b = new_spectral_coupling(8, 2, lambda, 1.0, 123);
    const SpectralCoupling c = new_spectral_coupling(8, 2, lambda, 1.0, 124);
    CHECK(a.eigvecs.data == b.eigvecs.data);
    CHECK(a.eigvals == b.eigvals);
    CHECK(a.eigvecs.data != c.eigvecs.data);
}

TEST_CASE("free entries follow the declared scales") {
    const int n = 64;
    const double lambda = 5.0 * std::sqrt(static_cast<double>(n));
    const SpectralCoupling sc = new_spectral_coupling(n, 2, lambda, 1.0, 5);
    double sum = 0.0, sum_sq = 0.0;
    int count = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 2; j < n; ++j) {
            sum += sc.eigvecs(i, j);
            sum_sq += sc.eigvecs(i, j) * sc.eigvecs(i, j);
            ++count;
        }
    const double mean = sum / count;
    const double var = sum_sq / count - mean * mean;
    CHECK(std::abs(mean) < 4.0 / (std::sqrt(static_cast<double>(n)) * std::sqrt(static_cast<double>(count))));
    CHECK(var == doctest::Approx(1.0 / n).epsilon(0.15));
}

TEST_CASE("assemble of an identity eigenbasis is the diagonal") {
    SpectralCoupling sc;
    sc.n = 2;
    sc.k = 1;
    sc.eigvecs = Matrix::identity(2);
    sc.eigvals = {2.0, 3.0};
    sc.planted_eigenvalue = 2.0;
    sc.hill_c = 1.0;
    sc.beta = 1.0 / std::sqrt(2.0);
    sc.frozen_cols = {1, 0};
    const Matrix a = assemble(sc);
    CHECK(a(0, 0) == 2.0);
    CHECK(a(1, 1) == 3.0);
    CHECK(a(0, 1) == 0.0);
    CHECK(a(1, 0) == 0.0);
}

TEST_CASE("unit eigenvalues reproduce the identity for any basis") {
    SplitMix64 stream(21);
    SpectralCoupling sc;
    sc.n = 5;
    sc.k = 1;
    sc.eigvecs = testutil::random_matrix(5, 5, stream);
    for (int i = 0; i < 5; ++i) sc.eigvecs(i, i) += 2.0;
    sc.eigvals.assign(5, 1.0);
    sc.planted_eigenvalue = 1.0;
    sc.hill_c = 0.01;
    sc.beta = 1.0 / std::sqrt(5.0);
    sc.frozen_cols.assign(5, 0);
    const Matrix a = assemble(sc);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) CHECK(std::abs(a(i, j) - (i == j ? 1.0 : 0.0)) < 1e-10);
}

TEST_CASE("assembly adjoint: zero gradient, masking, finite differences") {
    auto [sc, attractors] = testutil::planted_model(6, 2, 31);
    const AssembledCoupling assembled = assemble_full(sc);
    const int n = sc.n;

    SUBCASE("zero upstream gradient gives zero parameter gradients") {
        const CouplingGradients g = backprop_assemble(sc, Matrix(n, n));
        for (double v : g.eigvecs.data) CHECK(v == 0.0);
        for (double v : g.eigvals) CHECK(v == 0.0);
    }

    SUBCASE("frozen entries are exactly zero, and finite differences confirm the rest") {
        // Scalar probe L(A) = sum_ij W_ij A_ij with fixed random weights.
        SplitMix64 stream(77);
        const Matrix w = testutil::random_matrix(n, n, stream);
        const CouplingGradients g = backprop_assemble(sc, w);
        for (int j = 0; j < sc.k; ++j) {
            CHECK(g.eigvals[static_cast<std::size_t>(j)] == 0.0);
            for (int i = 0; i < n; ++i) CHECK(g.eigvecs(i, j) == 0.0);
        }
        const auto probe = [&](const SpectralCoupling& s) {
            const Matrix a = assemble(s);
            double acc = 0.0;
            for (std::size_t i = 0; i < a.data.size(); ++i) acc += w.data[i] * a.data[i];
            return acc;
        };
        const double h = 1e-6;
        for (int j = sc.k; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                SpectralCoupling plus = sc, minus = sc;
                plus.eigvecs(i, j) += h;
                minus.eigvecs(i, j) -= h;
                const double fd = (probe(plus) - probe(minus)) / (2.0 * h);
                CHECK(testutil::close(g.eigvecs(i, j), fd, 1e-5, 1e-8));
            }
            SpectralCoupling plus = sc, minus = sc;
            plus.eigvals[static_cast<std::size_t>(j)] += h;
            minus.eigvals[static_cast<std::size_t>(j)] -= h;
            const double fd = (probe(plus) - probe(minus)) / (2.0 * h);
            CHECK(testutil::close(g.eigvals[static_cast<std::size_t>(j)], fd, 1e-5, 1e-8));
        }
    }

    SUBCASE("cached-assembly overload matches the recomputing one") {
        SplitMix64 stream(78);
        const Matrix w = testutil::random_matrix(n, n, stream);
        const CouplingGradients a = backprop_assemble(sc, w);
        const CouplingGradients b = backprop_assemble_with(sc, assembled, w);
        CHECK(a.eigvecs.data == b.eigvecs.data);
        CHECK(a.eigvals == b.eigvals);
    }
}

TEST_CASE("assemble rejects a singular eigenbasis") {
    SpectralCoupling sc;
    sc.n = 3;
    sc.k = 1;
    sc.eigvecs = Matrix(3, 3); // all zero
    sc.eigvals.assign(3, 1.0);
    sc.hill_c = 1.0;
    sc.beta = 1.0 / std::sqrt(3.0);
    sc.frozen_cols.assign(3, 0);
    CHECK_THROWS_AS(assemble(sc), SingularMatrixError);
}
