#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>

#include "cvfr/eigenvalues.hpp"
#include "test_helpers.hpp"

using namespace cvfr;

namespace {

std::vector<std::complex<double>> sorted_eigs(std::vector<std::complex<double>> v) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return v;
}

/// Random orthogonal matrix from Gram-Schmidt on a random square matrix.
Matrix random_orthogonal(int n, SplitMix64& stream) {
    Matrix q = testutil::random_matrix(n, n, stream);
    for (int j = 0; j < n; ++j) {
        for (int prev = 0; prev < j; ++prev) {
            double coef = 0.0;
            for (int i = 0; i < n; ++i) coef += q(i, j) * q(i, prev);
            for (int i = 0; i < n; ++i) q(i, j) -= coef * q(i, prev);
        }
        double norm = 0.0;
        for (int i = 0; i < n; ++i) norm += q(i, j) * q(i, j);
        norm = std::sqrt(norm);
        REQUIRE(norm > 1e-8);
        for (int i = 0; i < n; ++i) q(i, j) /= norm;
    }
    return q;
}

} // namespace

TEST_CASE("diagonal, identity, and trivial sizes") {
    Matrix d(3, 3);
    d(0, 0) = -2.0;
    d(1, 1) = -0.5;
    d(2, 2) = -3.0;
    auto eigs = sorted_eigs(eigenvalues(d));
    CHECK(eigs[0].real() == doctest::Approx(-3.0).epsilon(1e-12));
    CHECK(eigs[1].real() == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(eigs[2].real() == doctest::Approx(-0.5).epsilon(1e-12));
    for (const auto& e : eigs) CHECK(e.imag() == 0.0);

    Matrix one(1, 1);
    one(0, 0) = 4.25;
    CHECK(eigenvalues(one)[0] == std::complex<double>(4.25, 0.0));

    Matrix zero(5, 5);
    for (const auto& e : eigenvalues(zero)) CHECK(std::abs(e) == 0.0);

    Matrix neg_eye(5, 5);
    for (int i = 0; i < 5; ++i) neg_eye(i, i) = -1.0;
    for (const auto& e : eigenvalues(neg_eye)) {
        CHECK(e.real() == doctest::Approx(-1.0).epsilon(1e-14));
        CHECK(e.imag() == 0.0);
    }
}

TEST_CASE("rotation block gives the complex pair -1 +- 5i") {
    Matrix m(2, 2);
    m(0, 0) = -1.0;
    m(0, 1) = 5.0;
    m(1, 0) = -5.0;
    m(1, 1) = -1.0;
    auto eigs = sorted_eigs(eigenvalues(m));
    CHECK(eigs[0].real() == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(eigs[1].real() == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(eigs[0].imag() == doctest::Approx(-5.0).epsilon(1e-12));
    CHECK(eigs[1].imag() == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("companion matrix recovers known roots") {
    // x^3 - 6x^2 + 11x - 6 = (x-1)(x-2)(x-3)
    Matrix c(3, 3);
    c(0, 0) = 6.0;
    c(0, 1) = -11.0;
    c(0, 2) = 6.0;
    c(1, 0) = 1.0;
    c(2, 1) = 1.0;
    auto eigs = sorted_eigs(eigenvalues(c));
    CHECK(eigs[0].real() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(eigs[1].real() == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(eigs[2].real() == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("similarity transform of a known spectrum") {
    SplitMix64 stream(11);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 4 + static_cast<int>(stream.next_below(5));
        Vector spec(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) spec[static_cast<std::size_t>(i)] = std::round(100.0 * (stream.next_unit() * 6.0 - 3.0)) / 100.0;
        std::sort(spec.begin(), spec.end());
        Matrix d(n, n);
        for (int i = 0; i < n; ++i) d(i, i) = spec[static_cast<std::size_t>(i)];
        const Matrix q = random_orthogonal(n, stream);
        const Matrix m = matmul(q, matmul(d, transpose(q)));
        auto eigs = sorted_eigs(eigenvalues(m));
        for (int i = 0; i < n; ++i) {
            CHECK(testutil::close(eigs[static_cast<std::size_t>(i)].real(), spec[static_cast<std::size_t>(i)], 1e-8, 1e-8));
            CHECK(std::abs(eigs[static_cast<std::size_t>(i)].imag()) < 1e-7);
        }
    }
}

TEST_CASE("similarity invariance for random matrices") {
    SplitMix64 stream(13);
    for (int trial = 0; trial < 8; ++trial) {
        const int n = 3 + static_cast<int>(stream.next_below(6));
        const Matrix j = testutil::random_matrix(n, n, stream);
        Matrix p = testutil::random_matrix(n, n, stream);
        for (int i = 0; i < n; ++i) p(i, i) += 3.0; // keep P well conditioned
        const Matrix pjp = matmul(p, matmul(j, invert(p)));
        auto a = sorted_eigs(eigenvalues(j));
        auto b = sorted_eigs(eigenvalues(pjp));
        for (int i = 0; i < n; ++i) {
            CHECK(testutil::close(a[static_cast<std::size_t>(i)].real(), b[static_cast<std::size_t>(i)].real(), 1e-6, 1e-6));
            CHECK(testutil::close(a[static_cast<std::size_t>(i)].imag(), b[static_cast<std::size_t>(i)].imag(), 1e-6, 1e-6));
        }
    }
}

TEST_CASE("symmetric spectra match the Rayleigh power-iteration oracle") {
    SplitMix64 stream(15);
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 8;
        Matrix s = testutil::random_matrix(n, n, stream);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < i; ++j) s(i, j) = s(j, i);
        double max_real = -1e300;
        for (const auto& e : eigenvalues(s)) {
            max_real = std::max(max_real, e.real());
            CHECK(std::abs(e.imag()) < 1e-9);
        }
        const double oracle = testutil::rayleigh_power_max(s);
        CHECK(testutil::close(max_real, oracle, 1e-8, 1e-8));
    }
}

TEST_CASE("eigenvalue sum and product match trace and determinant") {
    SplitMix64 stream(19);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 2 + static_cast<int>(stream.next_below(7));
        const Matrix m = testutil::random_matrix(n, n, stream);
        double trace = 0.0;
        for (int i = 0; i < n; ++i) trace += m(i, i);
        std::complex<double> sum = 0.0, prod = 1.0;
        for (const auto& e : eigenvalues(m)) {
            sum += e;
            prod *= e;
        }
        CHECK(testutil::close(sum.real(), trace, 1e-9, 1e-9));
        CHECK(std::abs(sum.imag()) < 1e-9);
        // Determinant via LU (may legitimately be near zero; loose bound).
        double det = 1.0;
        int swaps = 0;
        try {
            LuFactor f = lu_factor(m);
            for (int i = 0; i < n; ++i) {
                det *= f.lu(i, i);
                if (f.piv[static_cast<std::size_t>(i)] != i) ++swaps;
            }
            if (swaps % 2 == 1) det = -det;
            CHECK(testutil::close(prod.real(), det, 1e-7, 1e-7));
            CHECK(std::abs(prod.imag()) < 1e-7);
        } catch (const SingularMatrixError&) {
            // fine: exactly singular random draw (vanishingly unlikely)
        }
    }
}

TEST_CASE("non-finite input is rejected") {
    Matrix m(2, 2);
    m(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(eigenvalues(m), NonFiniteStateError);
}
