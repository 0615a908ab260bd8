#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cvfr/attractors.hpp"
#include "cvfr/matrix.hpp"
#include "cvfr/rng.hpp"
#include "cvfr/spectral.hpp"

namespace testutil {

/// |a - b| <= atol + rtol * max(|a|, |b|).
inline bool close(double a, double b, double rtol, double atol = 0.0) {
    return std::abs(a - b) <= atol + rtol * std::max(std::abs(a), std::abs(b));
}

inline cvfr::Matrix random_matrix(int rows, int cols, cvfr::SplitMix64& stream, double scale = 1.0) {
    cvfr::Matrix m(rows, cols);
    for (auto& v : m.data) v = scale * (2.0 * stream.next_unit() - 1.0);
    return m;
}

inline cvfr::Vector random_vector(int n, cvfr::SplitMix64& stream, double scale = 1.0) {
    cvfr::Vector v(static_cast<std::size_t>(n));
    for (auto& x : v) x = scale * (2.0 * stream.next_unit() - 1.0);
    return v;
}

/// Random binary patterns, pairwise distinct, non-empty, and with no nested
/// supports (a support contained in another ties the inner-product
/// criterion; real glyph templates are never nested).
inline std::vector<cvfr::Pattern> random_patterns(int k, int n, cvfr::SplitMix64& stream) {
    std::vector<cvfr::Pattern> out;
    while (static_cast<int>(out.size()) < k) {
        cvfr::Pattern p(static_cast<std::size_t>(n));
        int ones = 0;
        for (auto& bit : p) {
            bit = stream.next_unit() < 0.5 ? 0 : 1;
            ones += bit;
        }
        if (ones == 0 || ones == n) continue;
        bool rejected = false;
        for (const auto& q : out) {
            bool p_in_q = true, q_in_p = true;
            for (int i = 0; i < n; ++i) {
                p_in_q = p_in_q && (!p[static_cast<std::size_t>(i)] || q[static_cast<std::size_t>(i)]);
                q_in_p = q_in_p && (!q[static_cast<std::size_t>(i)] || p[static_cast<std::size_t>(i)]);
            }
            rejected = rejected || p_in_q || q_in_p;
        }
        if (!rejected) out.push_back(std::move(p));
    }
    return out;
}

/// A small planted model for tests: beta*lambda = 5, c = 1.
inline std::pair<cvfr::SpectralCoupling, cvfr::AttractorSet> planted_model(int n, int k, std::uint64_t seed) {
    const double beta = 1.0 / std::sqrt(static_cast<double>(n));
    const double lambda = 5.0 / beta;
    cvfr::SplitMix64 stream(cvfr::derive_seed(seed, 0x9A));
    const auto patterns = random_patterns(k, n, stream);
    const auto alphabet = cvfr::solve_alphabet(lambda, 1.0, beta);
    auto attractors = cvfr::make_attractors(patterns, alphabet);
    auto sc = cvfr::new_spectral_coupling(n, k, lambda, 1.0, seed);
    sc = cvfr::embed(std::move(sc), attractors);
    return {std::move(sc), std::move(attractors)};
}

/// Fresh temp file path (not created).
inline std::string temp_path(const std::string& tag) {
    static int counter = 0;
    const auto dir = std::filesystem::temp_directory_path();
    return (dir / ("cvfr_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++)))
        .string();
}

inline void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void append_be32(std::vector<unsigned char>& bytes, std::uint32_t v) {
    bytes.push_back(static_cast<unsigned char>(v >> 24));
    bytes.push_back(static_cast<unsigned char>(v >> 16));
    bytes.push_back(static_cast<unsigned char>(v >> 8));
    bytes.push_back(static_cast<unsigned char>(v));
}

/// Largest eigenvalue of a symmetric matrix by shifted power iteration with
/// Rayleigh quotient; independent of the QR path.
inline double rayleigh_power_max(const cvfr::Matrix& m, int iters = 5000) {
    double shift = 0.0;
    for (double v : m.data) shift += v * v;
    shift = std::sqrt(shift) + 1.0;
    cvfr::SplitMix64 stream(0xBEEF);
    cvfr::Vector v = random_vector(m.rows, stream);
    double nv = cvfr::norm2(v);
    for (auto& x : v) x /= nv;
    double rayleigh = 0.0;
    for (int it = 0; it < iters; ++it) {
        cvfr::Vector w = cvfr::matvec(m, v);
        for (int i = 0; i < m.rows; ++i) w[static_cast<std::size_t>(i)] += shift * v[static_cast<std::size_t>(i)];
        const double nw = cvfr::norm2(w);
        for (auto& x : w) x /= nw;
        v = std::move(w);
        cvfr::Vector mv = cvfr::matvec(m, v);
        rayleigh = cvfr::dot(v, mv);
    }
    return rayleigh;
}

} // namespace testutil
