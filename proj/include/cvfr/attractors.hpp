#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cvfr/errors.hpp"
#include "cvfr/matrix.hpp"
#include "cvfr/spectral.hpp"

// Stationarity alphabet and attractor planting. A stationary component value
// x solves x = beta*lambda * x^2/(c + x^2); besides 0 that gives two roots
// (real when beta^2 lambda^2 > 4c). Binary class templates are mapped onto
// {0, hi} state vectors; their activation images become frozen eigenvector
// columns of the coupling.

namespace cvfr {

struct Alphabet {
    double zero = 0.0;
    double lo = 0.0; // smaller nonzero stationary value
    double hi = 0.0; // larger nonzero stationary value, used by patterns
    double planted_eigenvalue = 0.0;
    double hill_c = 0.0;
    double beta = 0.0;
};

inline Alphabet solve_alphabet(double planted_eigenvalue, double hill_c, double beta) {
    const double bl = beta * planted_eigenvalue;
    const double disc = bl * bl - 4.0 * hill_c;
    if (!(disc > 0.0))
        throw RealityConditionError("solve_alphabet: beta^2 lambda^2 - 4c must be positive");
    const double root = std::sqrt(disc);
    Alphabet a;
    a.lo = (bl - root) / 2.0;
    a.hi = (bl + root) / 2.0;
    a.planted_eigenvalue = planted_eigenvalue;
    a.hill_c = hill_c;
    a.beta = beta;
    return a;
}

using Pattern = std::vector<std::uint8_t>; // entries 0/1

struct AttractorSet {
    std::vector<Pattern> patterns;  // K binary templates, length n each
    std::vector<Vector> states;     // X_k, entries in {0, hi}
    std::vector<Vector> images;     // f(X_k), entries in {0, f(hi)}
    Alphabet alphabet;
    // Distinct-eigenvalue planting: one alphabet per class, each with its
    // own eigenvalue (and therefore its own root pair). Empty in the default
    // degenerate mode where every class shares `alphabet`.
    std::vector<Alphabet> per_class;

    int count() const { return static_cast<int>(states.size()); }
    int dim() const { return states.empty() ? 0 : static_cast<int>(states.front().size()); }
    bool degenerate() const { return per_class.empty(); }
    const Alphabet& alphabet_for(int k) const {
        return per_class.empty() ? alphabet : per_class[static_cast<std::size_t>(k)];
    }
};

/// Maps a binary pattern to its attractor state and activation image.
inline std::pair<Vector, Vector> pattern_to_attractor(const Pattern& pattern, const Alphabet& alphabet) {
    const std::size_t n = pattern.size();
    Vector state(n), image(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = pattern[i] ? alphabet.hi : 0.0;
        state[i] = x;
        image[i] = x * x / (alphabet.hill_c + x * x);
    }
    return {std::move(state), std::move(image)};
}

inline AttractorSet make_attractors(std::vector<Pattern> patterns, const Alphabet& alphabet) {
    AttractorSet set;
    set.alphabet = alphabet;
    set.patterns = std::move(patterns);
    set.states.reserve(set.patterns.size());
    set.images.reserve(set.patterns.size());
    for (const auto& p : set.patterns) {
        auto [state, image] = pattern_to_attractor(p, alphabet);
        set.states.push_back(std::move(state));
        set.images.push_back(std::move(image));
    }
    return set;
}

/// Distinct-eigenvalue planting: class k is built from alphabets[k], so each
/// class carries its own eigenvalue and root pair.
inline AttractorSet make_attractors(std::vector<Pattern> patterns, std::vector<Alphabet> alphabets) {
    if (patterns.size() != alphabets.size())
        throw DimensionError("make_attractors: one alphabet per pattern required");
    AttractorSet set;
    set.alphabet = alphabets.front();
    set.per_class = std::move(alphabets);
    set.patterns = std::move(patterns);
    set.states.reserve(set.patterns.size());
    set.images.reserve(set.patterns.size());
    for (std::size_t k = 0; k < set.patterns.size(); ++k) {
        auto [state, image] = pattern_to_attractor(set.patterns[k], set.per_class[k]);
        set.states.push_back(std::move(state));
        set.images.push_back(std::move(image));
    }
    return set;
}

namespace detail {

/// Modified Gram-Schmidt rank check; true if the vectors are numerically
/// independent (residual above 1e-10 of the original norm).
inline bool linearly_independent(const std::vector<Vector>& vecs) {
    std::vector<Vector> basis;
    for (const auto& v : vecs) {
        Vector r = v;
        const double orig = norm2(r);
        if (orig == 0.0) return false;
        for (const auto& b : basis) {
            const double coef = dot(r, b);
            for (std::size_t i = 0; i < r.size(); ++i) r[i] -= coef * b[i];
        }
        const double res = norm2(r);
        if (res <= 1e-10 * orig) return false;
        for (auto& x : r) x /= res;
        basis.push_back(std::move(r));
    }
    return true;
}

} // namespace detail

/// Plants the attractor images as the first k eigenvector columns with the
/// shared eigenvalue, then enforces the invertibility guard: if the
/// conditioning estimate exceeds 1e8 the free entries are redrawn with
/// seed+1 (repeatedly) before giving up.
inline SpectralCoupling embed(SpectralCoupling sc, const AttractorSet& attractors) {
    if (attractors.count() != sc.k)
        throw DimensionError("embed: attractor count differs from coupling k");
    if (attractors.dim() != sc.n)
        throw DimensionError("embed: attractor dimension differs from coupling n");
    if (!detail::linearly_independent(attractors.images))
        throw DependentAttractorsError("embed: planted images are linearly dependent");

    for (int j = 0; j < sc.k; ++j) {
        const Vector& img = attractors.images[static_cast<std::size_t>(j)];
        for (int i = 0; i < sc.n; ++i) sc.eigvecs(i, j) = img[static_cast<std::size_t>(i)];
        sc.eigvals[static_cast<std::size_t>(j)] = attractors.alphabet_for(j).planted_eigenvalue;
        sc.frozen_cols[static_cast<std::size_t>(j)] = 1;
    }

    constexpr int kMaxRedraws = 32;
    std::uint64_t try_seed = sc.seed;
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
        bool ok = false;
        try {
            const AssembledCoupling assembled = assemble_full(sc);
            ok = condition_estimate(sc.eigvecs, assembled.inverse_eigvecs) < 1e8;
        } catch (const SingularMatrixError&) {
            ok = false;
        }
        if (ok) return sc;
        ++try_seed;
        detail::draw_free_parameters(sc, try_seed);
    }
    throw SingularMatrixError("embed: could not reach an invertible eigenvector matrix");
}

// ---------------------------------------------------------------------------
// Pattern grid files: '0'/'1' rows, one grid per blank-line-separated block.
// ---------------------------------------------------------------------------

struct PatternGrids {
    int rows = 0;
    int cols = 0;
    std::vector<Pattern> patterns; // flattened row-major, rows*cols each
};

inline PatternGrids read_pattern_grids(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open pattern file: " + path);
    PatternGrids out;
    std::vector<std::string> block;
    std::string line;
    auto flush_block = [&]() {
        if (block.empty()) return;
        if (out.rows == 0) {
            out.rows = static_cast<int>(block.size());
            out.cols = static_cast<int>(block.front().size());
        }
        if (static_cast<int>(block.size()) != out.rows)
            throw Error(path + ": grid with " + std::to_string(block.size()) + " rows, expected " + std::to_string(out.rows));
        Pattern p;
        p.reserve(static_cast<std::size_t>(out.rows) * out.cols);
        for (const auto& row : block) {
            if (static_cast<int>(row.size()) != out.cols)
                throw Error(path + ": row width " + std::to_string(row.size()) + ", expected " + std::to_string(out.cols));
            for (char ch : row) {
                if (ch != '0' && ch != '1') throw Error(path + ": invalid character '" + std::string(1, ch) + "'");
                p.push_back(ch == '1' ? 1 : 0);
            }
        }
        out.patterns.push_back(std::move(p));
        block.clear();
    };
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) {
            flush_block();
        } else {
            block.push_back(line);
        }
    }
    flush_block();
    if (out.patterns.empty()) throw Error(path + ": no pattern grids found");
    return out;
}

} // namespace cvfr
