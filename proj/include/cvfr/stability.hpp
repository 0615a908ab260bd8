#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <vector>

#include "cvfr/attractors.hpp"
#include "cvfr/dynamics.hpp"
#include "cvfr/eigenvalues.hpp"
#include "cvfr/matrix.hpp"
#include "cvfr/spectral.hpp"

// Linear stability of stationary states: J = -I + beta * A * diag(f'(x_s)).
// A state is certified stable when the spectral abscissa (maximum real part
// of the Jacobian spectrum) lies below -tol_margin.

namespace cvfr {

inline constexpr double kStationarityTol = 1e-8;
inline constexpr double kStabilityMargin = 1e-8;

/// Jacobian of the dynamics at x_s. Warns (stderr, and via the optional
/// flag) when x_s fails the stationarity residual check instead of failing:
/// the Jacobian is still well defined.
inline Matrix jacobian_at(const Vector& x_s, const Matrix& coupling, double c, double beta,
                          bool* stationary = nullptr) {
    const int n = static_cast<int>(x_s.size());
    const Vector rhs = rhs_deterministic(x_s, coupling, c, beta);
    const bool is_stationary = norm_inf(rhs) < kStationarityTol;
    if (stationary) *stationary = is_stationary;
    if (!is_stationary)
        std::fprintf(stderr, "warning: jacobian_at: residual %.3e exceeds %.1e, state is not stationary\n",
                     norm_inf(rhs), kStationarityTol);
    Matrix j(n, n);
    for (int col = 0; col < n; ++col) {
        const double fp = hill_prime(x_s[static_cast<std::size_t>(col)], c);
        for (int row = 0; row < n; ++row) j(row, col) = beta * coupling(row, col) * fp;
    }
    for (int i = 0; i < n; ++i) j(i, i) -= 1.0;
    return j;
}

/// Maximum real part over the eigenvalues of a square real matrix.
inline double spectral_abscissa(const Matrix& j) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& ev : eigenvalues(j)) worst = std::max(worst, ev.real());
    return worst;
}

struct StabilityReport {
    double abscissa = 0.0; // max over attractors
    bool stable = false;   // abscissa < -kStabilityMargin
    std::vector<std::pair<int, double>> per_attractor;
    std::vector<bool> stationary; // residual check result per attractor
};

inline StabilityReport stability_report(const SpectralCoupling& sc, const AttractorSet& attractors) {
    const Matrix coupling = assemble(sc);
    StabilityReport report;
    report.per_attractor.resize(attractors.states.size());
    report.stationary.resize(attractors.states.size());
    parallel_for(static_cast<std::int64_t>(attractors.states.size()), 1,
                 [&](std::int64_t lo, std::int64_t hi) {
                     for (std::int64_t k = lo; k < hi; ++k) {
                         bool stationary = false;
                         const Matrix j = jacobian_at(attractors.states[static_cast<std::size_t>(k)], coupling,
                                                      sc.hill_c, sc.beta, &stationary);
                         report.per_attractor[static_cast<std::size_t>(k)] = {static_cast<int>(k),
                                                                              spectral_abscissa(j)};
                         report.stationary[static_cast<std::size_t>(k)] = stationary;
                     }
                 });
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& [idx, absc] : report.per_attractor) worst = std::max(worst, absc);
    report.abscissa = worst;
    report.stable = worst < -kStabilityMargin;
    return report;
}

} // namespace cvfr
