#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "cvfr/errors.hpp"
#include "cvfr/matrix.hpp"
#include "cvfr/parallel.hpp"
#include "cvfr/rng.hpp"

// Deterministic dynamics  dx/dt = -x + beta * A f(x)  with Hill activation
// f(x) = x^2/(c + x^2), integrated by explicit Euler, and the Langevin
// variant with state-dependent noise amplitude sigma * d(x) integrated by
// Euler-Maruyama (noise increments scaled by sqrt(dt)). The damping factor
// d(x) silences the noise at the planted attractors.

namespace cvfr {

inline double hill(double x, double c) { return x * x / (c + x * x); }

inline double hill_prime(double x, double c) {
    const double denom = c + x * x;
    return 2.0 * c * x / (denom * denom);
}

struct IntegrationConfig {
    double dt = 0.1;
    int steps = 100;       // horizon T = dt * steps
    double sigma = 0.0;    // noise standard deviation per unit time
    std::uint64_t seed = 0;

    void validate() const {
        if (!(dt > 0.0) || !(dt < 1.0)) throw Error("IntegrationConfig: dt must lie in (0, 1)");
        if (steps < 0) throw Error("IntegrationConfig: steps must be nonnegative");
        if (sigma < 0.0) throw Error("IntegrationConfig: sigma must be nonnegative");
    }
};

struct Trajectory {
    Vector times;               // steps+1 entries, t = dt * step
    std::vector<Vector> states; // states[0] is the initial condition, bit for bit
};

inline Vector rhs_deterministic(const Vector& x, const Matrix& coupling, double c, double beta) {
    if (static_cast<int>(x.size()) != coupling.rows || coupling.rows != coupling.cols)
        throw DimensionError("rhs_deterministic: shape mismatch");
    const int n = static_cast<int>(x.size());
    Vector activated(x.size());
    for (int i = 0; i < n; ++i) activated[i] = hill(x[i], c);
    Vector out(x.size());
    for (int i = 0; i < n; ++i) out[i] = beta * dot(coupling.row(i), activated.data(), n) - x[i];
    return out;
}

/// Noise amplitude tanh(geomean_k ||x - X_k||^2 / n). Exactly 0 when x
/// coincides with a planted state; clamped below 1 where tanh saturates.
inline double damping_factor(const Vector& x, std::span<const Vector> attractor_states) {
    const std::size_t n = x.size();
    const std::size_t n_attr = attractor_states.size();
    double log_sum = 0.0;
    for (const Vector& s : attractor_states) {
        double q = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = x[i] - s[i];
            q += d * d;
        }
        q /= static_cast<double>(n);
        if (q == 0.0) return 0.0;
        log_sum += std::log(q);
    }
    const double g = std::exp(log_sum / static_cast<double>(n_attr));
    const double d = std::tanh(g);
    return d < 1.0 ? d : 0x1.fffffffffffffp-1;
}

/// Gradient of damping_factor at x; zero (the silenced-noise subgradient)
/// if x sits exactly on an attractor.
inline Vector damping_factor_gradient(const Vector& x, std::span<const Vector> attractor_states) {
    const std::size_t n = x.size();
    const std::size_t n_attr = attractor_states.size();
    Vector grad(n, 0.0);
    std::vector<double> sq(n_attr);
    double log_sum = 0.0;
    for (std::size_t k = 0; k < n_attr; ++k) {
        double q = 0.0;
        const Vector& s = attractor_states[k];
        for (std::size_t i = 0; i < n; ++i) {
            const double d = x[i] - s[i];
            q += d * d;
        }
        q /= static_cast<double>(n);
        if (q == 0.0) return grad;
        sq[k] = q;
        log_sum += std::log(q);
    }
    const double g = std::exp(log_sum / static_cast<double>(n_attr));
    const double th = std::tanh(g);
    const double outer = (1.0 - th * th) * g / static_cast<double>(n_attr);
    for (std::size_t k = 0; k < n_attr; ++k) {
        const double coef = outer * 2.0 / (sq[k] * static_cast<double>(n));
        const Vector& s = attractor_states[k];
        for (std::size_t i = 0; i < n; ++i) grad[i] += coef * (x[i] - s[i]);
    }
    return grad;
}

namespace detail {

[[noreturn]] inline void throw_nonfinite(int step, int component) {
    throw NonFiniteStateError("integration diverged: non-finite state at step " +
                              std::to_string(step) + ", component " + std::to_string(component));
}

} // namespace detail

/// One Euler(-Maruyama) trajectory. sigma == 0 never touches the noise
/// stream, so the stochastic integrator reduces to the deterministic one
/// bit for bit.
inline Trajectory integrate_stochastic(const Vector& x0, const Matrix& coupling, double c, double beta,
                                       std::span<const Vector> attractor_states,
                                       const IntegrationConfig& cfg, bool record_all = true) {
    cfg.validate();
    const int n = static_cast<int>(x0.size());
    if (coupling.rows != n || coupling.cols != n)
        throw DimensionError("integrate: coupling shape mismatch");
    const bool noisy = cfg.sigma > 0.0;
    const double noise_scale = noisy ? std::sqrt(cfg.dt) * cfg.sigma : 0.0;

    Trajectory traj;
    if (record_all) {
        traj.times.reserve(static_cast<std::size_t>(cfg.steps) + 1);
        traj.states.reserve(static_cast<std::size_t>(cfg.steps) + 1);
        traj.times.push_back(0.0);
        traj.states.push_back(x0);
    }

    Vector x = x0, activated(x0.size()), next(x0.size());
    for (int t = 0; t < cfg.steps; ++t) {
        for (int i = 0; i < n; ++i) activated[static_cast<std::size_t>(i)] = hill(x[static_cast<std::size_t>(i)], c);
        const double damp = noisy ? damping_factor(x, attractor_states) : 0.0;
        for (int i = 0; i < n; ++i) {
            const double drive = beta * dot(coupling.row(i), activated.data(), n);
            double xn = x[static_cast<std::size_t>(i)] + cfg.dt * (drive - x[static_cast<std::size_t>(i)]);
            if (noisy)
                xn += noise_scale * damp *
                      gauss_at(cfg.seed, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(i),
                               static_cast<std::uint64_t>(n));
            if (!std::isfinite(xn)) detail::throw_nonfinite(t, i);
            next[static_cast<std::size_t>(i)] = xn;
        }
        x.swap(next);
        if (record_all) {
            traj.times.push_back(cfg.dt * (t + 1));
            traj.states.push_back(x);
        }
    }
    if (!record_all) {
        traj.times = {cfg.dt * cfg.steps};
        traj.states.push_back(std::move(x));
    }
    return traj;
}

/// Deterministic trajectory; requires cfg.sigma == 0.
inline Trajectory integrate(const Vector& x0, const Matrix& coupling, double c, double beta,
                            const IntegrationConfig& cfg) {
    if (cfg.sigma != 0.0) throw Error("integrate: sigma must be 0 (use integrate_stochastic)");
    return integrate_stochastic(x0, coupling, c, beta, {}, cfg, true);
}

/// Economy mode: final state only.
inline Vector integrate_final(const Vector& x0, const Matrix& coupling, double c, double beta,
                              std::span<const Vector> attractor_states, const IntegrationConfig& cfg) {
    Trajectory t = integrate_stochastic(x0, coupling, c, beta, attractor_states, cfg, false);
    return std::move(t.states.back());
}

// ---------------------------------------------------------------------------
// Batched propagation. States sit in the rows of a batch x n matrix. The
// per-component arithmetic matches the single-trajectory integrator exactly,
// so batched evaluation reproduces integrate_stochastic bit for bit given
// the same per-item seeds.
// ---------------------------------------------------------------------------

/// Advances every row of `states` by cfg.steps Euler(-Maruyama) steps.
/// noise_seeds: one stream seed per row (ignored when sigma == 0).
/// If `record` is non-null it receives steps+1 snapshots including the
/// initial one. Throws NonFiniteStateError naming the item on divergence.
inline void propagate_batch(Matrix& states, const Matrix& coupling, double c, double beta,
                            const IntegrationConfig& cfg, std::span<const std::uint64_t> noise_seeds,
                            std::span<const Vector> attractor_states,
                            std::vector<Matrix>* record = nullptr) {
    cfg.validate();
    const int batch = states.rows;
    const int n = states.cols;
    if (coupling.rows != n || coupling.cols != n)
        throw DimensionError("propagate_batch: coupling shape mismatch");
    const bool noisy = cfg.sigma > 0.0;
    if (noisy && static_cast<int>(noise_seeds.size()) != batch)
        throw DimensionError("propagate_batch: one noise seed per item required");
    const double noise_scale = noisy ? std::sqrt(cfg.dt) * cfg.sigma : 0.0;

    if (record) {
        record->clear();
        record->reserve(static_cast<std::size_t>(cfg.steps) + 1);
        record->push_back(states);
    }

    Matrix activated(batch, n);
    Matrix next(batch, n);
    for (int t = 0; t < cfg.steps; ++t) {
        parallel_for(batch, 1, [&](std::int64_t lo, std::int64_t hi) {
            Vector x(static_cast<std::size_t>(n));
            for (std::int64_t b = lo; b < hi; ++b) {
                const double* xrow = states.row(static_cast<int>(b));
                double* frow = activated.row(static_cast<int>(b));
                for (int i = 0; i < n; ++i) frow[i] = hill(xrow[i], c);
                double damp = 0.0;
                if (noisy) {
                    x.assign(xrow, xrow + n);
                    damp = damping_factor(x, attractor_states);
                }
                double* nrow = next.row(static_cast<int>(b));
                for (int i = 0; i < n; ++i) {
                    const double drive = beta * dot(coupling.row(i), frow, n);
                    double xn = xrow[i] + cfg.dt * (drive - xrow[i]);
                    if (noisy)
                        xn += noise_scale * damp *
                              gauss_at(noise_seeds[static_cast<std::size_t>(b)], static_cast<std::uint64_t>(t),
                                       static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(n));
                    if (!std::isfinite(xn))
                        throw NonFiniteStateError("integration diverged: non-finite state at step " +
                                                  std::to_string(t) + ", item " + std::to_string(b) +
                                                  ", component " + std::to_string(i));
                    nrow[i] = xn;
                }
            }
        });
        states.data.swap(next.data);
        if (record) record->push_back(states);
    }
}

/// Trajectory CSV: header "t,x_1..x_n", or "t,f_1..f_n" with activity=true.
inline void write_trajectory_csv(const std::string& path, const Trajectory& traj, bool activity, double c) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write trajectory file: " + path);
    const std::size_t n = traj.states.empty() ? 0 : traj.states.front().size();
    out << "t";
    for (std::size_t i = 1; i <= n; ++i) out << (activity ? ",f_" : ",x_") << i;
    out << "\n";
    char buf[32];
    for (std::size_t s = 0; s < traj.states.size(); ++s) {
        std::snprintf(buf, sizeof buf, "%.17g", traj.times[s]);
        out << buf;
        for (double v : traj.states[s]) {
            std::snprintf(buf, sizeof buf, "%.17g", activity ? hill(v, c) : v);
            out << ',' << buf;
        }
        out << "\n";
    }
    if (!out) throw Error("failed writing trajectory file: " + path);
}

} // namespace cvfr
