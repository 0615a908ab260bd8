#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "cvfr/datasets.hpp"
#include "cvfr/dynamics.hpp"
#include "cvfr/eval.hpp"
#include "cvfr/model.hpp"
#include "cvfr/spectral.hpp"

// Loss on the final state, reverse-mode differentiation through the unrolled
// Euler(-Maruyama) recurrence and through the spectral assembly, Adam on the
// free parameters, and the mini-batch training loop. Stochastic gradients
// are pathwise: the recorded noise path is replayed in reverse and the
// state-dependent noise amplitude contributes its own gradient term unless
// detach_damping is set.

namespace cvfr {

struct TrainConfig {
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 32;
    int epochs = 200;
    IntegrationConfig integration; // dt, steps, sigma
    double grad_clip = 10.0;       // global norm; <= 0 disables
    std::uint64_t seed = 0;        // drives data order, per-item noise, eval streams
    bool detach_damping = false;
    int eval_realizations = 1;
    Criterion criterion;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0; // online estimate from the training forward passes
    double test_accuracy = 0.0;
    double wall_seconds = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;
    double best_test_accuracy = 0.0;
};

/// Mean over the batch of squared Euclidean distance to the target states.
inline double loss_mean_squared(const Matrix& final_states, const Matrix& targets) {
    if (!final_states.same_shape(targets)) throw DimensionError("loss: shape mismatch");
    if (final_states.rows == 0) throw DimensionError("loss: empty batch");
    double total = 0.0;
    for (int b = 0; b < final_states.rows; ++b) {
        const double* x = final_states.row(b);
        const double* s = targets.row(b);
        double item = 0.0;
        for (int i = 0; i < final_states.cols; ++i) {
            const double d = x[i] - s[i];
            item += d * d;
        }
        total += item;
    }
    return total / static_cast<double>(final_states.rows);
}

struct BpttResult {
    double loss = 0.0;
    CouplingGradients gradients;
    Matrix final_states;
};

/// Reverse sweep through x_{t+1} = x_t + dt(beta A f(x_t) - x_t) [+ noise].
/// Adjoint: a_t = (1-dt) a_{t+1} + dt beta F'(x_t) A^T a_{t+1}
///                [+ sqrt(dt) sigma (xi_t . a_{t+1}) grad d(x_t)],
/// coupling gradient: sum_t dt beta a_{t+1} (x) f(x_t), then routed through
/// the assembly adjoint with frozen parameters masked.
inline BpttResult backprop_through_time_with(const Matrix& x0_batch, const SpectralCoupling& sc,
                                             const AssembledCoupling& assembled, const IntegrationConfig& cfg,
                                             std::span<const std::uint64_t> noise_seeds, const Matrix& targets,
                                             std::span<const Vector> attractor_states,
                                             bool detach_damping = false) {
    const int batch = x0_batch.rows;
    const int n = x0_batch.cols;
    if (n != sc.n) throw DimensionError("backprop_through_time: batch dimension differs from model");
    if (!x0_batch.same_shape(targets)) throw DimensionError("backprop_through_time: target shape mismatch");

    std::vector<Matrix> record;
    Matrix states = x0_batch;
    propagate_batch(states, assembled.coupling, sc.hill_c, sc.beta, cfg, noise_seeds, attractor_states, &record);

    BpttResult out;
    out.final_states = states;
    out.loss = loss_mean_squared(states, targets);

    const double dt_beta = cfg.dt * sc.beta;
    const double loss_scale = 2.0 / static_cast<double>(batch);
    const bool noisy = cfg.sigma > 0.0;
    const double noise_scale = noisy ? std::sqrt(cfg.dt) * cfg.sigma : 0.0;

    Matrix adjoint(batch, n);
    for (int b = 0; b < batch; ++b) {
        const double* x = states.row(b);
        const double* s = targets.row(b);
        double* a = adjoint.row(b);
        for (int i = 0; i < n; ++i) a[i] = loss_scale * (x[i] - s[i]);
    }

    Matrix grad_coupling(n, n);
    Matrix activated(batch, n);
    Matrix adjoint_next(batch, n);
    for (int t = cfg.steps - 1; t >= 0; --t) {
        const Matrix& xt = record[static_cast<std::size_t>(t)];
        parallel_for(batch, 1, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t b = lo; b < hi; ++b) {
                const double* x = xt.row(static_cast<int>(b));
                double* f = activated.row(static_cast<int>(b));
                for (int i = 0; i < n; ++i) f[i] = hill(x[i], sc.hill_c);
            }
        });
        // grad_A += dt beta a_{t+1} (x) f(x_t), accumulated row-wise over b.
        parallel_for(n, 16, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t i = lo; i < hi; ++i) {
                double* grow = grad_coupling.row(static_cast<int>(i));
                for (int b = 0; b < batch; ++b) {
                    const double coef = dt_beta * adjoint(b, static_cast<int>(i));
                    if (coef != 0.0) axpy(coef, activated.row(b), grow, n);
                }
            }
        });
        // Adjoint propagation (per item).
        parallel_for(batch, 1, [&](std::int64_t lo, std::int64_t hi) {
            Vector back(static_cast<std::size_t>(n));
            Vector x_vec(static_cast<std::size_t>(n));
            for (std::int64_t b = lo; b < hi; ++b) {
                const double* a = adjoint.row(static_cast<int>(b));
                const double* x = xt.row(static_cast<int>(b));
                // back = A^T a
                std::fill(back.begin(), back.end(), 0.0);
                for (int i = 0; i < n; ++i) {
                    if (a[i] != 0.0) axpy(a[i], assembled.coupling.row(i), back.data(), n);
                }
                double* an = adjoint_next.row(static_cast<int>(b));
                for (int i = 0; i < n; ++i) {
                    an[i] = (1.0 - cfg.dt) * a[i] + dt_beta * hill_prime(x[i], sc.hill_c) * back[i];
                }
                if (noisy && !detach_damping) {
                    const std::uint64_t seed_b = noise_seeds[static_cast<std::size_t>(b)];
                    double xi_dot_a = 0.0;
                    for (int i = 0; i < n; ++i) {
                        xi_dot_a += a[i] * gauss_at(seed_b, static_cast<std::uint64_t>(t),
                                                    static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(n));
                    }
                    if (xi_dot_a != 0.0) {
                        x_vec.assign(x, x + n);
                        const Vector dgrad = damping_factor_gradient(x_vec, attractor_states);
                        axpy(noise_scale * xi_dot_a, dgrad.data(), an, n);
                    }
                }
            }
        });
        adjoint.data.swap(adjoint_next.data);
    }

    out.gradients = backprop_assemble_with(sc, assembled, grad_coupling);
    return out;
}

inline BpttResult backprop_through_time(const Matrix& x0_batch, const SpectralCoupling& sc,
                                        const IntegrationConfig& cfg,
                                        std::span<const std::uint64_t> noise_seeds, const Matrix& targets,
                                        std::span<const Vector> attractor_states, bool detach_damping = false) {
    return backprop_through_time_with(x0_batch, sc, assemble_full(sc), cfg, noise_seeds, targets,
                                      attractor_states, detach_damping);
}

// ---------------------------------------------------------------------------
// Adam with bias correction; frozen parameters are never touched.
// ---------------------------------------------------------------------------

struct AdamState {
    Matrix m_eigvecs, v_eigvecs;
    Vector m_eigvals, v_eigvals;
    long step = 0;

    explicit AdamState(const SpectralCoupling& sc)
        : m_eigvecs(sc.n, sc.n), v_eigvecs(sc.n, sc.n),
          m_eigvals(static_cast<std::size_t>(sc.n), 0.0), v_eigvals(static_cast<std::size_t>(sc.n), 0.0) {}
};

inline void adam_update(SpectralCoupling& sc, const CouplingGradients& grads, AdamState& state,
                        const TrainConfig& cfg) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));
    auto update_one = [&](double g, double& m, double& v, double& param) {
        m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
        v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g * g;
        param -= cfg.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + cfg.adam_eps);
    };
    for (int j = 0; j < sc.n; ++j) {
        if (sc.frozen(j)) continue;
        for (int i = 0; i < sc.n; ++i) {
            update_one(grads.eigvecs(i, j), state.m_eigvecs(i, j), state.v_eigvecs(i, j), sc.eigvecs(i, j));
        }
        update_one(grads.eigvals[static_cast<std::size_t>(j)], state.m_eigvals[static_cast<std::size_t>(j)],
                   state.v_eigvals[static_cast<std::size_t>(j)], sc.eigvals[static_cast<std::size_t>(j)]);
    }
}

/// Rescales gradients to the given global L2 norm if they exceed it.
inline void clip_gradients(CouplingGradients& grads, double max_norm) {
    if (max_norm <= 0.0) return;
    double ss = dot(grads.eigvecs.data.data(), grads.eigvecs.data.data(),
                    static_cast<int>(grads.eigvecs.data.size()));
    ss += dot(grads.eigvals, grads.eigvals);
    const double norm = std::sqrt(ss);
    if (norm <= max_norm) return;
    const double scale = max_norm / norm;
    for (auto& g : grads.eigvecs.data) g *= scale;
    for (auto& g : grads.eigvals) g *= scale;
}

namespace detail {

inline constexpr std::uint64_t kSeedTagOrder = 0xD0;
inline constexpr std::uint64_t kSeedTagNoise = 0xD1;
inline constexpr std::uint64_t kSeedTagEval = 0xD2;

} // namespace detail

/// Mini-batch Adam over the full training set; per-epoch test evaluation;
/// returns the model with the best test accuracy. Aborts with
/// DivergenceAbortError when the batch loss is non-finite twice in a row.
inline Model train(const LabeledDataset& train_set, const LabeledDataset& test_set, SpectralCoupling sc,
                   const AttractorSet& attractors, const TrainConfig& cfg, TrainLog* log = nullptr,
                   std::FILE* progress = nullptr) {
    if (train_set.dim != sc.n || test_set.dim != sc.n)
        throw DimensionError("train: dataset dimension differs from model");
    for (int label : train_set.labels) {
        if (label < 0 || label >= sc.k) throw DimensionError("train: label outside [0, k)");
    }
    for (int label : test_set.labels) {
        if (label < 0 || label >= sc.k) throw DimensionError("train: label outside [0, k)");
    }
    cfg.integration.validate();

    const int n = sc.n;
    const std::span<const Vector> planted(attractors.states);
    AssembledCoupling assembled = assemble_full(sc);
    AdamState adam(sc);
    TrainLog local_log;

    SpectralCoupling best_sc = sc;
    double best_acc = -1.0;
    int best_epoch = -1;

    const std::uint64_t order_base = derive_seed(cfg.seed, detail::kSeedTagOrder);
    const std::uint64_t noise_base = derive_seed(cfg.seed, detail::kSeedTagNoise);
    const std::uint64_t eval_base = derive_seed(cfg.seed, detail::kSeedTagEval);

    const auto t0 = std::chrono::steady_clock::now();
    int nonfinite_streak = 0;
    double last_finite_loss = std::numeric_limits<double>::quiet_NaN();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        SplitMix64 order_stream(derive_seed(order_base, static_cast<std::uint64_t>(epoch)));
        const std::vector<int> order =
            sample_distinct(static_cast<int>(train_set.size()), static_cast<int>(train_set.size()), order_stream);
        const std::uint64_t epoch_noise = derive_seed(noise_base, static_cast<std::uint64_t>(epoch));

        double loss_sum = 0.0;
        std::size_t loss_items = 0, correct = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            const int batch = static_cast<int>(end - begin);
            Matrix x0(batch, n), targets(batch, n);
            std::vector<std::uint64_t> noise_seeds(static_cast<std::size_t>(batch));
            for (int b = 0; b < batch; ++b) {
                const int item = order[begin + static_cast<std::size_t>(b)];
                const Vector& src = train_set.items[static_cast<std::size_t>(item)];
                std::copy(src.begin(), src.end(), x0.row(b));
                const Vector& target = attractors.states[static_cast<std::size_t>(
                    train_set.labels[static_cast<std::size_t>(item)])];
                std::copy(target.begin(), target.end(), targets.row(b));
                noise_seeds[static_cast<std::size_t>(b)] = derive_seed(epoch_noise, static_cast<std::uint64_t>(item));
            }
            bool ok = true;
            BpttResult result;
            try {
                result = backprop_through_time_with(x0, sc, assembled, cfg.integration, noise_seeds, targets,
                                                    planted, cfg.detach_damping);
                ok = std::isfinite(result.loss);
            } catch (const NonFiniteStateError&) {
                ok = false;
            }
            if (!ok) {
                if (++nonfinite_streak >= 2) {
                    char msg[128];
                    std::snprintf(msg, sizeof msg,
                                  "training diverged: non-finite loss twice in a row (last finite loss %.6g)",
                                  last_finite_loss);
                    throw DivergenceAbortError(msg);
                }
                continue; // skip the update, try the next batch
            }
            nonfinite_streak = 0;
            last_finite_loss = result.loss;
            loss_sum += result.loss * batch;
            loss_items += static_cast<std::size_t>(batch);
            for (int b = 0; b < batch; ++b) {
                Vector final_state(result.final_states.row(b), result.final_states.row(b) + n);
                const int item = order[begin + static_cast<std::size_t>(b)];
                if (classify(final_state, attractors, cfg.criterion) ==
                    train_set.labels[static_cast<std::size_t>(item)])
                    ++correct;
            }
            clip_gradients(result.gradients, cfg.grad_clip);
            adam_update(sc, result.gradients, adam, cfg);
            assembled = assemble_full(sc);
        }

        const Model snapshot{sc, attractors, cfg.integration, cfg.seed};
        const double test_acc = accuracy(snapshot, test_set, derive_seed(eval_base, static_cast<std::uint64_t>(epoch)),
                                         cfg.eval_realizations, cfg.criterion);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_items ? loss_sum / static_cast<double>(loss_items) : std::numeric_limits<double>::quiet_NaN();
        rec.train_accuracy = train_set.size() ? static_cast<double>(correct) / static_cast<double>(train_set.size()) : 0.0;
        rec.test_accuracy = test_acc;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        local_log.epochs.push_back(rec);
        if (progress)
            std::fprintf(progress, "epoch %4d  loss %.6f  train_acc %.4f  test_acc %.4f  (%.1fs)\n", epoch,
                         rec.train_loss, rec.train_accuracy, rec.test_accuracy, rec.wall_seconds);
        if (test_acc > best_acc) {
            best_acc = test_acc;
            best_epoch = epoch;
            best_sc = sc;
        }
    }
    local_log.best_epoch = best_epoch;
    local_log.best_test_accuracy = best_acc;
    if (log) *log = local_log;
    return Model{std::move(best_sc), attractors, cfg.integration, cfg.seed};
}

inline void save_train_log_csv(const std::string& path, const TrainLog& log) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write train log: " + path);
    out << "epoch,train_loss,train_accuracy,test_accuracy,wall_seconds\n";
    char buf[160];
    for (const auto& r : log.epochs) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.3f", r.epoch, r.train_loss, r.train_accuracy,
                      r.test_accuracy, r.wall_seconds);
        out << buf << "\n";
    }
    if (!out) throw Error("failed writing train log: " + path);
}

} // namespace cvfr
