#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "cvfr/attacks.hpp"
#include "cvfr/datasets.hpp"
#include "cvfr/dynamics.hpp"
#include "cvfr/model.hpp"

// Classification criterion, accuracy measurement, robustness sweeps over
// attack intensity, and trajectory-ensemble statistics.

namespace cvfr {

inline constexpr int kRejected = -1;

struct Criterion {
    enum class Kind { inner_product, l2_threshold };
    Kind kind = Kind::inner_product;
    bool state_space = false; // pair raw x(T) with the images instead of f(x(T))
    double tau = 0.5;
    bool tau_relative = true; // tau is a fraction of ||X_k|| of the nearest attractor
};

/// Class index of the final state, or kRejected (L2 mode only). Ties break
/// toward the lowest class index.
inline int classify(const Vector& final_state, const AttractorSet& attractors, const Criterion& crit = {}) {
    const std::size_t n = final_state.size();
    const int n_classes = attractors.count();
    if (crit.kind == Criterion::Kind::inner_product) {
        int best = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        Vector probe(n);
        for (std::size_t i = 0; i < n; ++i)
            probe[i] = crit.state_space ? final_state[i] : hill(final_state[i], attractors.alphabet.hill_c);
        for (int k = 0; k < n_classes; ++k) {
            const double score = dot(probe, attractors.images[static_cast<std::size_t>(k)]);
            if (score > best_score) {
                best_score = score;
                best = k;
            }
        }
        return best;
    }
    int nearest = 0;
    double nearest_sq = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n_classes; ++k) {
        const Vector& s = attractors.states[static_cast<std::size_t>(k)];
        double d = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = final_state[i] - s[i];
            d += t * t;
        }
        if (d < nearest_sq) {
            nearest_sq = d;
            nearest = k;
        }
    }
    const double threshold =
        crit.tau_relative ? crit.tau * norm2(attractors.states[static_cast<std::size_t>(nearest)]) : crit.tau;
    return std::sqrt(nearest_sq) < threshold ? nearest : kRejected;
}

struct MisclassifiedItem {
    std::size_t index = 0;
    int label = 0;
    int predicted = kRejected;
    // ||x(T) - X_pred||_2 of the first realization (nearest attractor when
    // rejected): small means a wrong basin, large means non-convergence.
    double residual = 0.0;
};

struct EvalStats {
    std::size_t integration_failures = 0; // counted as misclassifications
    std::size_t rejections = 0;
    std::vector<MisclassifiedItem> misclassified;
};

namespace detail {

inline int majority_vote(const std::vector<int>& votes, int n_classes) {
    std::vector<int> tally(static_cast<std::size_t>(n_classes), 0);
    for (int v : votes) {
        if (v >= 0) ++tally[static_cast<std::size_t>(v)];
    }
    int best = kRejected, best_count = 0;
    for (int k = 0; k < n_classes; ++k) {
        if (tally[static_cast<std::size_t>(k)] > best_count) {
            best_count = tally[static_cast<std::size_t>(k)];
            best = k;
        }
    }
    return best;
}

} // namespace detail

/// Fraction of items whose (majority over noise realizations) prediction
/// matches the label. Integration blow-ups are logged, counted wrong, and
/// never abort the evaluation.
inline double accuracy(const Model& model, const LabeledDataset& ds, std::uint64_t eval_seed,
                       int realizations = 1, const Criterion& crit = {}, EvalStats* stats = nullptr) {
    if (ds.size() == 0) throw Error("accuracy: empty dataset");
    if (ds.dim != model.coupling.n) throw DimensionError("accuracy: dataset dimension differs from model");
    if (realizations < 1) throw Error("accuracy: realizations must be >= 1");
    const int n = model.coupling.n;
    const Matrix coupling = assemble(model.coupling);
    const std::span<const Vector> planted(model.attractors.states);

    EvalStats local;
    std::size_t n_correct = 0;
    constexpr std::size_t kBlock = 128;
    std::vector<std::vector<int>> votes;   // per item in block
    Matrix first_finals;                   // realization-0 final states, for residual logging
    for (std::size_t begin = 0; begin < ds.size(); begin += kBlock) {
        const std::size_t end = std::min(ds.size(), begin + kBlock);
        const int block = static_cast<int>(end - begin);
        votes.assign(static_cast<std::size_t>(block), {});
        first_finals = Matrix(block, n);
        for (int r = 0; r < realizations; ++r) {
            Matrix states(block, n);
            std::vector<std::uint64_t> seeds(static_cast<std::size_t>(block));
            for (int b = 0; b < block; ++b) {
                const Vector& item = ds.items[begin + static_cast<std::size_t>(b)];
                std::copy(item.begin(), item.end(), states.row(b));
                seeds[static_cast<std::size_t>(b)] =
                    derive_seed(derive_seed(eval_seed, begin + static_cast<std::size_t>(b)), static_cast<std::uint64_t>(r));
            }
            bool batch_ok = true;
            try {
                propagate_batch(states, coupling, model.coupling.hill_c, model.coupling.beta,
                                model.integration, seeds, planted);
            } catch (const NonFiniteStateError&) {
                batch_ok = false;
            }
            if (batch_ok) {
                for (int b = 0; b < block; ++b) {
                    Vector final_state(states.row(b), states.row(b) + n);
                    votes[static_cast<std::size_t>(b)].push_back(classify(final_state, model.attractors, crit));
                    if (r == 0) std::copy(final_state.begin(), final_state.end(), first_finals.row(b));
                }
            } else {
                // Isolate the failing item(s): rerun one by one.
                for (int b = 0; b < block; ++b) {
                    IntegrationConfig cfg = model.integration;
                    cfg.seed = seeds[static_cast<std::size_t>(b)];
                    try {
                        const Vector final_state = integrate_final(ds.items[begin + static_cast<std::size_t>(b)],
                                                                   coupling, model.coupling.hill_c,
                                                                   model.coupling.beta, planted, cfg);
                        votes[static_cast<std::size_t>(b)].push_back(classify(final_state, model.attractors, crit));
                        if (r == 0) std::copy(final_state.begin(), final_state.end(), first_finals.row(b));
                    } catch (const NonFiniteStateError& e) {
                        ++local.integration_failures;
                        std::fprintf(stderr, "eval: item %zu counted wrong: %s\n",
                                     begin + static_cast<std::size_t>(b), e.what());
                        votes[static_cast<std::size_t>(b)].push_back(kRejected);
                        if (r == 0)
                            for (int i = 0; i < n; ++i)
                                first_finals(b, i) = std::numeric_limits<double>::quiet_NaN();
                    }
                }
            }
        }
        for (int b = 0; b < block; ++b) {
            const int pred = detail::majority_vote(votes[static_cast<std::size_t>(b)], model.attractors.count());
            if (pred == kRejected) ++local.rejections;
            if (pred == ds.labels[begin + static_cast<std::size_t>(b)]) {
                ++n_correct;
            } else if (stats) {
                // Log the miss with its distance to the (nearest or predicted)
                // attractor: near zero = wrong basin, large = non-convergence.
                MisclassifiedItem miss;
                miss.index = begin + static_cast<std::size_t>(b);
                miss.label = ds.labels[miss.index];
                miss.predicted = pred;
                const Vector final_state(first_finals.row(b), first_finals.row(b) + n);
                double best_sq = std::numeric_limits<double>::infinity();
                for (int k = 0; k < model.attractors.count(); ++k) {
                    if (pred != kRejected && k != pred) continue;
                    const Vector& s = model.attractors.states[static_cast<std::size_t>(k)];
                    double d = 0.0;
                    for (int i = 0; i < n; ++i) {
                        const double t = final_state[static_cast<std::size_t>(i)] - s[static_cast<std::size_t>(i)];
                        d += t * t;
                    }
                    best_sq = std::min(best_sq, d);
                }
                miss.residual = std::sqrt(best_sq);
                local.misclassified.push_back(miss);
            }
        }
    }
    if (stats) *stats = std::move(local);
    return static_cast<double>(n_correct) / static_cast<double>(ds.size());
}

// ---------------------------------------------------------------------------
// Robustness sweeps.
// ---------------------------------------------------------------------------

struct RobustnessRow {
    char kind = 'A';
    double intensity = 0.0;        // p
    double model_sigma = 0.0;      // training noise of the evaluated model
    double accuracy = 0.0;         // mean over evaluation seeds
    int n_items = 0;
    int n_realizations = 1;
    std::vector<double> per_seed;  // one accuracy per evaluation seed
};

struct RobustnessTable {
    std::vector<RobustnessRow> rows; // sorted by (kind, p) within each model
};

/// For every model x p: corrupt the test set with fresh derived seeds and
/// measure accuracy, once per evaluation seed.
inline RobustnessTable robustness_sweep(std::span<const Model> models, const LabeledDataset& ds, char kind,
                                        std::span<const double> p_grid, std::span<const std::uint64_t> seeds,
                                        int realizations = 1, const Criterion& crit = {}, bool clip = false) {
    if (p_grid.empty()) throw Error("robustness_sweep: empty p grid");
    for (std::size_t i = 1; i < p_grid.size(); ++i) {
        if (p_grid[i] < p_grid[i - 1]) throw Error("robustness_sweep: p grid must ascend");
    }
    if (seeds.empty()) throw Error("robustness_sweep: need at least one seed");
    RobustnessTable table;
    for (const Model& model : models) {
        for (std::size_t pi = 0; pi < p_grid.size(); ++pi) {
            RobustnessRow row;
            row.kind = kind;
            row.intensity = p_grid[pi];
            row.model_sigma = model.integration.sigma;
            row.n_items = static_cast<int>(ds.size());
            row.n_realizations = realizations;
            double sum = 0.0;
            for (const std::uint64_t s : seeds) {
                const LabeledDataset attacked = attack_dataset(ds, kind, p_grid[pi], derive_seed(s, 2 * pi), clip);
                const double acc = accuracy(model, attacked, derive_seed(s, 2 * pi + 1), realizations, crit);
                row.per_seed.push_back(acc);
                sum += acc;
            }
            row.accuracy = sum / static_cast<double>(seeds.size());
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

inline void write_robustness_csv(const std::string& path, const RobustnessTable& table) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write robustness file: " + path);
    out << "kind,p,sigma,accuracy\n";
    char buf[96];
    for (const auto& row : table.rows) {
        std::snprintf(buf, sizeof buf, "%c,%.17g,%.17g,%.17g", row.kind, row.intensity, row.model_sigma,
                      row.accuracy);
        out << buf << "\n";
    }
    if (!out) throw Error("failed writing robustness file: " + path);
}

// ---------------------------------------------------------------------------
// Trajectory-ensemble statistics of a single node's activity.
// ---------------------------------------------------------------------------

struct EnsembleStats {
    Vector times;
    Vector mean;   // ensemble mean of f(x_node(t))
    Vector stddev; // population standard deviation across realizations
};

/// Runs n_realizations integrations of the same item (realization r uses the
/// stream derive_seed(seed, r)) and tracks mean/std of f(x_node) over time.
inline EnsembleStats trajectory_ensemble(const Model& model, const Vector& item, int node,
                                         int n_realizations, std::uint64_t seed) {
    if (node < 0 || node >= model.coupling.n) throw DimensionError("trajectory_ensemble: node out of range");
    if (n_realizations < 1) throw Error("trajectory_ensemble: need at least one realization");
    const Matrix coupling = assemble(model.coupling);
    const std::span<const Vector> planted(model.attractors.states);
    const std::size_t n_times = static_cast<std::size_t>(model.integration.steps) + 1;

    EnsembleStats stats;
    stats.times.resize(n_times);
    // Variance accumulated against realization 0 as a shift, so identical
    // samples (t = 0, or sigma = 0) give a standard deviation of exactly 0.
    Vector shift(n_times, 0.0), sum_dev(n_times, 0.0), sum_dev_sq(n_times, 0.0);
    for (int r = 0; r < n_realizations; ++r) {
        IntegrationConfig cfg = model.integration;
        cfg.seed = derive_seed(seed, static_cast<std::uint64_t>(r));
        const Trajectory traj =
            integrate_stochastic(item, coupling, model.coupling.hill_c, model.coupling.beta, planted, cfg);
        for (std::size_t t = 0; t < n_times; ++t) {
            const double activity = hill(traj.states[t][static_cast<std::size_t>(node)], model.coupling.hill_c);
            if (r == 0) {
                stats.times[t] = traj.times[t];
                shift[t] = activity;
            } else {
                const double dev = activity - shift[t];
                sum_dev[t] += dev;
                sum_dev_sq[t] += dev * dev;
            }
        }
    }
    stats.mean.resize(n_times);
    stats.stddev.resize(n_times);
    const double inv_n = 1.0 / static_cast<double>(n_realizations);
    for (std::size_t t = 0; t < n_times; ++t) {
        const double mean_dev = sum_dev[t] * inv_n;
        stats.mean[t] = shift[t] + mean_dev;
        const double var = std::max(0.0, sum_dev_sq[t] * inv_n - mean_dev * mean_dev);
        stats.stddev[t] = std::sqrt(var);
    }
    return stats;
}

inline void write_ensemble_csv(const std::string& path, const EnsembleStats& stats) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write ensemble file: " + path);
    out << "t,mean,std\n";
    char buf[96];
    for (std::size_t t = 0; t < stats.times.size(); ++t) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", stats.times[t], stats.mean[t], stats.stddev[t]);
        out << buf << "\n";
    }
    if (!out) throw Error("failed writing ensemble file: " + path);
}

} // namespace cvfr
