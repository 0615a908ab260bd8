#pragma once

#include <cmath>
#include <cstdint>

#include "cvfr/datasets.hpp"
#include "cvfr/rng.hpp"

// Random adversarial corruption of inputs. Attack A replaces round(p*n)
// distinct pixels with uniform [0,1) draws; attack B adds one uniform
// [-p, p) draw to every pixel. p = 0 is the identity for both. Labels are
// never touched.

namespace cvfr {

struct AttackSpec {
    char kind = 'A';       // 'A' or 'B'
    double intensity = 0.0; // p
    std::uint64_t seed = 0;
};

inline Vector attack_a(const Vector& item, double p, std::uint64_t seed) {
    if (p < 0.0 || p > 1.0) throw Error("attack_a: p outside [0,1]");
    Vector out = item;
    if (p == 0.0) return out;
    const int n = static_cast<int>(item.size());
    const int n_replace = static_cast<int>(std::llround(p * n));
    SplitMix64 stream(seed);
    for (int idx : sample_distinct(n_replace, n, stream)) {
        out[static_cast<std::size_t>(idx)] = stream.next_unit();
    }
    return out;
}

/// Additive noise; outputs are deliberately not clipped to [0,1] unless
/// asked (the dynamics accept any real initial condition).
inline Vector attack_b(const Vector& item, double p, std::uint64_t seed, bool clip = false) {
    if (p < 0.0) throw Error("attack_b: p must be nonnegative");
    Vector out = item;
    if (p == 0.0) return out;
    SplitMix64 stream(seed);
    for (auto& v : out) {
        v += (2.0 * stream.next_unit() - 1.0) * p;
        if (clip) v = std::min(1.0, std::max(0.0, v));
    }
    return out;
}

inline Vector apply_attack(const Vector& item, const AttackSpec& spec, bool clip = false) {
    if (spec.kind == 'A') return attack_a(item, spec.intensity, spec.seed);
    if (spec.kind == 'B') return attack_b(item, spec.intensity, spec.seed, clip);
    throw Error(std::string("unknown attack kind: ") + spec.kind);
}

/// Per-item streams derive_seed(seed, item_index); labels unchanged.
inline LabeledDataset attack_dataset(const LabeledDataset& ds, char kind, double p,
                                     std::uint64_t seed, bool clip = false) {
    LabeledDataset out;
    out.dim = ds.dim;
    out.labels = ds.labels;
    out.items.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out.items.push_back(apply_attack(ds.items[i], {kind, p, derive_seed(seed, i)}, clip));
    }
    return out;
}

} // namespace cvfr
