#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cvfr/errors.hpp"
#include "cvfr/model.hpp"

// Checkpoint container: a human-readable key/value text header (including
// the binary payload offsets), a literal "payload" line, then the raw
// little-endian 64-bit float payload (eigenvector matrix row-major, then the
// eigenvalues). Numeric payload round-trips bit for bit; header doubles are
// written with 17 significant digits, which also round-trips exactly.
// No timestamps: outputs of seeded runs must be byte-identical.

namespace cvfr {

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline std::uint64_t byteswap64(std::uint64_t v) {
    v = ((v & 0x00000000FFFFFFFFull) << 32) | (v >> 32);
    v = ((v & 0x0000FFFF0000FFFFull) << 16) | ((v >> 16) & 0x0000FFFF0000FFFFull);
    v = ((v & 0x00FF00FF00FF00FFull) << 8) | ((v >> 8) & 0x00FF00FF00FF00FFull);
    return v;
}

inline void write_doubles_le(std::ostream& out, const double* src, std::size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(src), static_cast<std::streamsize>(count * sizeof(double)));
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            std::uint64_t bits = byteswap64(std::bit_cast<std::uint64_t>(src[i]));
            out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
        }
    }
}

inline void read_doubles_le(std::istream& in, double* dst, std::size_t count, const std::string& path) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(count * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(double))
        throw Error(path + ": checkpoint payload truncated");
    if constexpr (std::endian::native != std::endian::little) {
        for (std::size_t i = 0; i < count; ++i) {
            std::uint64_t bits = byteswap64(std::bit_cast<std::uint64_t>(dst[i]));
            dst[i] = std::bit_cast<double>(bits);
        }
    }
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

inline void save_checkpoint(const std::string& path, const Model& model, const std::string& created_by) {
    const SpectralCoupling& sc = model.coupling;
    if (!model.attractors.degenerate())
        throw Error("checkpoint format 1 stores a single planted eigenvalue; "
                    "distinct-eigenvalue models cannot be saved");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint: " + path);

    out << "cvfr-checkpoint " << kCheckpointVersion << "\n";
    out << "n " << sc.n << "\n";
    out << "k " << sc.k << "\n";
    out << "lambda_planted " << detail::format_double(sc.planted_eigenvalue) << "\n";
    out << "hill_c " << detail::format_double(sc.hill_c) << "\n";
    out << "beta " << detail::format_double(sc.beta) << "\n";
    out << "dt " << detail::format_double(model.integration.dt) << "\n";
    out << "steps " << model.integration.steps << "\n";
    out << "sigma " << detail::format_double(model.integration.sigma) << "\n";
    out << "train_seed " << model.train_seed << "\n";
    out << "created_by " << created_by << "\n";
    out << "frozen ";
    for (auto f : sc.frozen_cols) out << (f ? '1' : '0');
    out << "\n";
    for (const Pattern& p : model.attractors.patterns) {
        out << "pattern ";
        for (auto bit : p) out << (bit ? '1' : '0');
        out << "\n";
    }
    const std::size_t n_sq = static_cast<std::size_t>(sc.n) * sc.n;
    out << "payload_doubles " << (n_sq + static_cast<std::size_t>(sc.n)) << "\n";
    out << "offset_eigvecs 0\n";
    out << "offset_eigvals " << n_sq << "\n";
    out << "payload\n";
    detail::write_doubles_le(out, sc.eigvecs.data.data(), n_sq);
    detail::write_doubles_le(out, sc.eigvals.data(), sc.eigvals.size());
    if (!out) throw Error("failed writing checkpoint: " + path);
}

struct CheckpointMeta {
    std::string created_by;
};

inline Model load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint: " + path);

    int version = -1, n = -1, k = -1, steps = -1;
    double lambda = 0.0, hill_c = 0.0, beta = 0.0, dt = 0.0, sigma = 0.0;
    std::uint64_t train_seed = 0;
    std::size_t payload_doubles = 0, offset_eigvecs = 0, offset_eigvals = 0;
    bool have_offsets = false;
    std::string created_by, frozen_str;
    std::vector<Pattern> patterns;

    std::string line;
    bool saw_payload = false;
    while (std::getline(in, line)) {
        if (line == "payload") {
            saw_payload = true;
            break;
        }
        const std::size_t space = line.find(' ');
        const std::string key = line.substr(0, space);
        const std::string value = space == std::string::npos ? "" : line.substr(space + 1);
        if (key == "cvfr-checkpoint") {
            version = std::stoi(value);
        } else if (key == "n") {
            n = std::stoi(value);
        } else if (key == "k") {
            k = std::stoi(value);
        } else if (key == "lambda_planted") {
            lambda = std::strtod(value.c_str(), nullptr);
        } else if (key == "hill_c") {
            hill_c = std::strtod(value.c_str(), nullptr);
        } else if (key == "beta") {
            beta = std::strtod(value.c_str(), nullptr);
        } else if (key == "dt") {
            dt = std::strtod(value.c_str(), nullptr);
        } else if (key == "steps") {
            steps = std::stoi(value);
        } else if (key == "sigma") {
            sigma = std::strtod(value.c_str(), nullptr);
        } else if (key == "train_seed") {
            train_seed = std::strtoull(value.c_str(), nullptr, 10);
        } else if (key == "created_by") {
            created_by = value;
        } else if (key == "frozen") {
            frozen_str = value;
        } else if (key == "pattern") {
            Pattern p;
            p.reserve(value.size());
            for (char ch : value) {
                if (ch != '0' && ch != '1') throw Error(path + ": invalid pattern character");
                p.push_back(ch == '1' ? 1 : 0);
            }
            patterns.push_back(std::move(p));
        } else if (key == "payload_doubles") {
            payload_doubles = std::stoull(value);
        } else if (key == "offset_eigvecs") {
            offset_eigvecs = std::stoull(value);
            have_offsets = true;
        } else if (key == "offset_eigvals") {
            offset_eigvals = std::stoull(value);
        } else {
            throw Error(path + ": unknown checkpoint key: " + key);
        }
    }
    if (version != kCheckpointVersion)
        throw Error(path + ": unsupported checkpoint version " + std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
    if (!saw_payload) throw Error(path + ": checkpoint has no payload section");
    if (n <= 0 || k <= 0 || k > n) throw Error(path + ": invalid dimensions");
    if (static_cast<int>(patterns.size()) != k)
        throw Error(path + ": expected " + std::to_string(k) + " patterns, found " + std::to_string(patterns.size()));
    for (const auto& p : patterns) {
        if (static_cast<int>(p.size()) != n) throw Error(path + ": pattern length differs from n");
    }
    if (static_cast<int>(frozen_str.size()) != n) throw Error(path + ": frozen mask length differs from n");
    const double expected_beta = 1.0 / std::sqrt(static_cast<double>(n));
    if (beta != expected_beta) throw Error(path + ": stored beta is not 1/sqrt(n)");
    const std::size_t n_sq = static_cast<std::size_t>(n) * n;
    if (payload_doubles != n_sq + static_cast<std::size_t>(n) || !have_offsets || offset_eigvecs != 0 ||
        offset_eigvals != n_sq)
        throw Error(path + ": payload layout mismatch");

    Model model;
    SpectralCoupling& sc = model.coupling;
    sc.n = n;
    sc.k = k;
    sc.planted_eigenvalue = lambda;
    sc.hill_c = hill_c;
    sc.beta = beta;
    sc.eigvecs = Matrix(n, n);
    sc.eigvals.assign(static_cast<std::size_t>(n), 0.0);
    sc.frozen_cols.assign(static_cast<std::size_t>(n), 0);
    for (int j = 0; j < n; ++j) sc.frozen_cols[static_cast<std::size_t>(j)] = frozen_str[static_cast<std::size_t>(j)] == '1';
    detail::read_doubles_le(in, sc.eigvecs.data.data(), n_sq, path);
    detail::read_doubles_le(in, sc.eigvals.data(), static_cast<std::size_t>(n), path);

    model.attractors = make_attractors(std::move(patterns), solve_alphabet(lambda, hill_c, beta));
    model.integration.dt = dt;
    model.integration.steps = steps;
    model.integration.sigma = sigma;
    model.train_seed = train_seed;
    if (meta) meta->created_by = created_by;
    return model;
}

} // namespace cvfr
