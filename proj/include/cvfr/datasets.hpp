#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "cvfr/attractors.hpp"
#include "cvfr/errors.hpp"
#include "cvfr/matrix.hpp"
#include "cvfr/rng.hpp"

namespace cvfr {

struct LabeledDataset {
    int dim = 0;
    std::vector<Vector> items; // entries in [0,1] at generation time
    std::vector<int> labels;   // class indices

    std::size_t size() const { return items.size(); }
};

/// m distinct indices from [0, n), by partial Fisher-Yates on the stream.
inline std::vector<int> sample_distinct(int m, int n, SplitMix64& stream) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < m; ++i) {
        const int j = i + static_cast<int>(stream.next_below(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(m));
    return idx;
}

/// Synthetic letter items: each is a binary template with round(corruption*n)
/// distinct pixels replaced by uniform [0,1) draws. Item index c*n_per_class+j
/// owns the derived stream derive_seed(seed, index); indices are drawn before
/// replacement values. Items are ordered class-major.
inline LabeledDataset gen_letters(const std::vector<Pattern>& templates, int n_per_class,
                                  double corruption_fraction, std::uint64_t seed) {
    if (templates.empty()) throw Error("gen_letters: no templates");
    if (corruption_fraction < 0.0 || corruption_fraction > 1.0)
        throw Error("gen_letters: corruption fraction outside [0,1]");
    const int n = static_cast<int>(templates.front().size());
    const int n_replace = static_cast<int>(std::llround(corruption_fraction * n));

    LabeledDataset ds;
    ds.dim = n;
    ds.items.reserve(templates.size() * static_cast<std::size_t>(n_per_class));
    ds.labels.reserve(ds.items.capacity());
    for (std::size_t cls = 0; cls < templates.size(); ++cls) {
        const Pattern& tpl = templates[cls];
        if (static_cast<int>(tpl.size()) != n) throw DimensionError("gen_letters: template sizes differ");
        for (int j = 0; j < n_per_class; ++j) {
            const std::uint64_t index = cls * static_cast<std::size_t>(n_per_class) + static_cast<std::size_t>(j);
            SplitMix64 stream(derive_seed(seed, index));
            Vector item(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) item[static_cast<std::size_t>(i)] = tpl[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
            for (int idx : sample_distinct(n_replace, n, stream)) {
                item[static_cast<std::size_t>(idx)] = stream.next_unit();
            }
            ds.items.push_back(std::move(item));
            ds.labels.push_back(static_cast<int>(cls));
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// IDX (MNIST) files: 32-bit big-endian header words, then raw unsigned bytes.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::string& path) {
    if (offset + 4 > bytes.size())
        throw TruncatedFileError(path + ": truncated at offset " + std::to_string(bytes.size()) +
                                 " while reading a 32-bit word at offset " + std::to_string(offset));
    return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
           (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

} // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct IdxImageInfo {
    std::uint32_t count = 0, rows = 0, cols = 0;
};

/// Validates an IDX image file header and payload size.
inline IdxImageInfo idx_image_info(const std::vector<unsigned char>& bytes, const std::string& path) {
    const std::uint32_t magic = detail::read_be32(bytes, 0, path);
    if (magic != kIdxImageMagic) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "0x%08x", magic);
        throw BadMagicError(path + ": magic " + buf + " at offset 0, expected 0x00000803");
    }
    IdxImageInfo info;
    info.count = detail::read_be32(bytes, 4, path);
    info.rows = detail::read_be32(bytes, 8, path);
    info.cols = detail::read_be32(bytes, 12, path);
    const std::size_t expected = 16 + std::size_t(info.count) * info.rows * info.cols;
    if (bytes.size() < expected)
        throw TruncatedFileError(path + ": pixel data ends at offset " + std::to_string(bytes.size()) +
                                 ", expected " + std::to_string(expected) + " bytes");
    return info;
}

inline std::uint32_t idx_label_count(const std::vector<unsigned char>& bytes, const std::string& path) {
    const std::uint32_t magic = detail::read_be32(bytes, 0, path);
    if (magic != kIdxLabelMagic) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "0x%08x", magic);
        throw BadMagicError(path + ": magic " + buf + " at offset 0, expected 0x00000801");
    }
    const std::uint32_t count = detail::read_be32(bytes, 4, path);
    const std::size_t expected = 8 + std::size_t(count);
    if (bytes.size() < expected)
        throw TruncatedFileError(path + ": label data ends at offset " + std::to_string(bytes.size()) +
                                 ", expected " + std::to_string(expected) + " bytes");
    return count;
}

/// Loads an IDX image/label pair; pixels are mapped to [0,1] by /255.
inline LabeledDataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    const auto image_bytes = detail::read_file_bytes(images_path);
    const auto label_bytes = detail::read_file_bytes(labels_path);
    const IdxImageInfo info = idx_image_info(image_bytes, images_path);
    const std::uint32_t label_count = idx_label_count(label_bytes, labels_path);
    if (info.count != label_count)
        throw CountMismatchError(images_path + " has " + std::to_string(info.count) + " images but " +
                                 labels_path + " has " + std::to_string(label_count) + " labels");

    LabeledDataset ds;
    ds.dim = static_cast<int>(info.rows * info.cols);
    ds.items.reserve(info.count);
    ds.labels.reserve(info.count);
    std::size_t offset = 16;
    for (std::uint32_t img = 0; img < info.count; ++img) {
        Vector item(static_cast<std::size_t>(ds.dim));
        for (int i = 0; i < ds.dim; ++i) item[static_cast<std::size_t>(i)] = image_bytes[offset++] / 255.0;
        ds.items.push_back(std::move(item));
        ds.labels.push_back(static_cast<int>(label_bytes[8 + img]));
    }
    return ds;
}

/// Keeps the first n items (deterministic subset).
inline LabeledDataset head_subset(const LabeledDataset& ds, std::size_t n) {
    if (n >= ds.size()) return ds;
    LabeledDataset out;
    out.dim = ds.dim;
    out.items.assign(ds.items.begin(), ds.items.begin() + static_cast<std::ptrdiff_t>(n));
    out.labels.assign(ds.labels.begin(), ds.labels.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
}

// ---------------------------------------------------------------------------
// Dataset CSV: header "label,px_1,...,px_N", then one row per item.
// ---------------------------------------------------------------------------

inline void save_dataset_csv(const std::string& path, const LabeledDataset& ds) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write dataset file: " + path);
    out << "label";
    for (int i = 1; i <= ds.dim; ++i) out << ",px_" << i;
    out << "\n";
    char buf[32];
    for (std::size_t r = 0; r < ds.size(); ++r) {
        out << ds.labels[r];
        for (double v : ds.items[r]) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << ',' << buf;
        }
        out << "\n";
    }
    if (!out) throw Error("failed writing dataset file: " + path);
}

inline LabeledDataset load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset file: " + path);
    LabeledDataset ds;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("label", 0) == 0) continue; // header
        Vector item;
        const char* p = line.c_str();
        char* end = nullptr;
        const long label = std::strtol(p, &end, 10);
        if (end == p) throw Error(path + ": malformed row: " + line.substr(0, 40));
        p = end;
        while (*p != '\0') {
            if (*p == ',') ++p;
            const double v = std::strtod(p, &end);
            if (end == p) break;
            item.push_back(v);
            p = end;
        }
        if (ds.dim == 0) ds.dim = static_cast<int>(item.size());
        if (static_cast<int>(item.size()) != ds.dim)
            throw Error(path + ": inconsistent row width");
        ds.items.push_back(std::move(item));
        ds.labels.push_back(static_cast<int>(label));
    }
    if (ds.items.empty()) throw Error(path + ": no items");
    return ds;
}

} // namespace cvfr
