#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <zlib.h>

#include "srbm/core.hpp"
#include "srbm/rng.hpp"

namespace srbm::mnist {

inline constexpr std::uint32_t image_magic = 0x00000803;
inline constexpr std::uint32_t label_magic = 0x00000801;

struct RawImages {
    std::uint32_t count = 0;
    std::uint32_t rows  = 0;
    std::uint32_t cols  = 0;
    std::vector<std::uint8_t> pixels; ///< count * rows * cols, row-major per image

    std::size_t pixels_per_image() const { return std::size_t(rows) * cols; }
    const std::uint8_t* image(std::size_t n) const { return pixels.data() + n * pixels_per_image(); }
};

enum class Split { train, validation, test };

inline const char* to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
    }
    return "?";
}

struct Dataset {
    Matrix images;                    ///< N x pixels, entries 0/1
    std::vector<int> labels;          ///< N, values 0-9
    Split split = Split::train;
    std::vector<std::size_t> sources; ///< row index in the originating corpus

    Eigen::Index size() const { return images.rows(); }
};

struct SplitSpec {
    int per_digit_train    = 100;
    int validation_size    = 10000;
    int test_size          = 10000;
    RngSeed seed{};

    int train_size() const { return 10 * per_digit_train; }

    void validate() const {
        if (per_digit_train != 10 && per_digit_train != 100 && per_digit_train != 1000) {
            throw std::invalid_argument("per_digit_train must be one of 10, 100, 1000");
        }
        if (validation_size < 0 || test_size < 0) {
            throw std::invalid_argument("split sizes must be non-negative");
        }
    }
};

namespace detail {

/// Whole-file read through zlib; gzopen reads uncompressed files transparently.
inline std::vector<std::uint8_t> read_file(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (f == nullptr) {
        throw FormatError("cannot open " + path);
    }
    std::vector<std::uint8_t> data;
    std::array<std::uint8_t, 1 << 16> buf{};
    int n = 0;
    while ((n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()))) > 0) {
        data.insert(data.end(), buf.begin(), buf.begin() + n);
    }
    int errnum        = Z_OK;
    const char* msg   = gzerror(f, &errnum);
    const bool failed = n < 0 || (errnum != Z_OK && errnum != Z_STREAM_END);
    const std::string detail = failed ? std::string(msg) : std::string();
    gzclose(f);
    if (failed) {
        throw FormatError("read error in " + path + ": " + detail);
    }
    return data;
}

inline std::uint32_t be32(const std::vector<std::uint8_t>& d, std::size_t off) {
    return (std::uint32_t(d[off]) << 24) | (std::uint32_t(d[off + 1]) << 16) | (std::uint32_t(d[off + 2]) << 8) |
           std::uint32_t(d[off + 3]);
}

inline std::string hex32(std::uint32_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s = "0x";
    for (int shift = 28; shift >= 0; shift -= 4) {
        s += digits[(v >> shift) & 0xF];
    }
    return s;
}

inline void check_header(const std::vector<std::uint8_t>& d, std::size_t header, std::uint32_t magic,
                         const std::string& path) {
    if (d.size() < header) {
        throw FormatError(path + ": file too short for IDX header (" + std::to_string(d.size()) + " bytes, need " +
                          std::to_string(header) + ")");
    }
    if (be32(d, 0) != magic) {
        throw FormatError(path + ": bad IDX magic " + hex32(be32(d, 0)) + ", expected " + hex32(magic));
    }
}

} // namespace detail

inline RawImages parse_idx_images(const std::vector<std::uint8_t>& d, const std::string& name = "<memory>") {
    detail::check_header(d, 16, image_magic, name);
    RawImages img;
    img.count = detail::be32(d, 4);
    img.rows  = detail::be32(d, 8);
    img.cols  = detail::be32(d, 12);
    const std::size_t expected = std::size_t(img.count) * img.rows * img.cols;
    if (d.size() - 16 != expected) {
        throw FormatError(name + ": payload size mismatch, expected " + std::to_string(expected) + " bytes, got " +
                          std::to_string(d.size() - 16));
    }
    img.pixels.assign(d.begin() + 16, d.end());
    return img;
}

inline std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& d, const std::string& name = "<memory>") {
    detail::check_header(d, 8, label_magic, name);
    const std::size_t count = detail::be32(d, 4);
    if (d.size() - 8 != count) {
        throw FormatError(name + ": payload size mismatch, expected " + std::to_string(count) + " bytes, got " +
                          std::to_string(d.size() - 8));
    }
    std::vector<int> labels(count);
    for (std::size_t n = 0; n < count; ++n) {
        labels[n] = d[8 + n];
        if (labels[n] > 9) {
            throw FormatError(name + ": label " + std::to_string(labels[n]) + " out of range at index " +
                              std::to_string(n));
        }
    }
    return labels;
}

/// Raw or gzip-compressed IDX image file (magic 0x00000803).
inline RawImages load_idx_images(const std::string& path) { return parse_idx_images(detail::read_file(path), path); }

/// Raw or gzip-compressed IDX label file (magic 0x00000801).
inline std::vector<int> load_idx_labels(const std::string& path) {
    return parse_idx_labels(detail::read_file(path), path);
}

/// 1 where pixel / 255 > threshold.
inline Matrix binarize(const RawImages& raw, double threshold = 0.5) {
    Matrix out(raw.count, Eigen::Index(raw.pixels_per_image()));
    for (Eigen::Index n = 0; n < out.rows(); ++n) {
        const std::uint8_t* px = raw.image(std::size_t(n));
        for (Eigen::Index i = 0; i < out.cols(); ++i) {
            out(n, i) = double(px[i]) / 255.0 > threshold ? 1.0 : 0.0;
        }
    }
    return out;
}

/// Binary input stays as is for any threshold in [0, 1).
inline Matrix binarize(const Matrix& pixels01, double threshold = 0.5) {
    return (pixels01.array() > threshold).cast<double>().matrix();
}

struct Splits {
    Dataset train;
    Dataset validation;
    Dataset test;
};

namespace detail {

inline Dataset gather(const RawImages& raw, const std::vector<int>& labels, const std::vector<std::size_t>& rows,
                      Split split, double threshold) {
    Dataset ds;
    ds.split   = split;
    ds.sources = rows;
    ds.images.resize(Eigen::Index(rows.size()), Eigen::Index(raw.pixels_per_image()));
    ds.labels.reserve(rows.size());
    for (std::size_t n = 0; n < rows.size(); ++n) {
        const std::uint8_t* px = raw.image(rows[n]);
        for (Eigen::Index i = 0; i < ds.images.cols(); ++i) {
            ds.images(Eigen::Index(n), i) = double(px[i]) / 255.0 > threshold ? 1.0 : 0.0;
        }
        ds.labels.push_back(labels[rows[n]]);
    }
    return ds;
}

} // namespace detail

/*!
 * \brief Builds train / validation / test datasets.
 *
 * The training corpus is shuffled by the split seed; train takes the first
 * per_digit_train examples of every digit in that order, validation the next
 * validation_size examples of the remainder. Test is the head of the test corpus.
 */
inline Splits make_splits(const RawImages& train_images, const std::vector<int>& train_labels,
                          const RawImages& test_images, const std::vector<int>& test_labels, const SplitSpec& spec,
                          double threshold = 0.5) {
    spec.validate();
    if (train_images.count != train_labels.size() || test_images.count != test_labels.size()) {
        throw FormatError("image and label counts differ");
    }
    if (train_images.pixels_per_image() != test_images.pixels_per_image()) {
        throw FormatError("train and test image sizes differ");
    }
    std::vector<std::size_t> order(train_labels.size());
    for (std::size_t n = 0; n < order.size(); ++n) {
        order[n] = n;
    }
    Rng rng(spec.seed);
    shuffle(order, rng);

    std::array<int, 10> taken{};
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> rest;
    for (std::size_t n : order) {
        int& t = taken[std::size_t(train_labels[n])];
        if (t < spec.per_digit_train) {
            ++t;
            train_rows.push_back(n);
        } else {
            rest.push_back(n);
        }
    }
    for (int d = 0; d < 10; ++d) {
        if (taken[std::size_t(d)] < spec.per_digit_train) {
            throw std::invalid_argument("insufficient examples of digit " + std::to_string(d) + ": have " +
                                        std::to_string(taken[std::size_t(d)]) + ", need " +
                                        std::to_string(spec.per_digit_train));
        }
    }
    if (rest.size() < std::size_t(spec.validation_size)) {
        throw std::invalid_argument("insufficient examples for validation: have " + std::to_string(rest.size()) +
                                    ", need " + std::to_string(spec.validation_size));
    }
    if (test_labels.size() < std::size_t(spec.test_size)) {
        throw std::invalid_argument("insufficient test examples: have " + std::to_string(test_labels.size()) +
                                    ", need " + std::to_string(spec.test_size));
    }
    rest.resize(std::size_t(spec.validation_size));
    std::vector<std::size_t> test_rows(std::size_t(spec.test_size));
    for (std::size_t n = 0; n < test_rows.size(); ++n) {
        test_rows[n] = n;
    }
    return {detail::gather(train_images, train_labels, train_rows, Split::train, threshold),
            detail::gather(train_images, train_labels, rest, Split::validation, threshold),
            detail::gather(test_images, test_labels, test_rows, Split::test, threshold)};
}

struct Corpus {
    RawImages train_images;
    std::vector<int> train_labels;
    RawImages test_images;
    std::vector<int> test_labels;
};

/// Looks for the four standard file names, with or without a .gz suffix, under dir.
inline std::string find_idx_file(const std::string& dir, const std::string& stem) {
    for (const char* suffix : {"", ".gz"}) {
        const std::string path = dir + "/" + stem + suffix;
        if (gzFile f = gzopen(path.c_str(), "rb")) {
            gzclose(f);
            return path;
        }
    }
    throw FormatError("missing MNIST file " + dir + "/" + stem + "[.gz]");
}

inline Corpus load_corpus(const std::string& dir) {
    return {load_idx_images(find_idx_file(dir, "train-images-idx3-ubyte")),
            load_idx_labels(find_idx_file(dir, "train-labels-idx1-ubyte")),
            load_idx_images(find_idx_file(dir, "t10k-images-idx3-ubyte")),
            load_idx_labels(find_idx_file(dir, "t10k-labels-idx1-ubyte"))};
}

inline Splits make_splits(const Corpus& c, const SplitSpec& spec) {
    return make_splits(c.train_images, c.train_labels, c.test_images, c.test_labels, spec);
}

} // namespace srbm::mnist
