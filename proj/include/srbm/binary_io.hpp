#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "srbm/core.hpp"

namespace srbm::io {

inline void write_u32_le(std::ostream& out, std::uint32_t v) {
    std::array<char, 4> bytes{};
    for (int i = 0; i < 4; ++i) {
        bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
    }
    out.write(bytes.data(), bytes.size());
}

inline void write_f64_le(std::ostream& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    std::array<char, 8> bytes{};
    for (int i = 0; i < 8; ++i) {
        bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
    }
    out.write(bytes.data(), bytes.size());
}

template <typename Derived>
void write_f64_block(std::ostream& out, const Eigen::DenseBase<Derived>& block) {
    // Row-major traversal regardless of the storage order.
    for (Eigen::Index r = 0; r < block.rows(); ++r) {
        for (Eigen::Index c = 0; c < block.cols(); ++c) {
            write_f64_le(out, block(r, c));
        }
    }
}

/// Reads fixed-width little-endian fields, naming the field in any error.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    void read_bytes(char* dst, std::size_t n, const std::string& field) {
        in_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw FormatError("truncated file while reading " + field);
        }
    }

    std::uint32_t u32_le(const std::string& field) {
        std::array<unsigned char, 4> b{};
        read_bytes(reinterpret_cast<char*>(b.data()), b.size(), field);
        return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
               (std::uint32_t(b[3]) << 24);
    }

    double f64_le(const std::string& field) {
        std::array<unsigned char, 8> b{};
        read_bytes(reinterpret_cast<char*>(b.data()), b.size(), field);
        std::uint64_t bits = 0;
        for (int i = 7; i >= 0; --i) {
            bits = (bits << 8) | b[i];
        }
        return std::bit_cast<double>(bits);
    }

    template <typename Derived>
    void f64_block(Eigen::DenseBase<Derived>& block, const std::string& field) {
        for (Eigen::Index r = 0; r < block.rows(); ++r) {
            for (Eigen::Index c = 0; c < block.cols(); ++c) {
                block(r, c) = f64_le(field);
            }
        }
    }

    void expect_magic(const std::string& magic, std::uint8_t version) {
        std::string got(magic.size(), '\0');
        read_bytes(got.data(), got.size(), "magic");
        if (got != magic) {
            throw FormatError("bad magic: expected \"" + magic + "\"");
        }
        char v = 0;
        read_bytes(&v, 1, "version");
        if (static_cast<std::uint8_t>(v) != version) {
            throw FormatError("unsupported version " + std::to_string(static_cast<unsigned char>(v)));
        }
    }

    void expect_end() {
        if (in_.peek() != std::char_traits<char>::eof()) {
            throw FormatError("unexpected trailing bytes after last field");
        }
    }

private:
    std::istream& in_;
};

} // namespace srbm::io
