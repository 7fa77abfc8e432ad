#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "srbm/model.hpp"
#include "srbm/rbm.hpp"

namespace srbm {

struct GrayImage {
    int width  = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels; ///< row-major, height * width

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill) : width(w), height(h), pixels(std::size_t(w) * h, fill) {}

    std::uint8_t& at(int row, int col) { return pixels[std::size_t(row) * width + col]; }
    std::uint8_t at(int row, int col) const { return pixels[std::size_t(row) * width + col]; }
};

/// Binary PGM (P5), maxval 255.
inline void write_pgm(std::ostream& out, const GrayImage& img) {
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
}

inline void write_pgm(const std::string& path, const GrayImage& img) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    write_pgm(out, img);
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

struct TileLayout {
    int tile_side = 28;
    int separator = 2;
    std::uint8_t separator_value = 255;
};

namespace detail {

/// Min-max normalizes one filter into a tile; a constant filter becomes mid-gray 128.
template <typename Column>
void draw_tile(GrayImage& img, int top, int left, const Column& w, int side) {
    const double lo = w.minCoeff();
    const double hi = w.maxCoeff();
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            const double v = w[r * side + c];
            std::uint8_t px = 128;
            if (hi > lo) {
                px = static_cast<std::uint8_t>(std::lround(255.0 * (v - lo) / (hi - lo)));
            }
            img.at(top + r, left + c) = px;
        }
    }
}

inline GrayImage blank_grid(int rows, int cols, const TileLayout& layout) {
    const int height = rows * layout.tile_side + (rows - 1) * layout.separator;
    const int width  = cols * layout.tile_side + (cols - 1) * layout.separator;
    return GrayImage(width, height, layout.separator_value);
}

} // namespace detail

/*!
 * \brief One row per gate, K tiles per row: tile (j, k) is W[.][j][k] reshaped to
 * side x side, so filters sharing a gate sit next to each other.
 *
 * Only the first max_gates gates are drawn when max_gates > 0.
 */
inline GrayImage subspace_filter_grid(const ModelParams& p, int max_gates = 0, const TileLayout& layout = {}) {
    const auto side = layout.tile_side;
    if (p.shape.D() != Eigen::Index(side) * side) {
        throw DimensionError("filter export needs D_vis = " + std::to_string(side * side) + ", model has " +
                             std::to_string(p.shape.visible));
    }
    const int gates = max_gates > 0 ? std::min<int>(max_gates, int(p.shape.M())) : int(p.shape.M());
    const int K     = int(p.shape.K());
    GrayImage img   = detail::blank_grid(gates, K, layout);
    for (int j = 0; j < gates; ++j) {
        for (int k = 0; k < K; ++k) {
            detail::draw_tile(img, j * (side + layout.separator), k * (side + layout.separator),
                              p.W.col(Eigen::Index(j) * K + k), side);
        }
    }
    return img;
}

/// RBM filters in rows of `per_row` tiles.
inline GrayImage rbm_filter_grid(const RbmParams& p, int max_units = 0, int per_row = 10,
                                 const TileLayout& layout = {}) {
    const auto side = layout.tile_side;
    if (p.D() != Eigen::Index(side) * side) {
        throw DimensionError("filter export needs D_vis = " + std::to_string(side * side) + ", model has " +
                             std::to_string(p.D()));
    }
    const int units = max_units > 0 ? std::min<int>(max_units, int(p.M())) : int(p.M());
    const int cols  = std::min(per_row, units);
    const int rows  = (units + cols - 1) / cols;
    GrayImage img   = detail::blank_grid(rows, cols, layout);
    for (int u = 0; u < units; ++u) {
        detail::draw_tile(img, (u / cols) * (side + layout.separator), (u % cols) * (side + layout.separator),
                          p.W.col(u), side);
    }
    return img;
}

} // namespace srbm
