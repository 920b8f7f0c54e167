#include "brushwork/tiling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <sstream>

#include "brushwork/error.hpp"
#include "brushwork/parallel.hpp"

namespace brushwork::tiling {

using imageio::ColorImage;
using imageio::GrayImage;

double shannon_entropy(std::span<const std::uint8_t> values) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "entropy of an empty collection");
    std::array<std::size_t, 256> hist{};
    for (std::uint8_t v : values) ++hist[v];
    // Sum in count order, not gray-level order, so relabelling the levels
    // cannot change the rounding.
    std::sort(hist.begin(), hist.end());
    const double n = static_cast<double>(values.size());
    double h = 0.0;
    for (std::size_t count : hist) {
        if (count == 0) continue;
        const double p = static_cast<double>(count) / n;
        h -= p * std::log2(p);
    }
    // a single occupied bin gives -1 * log2(1) = -0.0
    return h <= 0.0 ? 0.0 : h;
}

double image_entropy(const GrayImage& img) { return shannon_entropy(img.pixels); }

TileGrid extract_tiles(const ColorImage& img, int tile_size, int stride) {
    if (stride < 1) throw Error(ErrorCode::InvalidArgument, "stride must be >= 1, got " + std::to_string(stride));
    if (tile_size < 1 || tile_size > img.width || tile_size > img.height) {
        std::ostringstream msg;
        msg << "tile size " << tile_size << " for " << img.width << "x" << img.height << " image";
        throw Error(ErrorCode::TileLargerThanImage, msg.str());
    }

    const GrayImage gray = imageio::to_grayscale(img);

    TileGrid grid;
    grid.tile_size = tile_size;
    grid.stride = stride;
    grid.grid_cols = grid_extent(img.width, tile_size, stride);
    grid.grid_rows = grid_extent(img.height, tile_size, stride);
    grid.image_width = img.width;
    grid.image_height = img.height;
    grid.tiles.resize(static_cast<std::size_t>(grid.grid_cols) * grid.grid_rows);

    const std::size_t s = static_cast<std::size_t>(tile_size);
    parallel_for(grid.tiles.size(), [&](std::size_t i) {
        Tile& t = grid.tiles[i];
        t.col = static_cast<int>(i % grid.grid_cols);
        t.row = static_cast<int>(i / grid.grid_cols);
        t.origin_x = t.col * stride;
        t.origin_y = t.row * stride;
        t.size = tile_size;
        t.color = ColorImage(tile_size, tile_size);
        t.luma = GrayImage(tile_size, tile_size);
        for (int y = 0; y < tile_size; ++y) {
            std::memcpy(t.color.at(0, y), img.at(t.origin_x, t.origin_y + y), s * 3);
            std::memcpy(t.luma.pixels.data() + static_cast<std::size_t>(y) * s,
                        gray.pixels.data() + static_cast<std::size_t>(t.origin_y + y) * img.width + t.origin_x, s);
        }
        t.entropy = shannon_entropy(t.luma.pixels);
    });
    return grid;
}

std::vector<bool> salient_mask(const TileGrid& grid, double img_entropy, double tau) {
    if (!(tau >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be >= 0");
    const double threshold = tau * img_entropy;
    std::vector<bool> keep(grid.tiles.size());
    for (std::size_t i = 0; i < grid.tiles.size(); ++i) keep[i] = grid.tiles[i].entropy >= threshold;
    return keep;
}

SalientTileSet select_salient(const TileGrid& grid, double img_entropy, double tau, bool fallback_top1) {
    if (grid.tiles.empty()) throw Error(ErrorCode::EmptyInput, "empty tile grid");
    const std::vector<bool> keep = salient_mask(grid, img_entropy, tau);

    SalientTileSet out;
    out.threshold_ratio = tau;
    out.image_entropy = img_entropy;
    out.tile_size = grid.tile_size;
    out.stride = grid.stride;
    out.image_width = grid.image_width;
    out.image_height = grid.image_height;
    out.grid_tile_count = grid.tiles.size();
    for (std::size_t i = 0; i < grid.tiles.size(); ++i) {
        if (keep[i]) out.tiles.push_back(grid.tiles[i]);
    }
    if (!out.tiles.empty()) return out;

    // max_element returns the first maximum, i.e. the lowest grid index
    const auto best = std::max_element(grid.tiles.begin(), grid.tiles.end(),
                                       [](const Tile& a, const Tile& b) { return a.entropy < b.entropy; });
    if (!fallback_top1) {
        std::ostringstream msg;
        msg << "tau " << tau << ", max tile entropy " << best->entropy;
        throw Error(ErrorCode::NoSalientTiles, msg.str());
    }
    out.tiles.push_back(*best);
    return out;
}

}  // namespace brushwork::tiling
