#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "brushwork/imageio.hpp"

namespace brushwork::tiling {

/// Square window cut from a source image, with its own pixel copies.
struct Tile {
    int col = 0;
    int row = 0;
    int origin_x = 0;
    int origin_y = 0;
    int size = 0;
    imageio::ColorImage color;  // size x size
    imageio::GrayImage luma;    // size x size
    double entropy = 0.0;       // bits, in [0, 8]
};

struct TileGrid {
    std::vector<Tile> tiles;  // row-major grid order
    int tile_size = 0;
    int stride = 0;
    int grid_cols = 0;
    int grid_rows = 0;
    int image_width = 0;
    int image_height = 0;
};

struct SalientTileSet {
    std::vector<Tile> tiles;  // grid order preserved
    double threshold_ratio = 0.0;
    double image_entropy = 0.0;
    int tile_size = 0;
    int stride = 0;
    int image_width = 0;
    int image_height = 0;
    std::size_t grid_tile_count = 0;
};

/// Shannon entropy in bits of the 256-bin histogram of `values`.
double shannon_entropy(std::span<const std::uint8_t> values);

double image_entropy(const imageio::GrayImage& img);

/// Number of tile positions along an axis of length `extent`.
inline int grid_extent(int extent, int tile_size, int stride) { return (extent - tile_size) / stride + 1; }

/// Cuts tiles at origins (col * stride, row * stride). Margins narrower than a
/// tile on the right and bottom are dropped.
TileGrid extract_tiles(const imageio::ColorImage& img, int tile_size, int stride);

/// Keeps tiles whose entropy is at least `tau * img_entropy`. When nothing
/// qualifies, `fallback_top1` returns the single highest-entropy tile (lowest
/// grid index on ties); otherwise NoSalientTiles is raised.
SalientTileSet select_salient(const TileGrid& grid, double img_entropy, double tau, bool fallback_top1);

/// Per-tile selection flags, the same rule as select_salient without copying tiles.
std::vector<bool> salient_mask(const TileGrid& grid, double img_entropy, double tau);

}  // namespace brushwork::tiling
