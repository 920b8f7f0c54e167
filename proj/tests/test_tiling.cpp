#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "brushwork/error.hpp"
#include "brushwork/imageio.hpp"
#include "brushwork/tiling.hpp"
#include "oracles.hpp"

using namespace brushwork;
using imageio::ColorImage;
using imageio::GrayImage;

namespace {

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::IoError;
}

ColorImage flat(int w, int h, std::uint8_t v) {
    ColorImage img(w, h);
    std::fill(img.pixels.begin(), img.pixels.end(), v);
    return img;
}

}  // namespace

TEST_CASE("entropy of the three reference tiles") {
    const std::vector<std::uint8_t> constant(50 * 50, 128);
    CHECK(tiling::shannon_entropy(constant) == 0.0);

    std::vector<std::uint8_t> halves(64 * 64, 0);
    std::fill(halves.begin() + halves.size() / 2, halves.end(), 255);
    CHECK(tiling::shannon_entropy(halves) == 1.0);

    std::vector<std::uint8_t> ramp(64);
    std::iota(ramp.begin(), ramp.end(), 0);
    CHECK(tiling::shannon_entropy(ramp) == 6.0);

    CHECK(code_of([] { tiling::shannon_entropy({}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("entropy matches the counting oracle on random data") {
    std::mt19937_64 rng(1000);
    std::vector<std::uint8_t> bytes(1000);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    CHECK(std::abs(tiling::shannon_entropy(bytes) - oracle::entropy(bytes)) <= 1e-12);

    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const ColorImage tile = oracle::patchy_image(24, 24, seed);
        const GrayImage luma = imageio::to_grayscale(tile);
        const double h = tiling::shannon_entropy(luma.pixels);
        CHECK(std::abs(h - oracle::entropy(luma.pixels)) <= 1e-12);
        CHECK(h >= 0.0);
        CHECK(h <= 8.0);
    }
}

TEST_CASE("image entropy is the entropy of the full luma buffer") {
    CHECK(tiling::image_entropy(GrayImage(30, 20, 17)) == 0.0);
    GrayImage half(10, 10, 0);
    for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 10; ++x) half.at(x, y) = 255;
    }
    CHECK(tiling::image_entropy(half) == 1.0);
    const GrayImage g = imageio::to_grayscale(oracle::random_image(77, 51, 4));
    CHECK(std::abs(tiling::image_entropy(g) - oracle::entropy(g.pixels)) <= 1e-12);
}

TEST_CASE("entropy ignores gray-level relabelling and pixel order") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const GrayImage g = imageio::to_grayscale(oracle::patchy_image(32, 32, 100 + trial));
        const double h = tiling::shannon_entropy(g.pixels);

        std::vector<std::uint8_t> relabel(256);
        std::iota(relabel.begin(), relabel.end(), 0);
        std::shuffle(relabel.begin(), relabel.end(), rng);
        std::vector<std::uint8_t> mapped(g.pixels.size());
        std::transform(g.pixels.begin(), g.pixels.end(), mapped.begin(), [&](std::uint8_t v) { return relabel[v]; });
        CHECK(tiling::shannon_entropy(mapped) == h);

        auto shuffled = g.pixels;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(tiling::shannon_entropy(shuffled) == h);
    }
}

TEST_CASE("grid geometry examples") {
    const auto g = tiling::extract_tiles(flat(100, 100, 3), 50, 25);
    CHECK(g.grid_cols == 3);
    CHECK(g.grid_rows == 3);
    CHECK(g.tiles.size() == 9);

    for (int stride : {1, 7, 64, 500}) {
        const auto one = tiling::extract_tiles(flat(64, 64, 3), 64, stride);
        REQUIRE(one.tiles.size() == 1);
        CHECK(one.tiles[0].origin_x == 0);
        CHECK(one.tiles[0].origin_y == 0);
    }

    CHECK(code_of([] { tiling::extract_tiles(flat(100, 100, 3), 101, 10); }) == ErrorCode::TileLargerThanImage);
    CHECK(code_of([] { tiling::extract_tiles(flat(100, 40, 3), 50, 10); }) == ErrorCode::TileLargerThanImage);
    CHECK(code_of([] { tiling::extract_tiles(flat(10, 10, 3), 5, 0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("randomized grid counts and bit-identical tile windows") {
    std::mt19937_64 rng(2024);
    for (int c = 0; c < 200; ++c) {
        const int w = 1 + static_cast<int>(rng() % 90);
        const int h = 1 + static_cast<int>(rng() % 90);
        const int s = 1 + static_cast<int>(rng() % std::min(w, h));
        const int d = 1 + static_cast<int>(rng() % 40);
        const ColorImage img = oracle::random_image(w, h, rng());
        const auto grid = tiling::extract_tiles(img, s, d);
        const int cols = (w - s) / d + 1;
        const int rows = (h - s) / d + 1;
        REQUIRE(grid.grid_cols == cols);
        REQUIRE(grid.grid_rows == rows);
        REQUIRE(grid.tiles.size() == static_cast<std::size_t>(cols * rows));

        for (std::size_t i = 0; i < grid.tiles.size(); ++i) {
            const auto& t = grid.tiles[i];
            REQUIRE(t.col == static_cast<int>(i) % cols);
            REQUIRE(t.row == static_cast<int>(i) / cols);
            REQUIRE(t.origin_x == t.col * d);
            REQUIRE(t.origin_y == t.row * d);
            REQUIRE(t.origin_x + s <= w);
            REQUIRE(t.origin_y + s <= h);
            bool same = true;
            for (int y = 0; y < s && same; ++y) {
                same = std::equal(img.at(t.origin_x, t.origin_y + y), img.at(t.origin_x, t.origin_y + y) + s * 3,
                                  t.color.at(0, y));
            }
            REQUIRE(same);
            REQUIRE(t.luma == imageio::to_grayscale(t.color));
            REQUIRE(t.entropy == tiling::shannon_entropy(t.luma.pixels));
        }
    }
}

TEST_CASE("tiles cover the image apart from the dropped margin when stride <= size") {
    std::mt19937_64 rng(5);
    for (int c = 0; c < 30; ++c) {
        const int w = 20 + static_cast<int>(rng() % 60);
        const int h = 20 + static_cast<int>(rng() % 60);
        const int s = 1 + static_cast<int>(rng() % 20);
        const int d = 1 + static_cast<int>(rng() % s);
        const auto grid = tiling::extract_tiles(flat(w, h, 1), s, d);
        std::vector<int> cover(static_cast<std::size_t>(w) * h, 0);
        for (const auto& t : grid.tiles) {
            for (int y = t.origin_y; y < t.origin_y + s; ++y) {
                for (int x = t.origin_x; x < t.origin_x + s; ++x) ++cover[static_cast<std::size_t>(y) * w + x];
            }
        }
        const int reach_x = (grid.grid_cols - 1) * d + s;
        const int reach_y = (grid.grid_rows - 1) * d + s;
        for (int y = 0; y < reach_y; ++y) {
            for (int x = 0; x < reach_x; ++x) REQUIRE(cover[static_cast<std::size_t>(y) * w + x] >= 1);
        }
        CHECK(w - reach_x < d);
        CHECK(h - reach_y < d);
    }
}

TEST_CASE("salient selection equals a brute-force filter") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const ColorImage img = oracle::patchy_image(96, 80, seed);
        const auto grid = tiling::extract_tiles(img, 24, 12);
        const GrayImage luma = imageio::to_grayscale(img);
        const double h = oracle::entropy(luma.pixels);
        const double img_h = tiling::image_entropy(luma);

        std::vector<std::pair<int, int>> expected;
        for (const auto& t : grid.tiles) {
            GrayImage window(24, 24);
            for (int y = 0; y < 24; ++y) {
                for (int x = 0; x < 24; ++x) window.at(x, y) = luma.at(t.origin_x + x, t.origin_y + y);
            }
            if (oracle::entropy(window.pixels) >= 0.9 * h) expected.emplace_back(t.col, t.row);
        }
        if (expected.empty()) continue;
        const auto sel = tiling::select_salient(grid, img_h, 0.9, false);
        std::vector<std::pair<int, int>> got;
        for (const auto& t : sel.tiles) got.emplace_back(t.col, t.row);
        CHECK(got == expected);
        CHECK(sel.grid_tile_count == grid.tiles.size());
    }
}

TEST_CASE("tau 0 keeps every tile and larger tau never keeps more") {
    const ColorImage img = oracle::patchy_image(128, 128, 77);
    const auto grid = tiling::extract_tiles(img, 32, 16);
    const double h = tiling::image_entropy(imageio::to_grayscale(img));
    CHECK(tiling::select_salient(grid, h, 0.0, false).tiles.size() == grid.tiles.size());

    std::size_t previous = grid.tiles.size();
    for (double tau = 0.0; tau <= 1.2; tau += 0.05) {
        const auto mask = tiling::salient_mask(grid, h, tau);
        const auto kept = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
        CHECK(kept <= previous);
        previous = kept;
    }
}

TEST_CASE("a constant tile is excluded at tau 1 when the image has entropy") {
    ColorImage img = oracle::random_image(64, 64, 12);
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            auto* p = img.at(x, y);
            p[0] = p[1] = p[2] = 50;
        }
    }
    const auto grid = tiling::extract_tiles(img, 32, 32);
    const double h = tiling::image_entropy(imageio::to_grayscale(img));
    REQUIRE(h > 0.0);
    CHECK(grid.tiles[0].entropy == 0.0);
    const auto mask = tiling::salient_mask(grid, h, 1.0);
    CHECK_FALSE(mask[0]);
}

TEST_CASE("zero-entropy image selects all of its zero-entropy tiles") {
    const auto grid = tiling::extract_tiles(flat(40, 40, 9), 20, 10);
    const auto sel = tiling::select_salient(grid, 0.0, 1.0, false);
    CHECK(sel.tiles.size() == grid.tiles.size());
}

TEST_CASE("no salient tile: error, or the first highest-entropy tile with fallback") {
    // four tiles of equal entropy 1.0; a threshold above that rejects all
    ColorImage img(4, 4);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            auto* p = img.at(x, y);
            p[0] = p[1] = p[2] = static_cast<std::uint8_t>(x % 2 ? 200 : 10);
        }
    }
    const auto grid = tiling::extract_tiles(img, 2, 2);
    CHECK(code_of([&] { tiling::select_salient(grid, 1.0, 1.5, false); }) == ErrorCode::NoSalientTiles);
    const auto sel = tiling::select_salient(grid, 1.0, 1.5, true);
    REQUIRE(sel.tiles.size() == 1);
    CHECK(sel.tiles[0].col == 0);
    CHECK(sel.tiles[0].row == 0);
}
