#include "brushwork/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "brushwork/error.hpp"
#include "brushwork/parallel.hpp"

namespace brushwork::attribution {

TileScores score_tiles(const nnet::Model& model, const tiling::SalientTileSet& tiles) {
    if (model.meta.tile_size != tiles.tile_size) {
        throw Error(ErrorCode::TileSizeMismatch, "model trained at " + std::to_string(model.meta.tile_size) +
                                                     " px, tiles are " + std::to_string(tiles.tile_size) + " px");
    }
    TileScores out(tiles.tiles.size());
    parallel_for(tiles.tiles.size(), [&](std::size_t i) {
        const tiling::Tile& t = tiles.tiles[i];
        out[i] = {t.col, t.row, t.origin_x, t.origin_y, t.entropy,
                  nnet::forward(model, nnet::normalize_tile(t, model.arch.input_resolution))};
    });
    return out;
}

namespace {

// Indices of `scores` in grid order (row, then column), whatever order the
// entries arrive in.
std::vector<std::size_t> grid_order(const TileScores& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = scores[a];
        const auto& y = scores[b];
        return std::tie(x.row, x.col, x.score) < std::tie(y.row, y.col, y.score);
    });
    return order;
}

}  // namespace

double aggregate(const TileScores& scores) {
    if (scores.empty()) throw Error(ErrorCode::EmptyScores, "no tile scores to aggregate");
    double sum = 0.0;
    for (std::size_t i : grid_order(scores)) sum += scores[i].score;
    return sum / static_cast<double>(scores.size());
}

imageio::Label verdict_for(double aggregate) {
    return aggregate >= kVerdictThreshold ? imageio::Label::Positive : imageio::Label::Negative;
}

AttributionReport attribute(const nnet::Model& model, const imageio::ColorImage& img, int tile_size, int stride,
                            double tau, bool fallback_top1) {
    const tiling::TileGrid grid = tiling::extract_tiles(img, tile_size, stride);
    const double h = tiling::image_entropy(imageio::to_grayscale(img));
    const tiling::SalientTileSet salient = tiling::select_salient(grid, h, tau, fallback_top1);

    AttributionReport report;
    report.tile_size = tile_size;
    report.stride = stride;
    report.tau = tau;
    report.n_tiles_total = grid.tiles.size();
    report.n_tiles_salient = salient.tiles.size();
    report.tile_scores = score_tiles(model, salient);
    report.aggregate = aggregate(report.tile_scores);
    report.verdict = verdict_for(report.aggregate);
    return report;
}

ContributionMap contribution_map(const TileScores& scores, int width, int height, int tile_size) {
    if (scores.empty()) throw Error(ErrorCode::EmptyScores, "no tile scores to project");
    if (width < 1 || height < 1 || tile_size < 1) throw Error(ErrorCode::InvalidArgument, "map geometry");

    ContributionMap map;
    map.width = width;
    map.height = height;
    const std::size_t n = static_cast<std::size_t>(width) * height;
    map.values.assign(n, 0.0);
    map.coverage.assign(n, 0);
    for (std::size_t k : grid_order(scores)) {
        const TileScore& s = scores[k];
        if (s.origin_x < 0 || s.origin_y < 0 || s.origin_x + tile_size > width || s.origin_y + tile_size > height) {
            throw Error(ErrorCode::InvalidArgument, "tile footprint outside the map");
        }
        for (int y = s.origin_y; y < s.origin_y + tile_size; ++y) {
            for (int x = s.origin_x; x < s.origin_x + tile_size; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * width + x;
                map.values[i] += s.score;
                ++map.coverage[i];
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (map.coverage[i] > 0) map.values[i] /= map.coverage[i];
    }
    return map;
}

std::string report_json(const AttributionReport& report) {
    nlohmann::ordered_json tiles = nlohmann::ordered_json::array();
    for (const auto& s : report.tile_scores) {
        tiles.push_back({{"col", s.col},
                         {"row", s.row},
                         {"x", s.origin_x},
                         {"y", s.origin_y},
                         {"entropy", s.entropy},
                         {"score", s.score}});
    }
    const nlohmann::ordered_json doc{
        {"image", report.image_path},
        {"tile_size", report.tile_size},
        {"stride", report.stride},
        {"tau", report.tau},
        {"n_tiles_total", report.n_tiles_total},
        {"n_tiles_salient", report.n_tiles_salient},
        {"aggregate", report.aggregate},
        {"verdict", imageio::to_string(report.verdict)},
        {"tiles", std::move(tiles)},
    };
    return doc.dump(2) + "\n";
}

imageio::GrayImage render_heatmap(const ContributionMap& map) {
    imageio::GrayImage out(map.width, map.height);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        if (map.coverage[i] > 0) {
            out.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(map.values[i], 0.0, 1.0) * 255.0));
        }
    }
    return out;
}

std::string uncovered_csv(const ContributionMap& map) {
    std::ostringstream out;
    out << "x,y\n";
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            if (!map.defined(x, y)) out << x << ',' << y << '\n';
        }
    }
    return out.str();
}

}  // namespace brushwork::attribution
