#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "brushwork/imageio.hpp"
#include "brushwork/nnet.hpp"
#include "brushwork/tiling.hpp"

namespace brushwork::attribution {

struct TileScore {
    int col = 0;
    int row = 0;
    int origin_x = 0;
    int origin_y = 0;
    double entropy = 0.0;
    double score = 0.0;

    bool operator==(const TileScore&) const = default;
};

using TileScores = std::vector<TileScore>;

/// Aggregate at or above this value is a positive verdict.
inline constexpr double kVerdictThreshold = 0.5;

struct AttributionReport {
    std::string image_path;
    int tile_size = 0;
    int stride = 0;
    double tau = 0.0;
    std::size_t n_tiles_total = 0;
    std::size_t n_tiles_salient = 0;
    double aggregate = 0.0;
    imageio::Label verdict = imageio::Label::Negative;
    TileScores tile_scores;
};

/// Per-pixel mean of the scores of the salient tiles covering the pixel.
/// `values` is meaningful only where `coverage > 0`.
struct ContributionMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;
    std::vector<int> coverage;

    bool defined(int x, int y) const { return coverage[static_cast<std::size_t>(y) * width + x] > 0; }
    double value(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Scores each salient tile with the model. The tiles must have been cut at
/// the size the model was trained on.
TileScores score_tiles(const nnet::Model& model, const tiling::SalientTileSet& tiles);

/// Arithmetic mean of the scores, summed in the given (grid) order.
double aggregate(const TileScores& scores);

imageio::Label verdict_for(double aggregate);

/// extract_tiles -> select_salient -> score_tiles -> aggregate.
AttributionReport attribute(const nnet::Model& model, const imageio::ColorImage& img, int tile_size, int stride,
                            double tau, bool fallback_top1 = false);

ContributionMap contribution_map(const TileScores& scores, int width, int height, int tile_size);

/// JSON with keys image, tile_size, stride, tau, n_tiles_total,
/// n_tiles_salient, aggregate, verdict and tiles.
std::string report_json(const AttributionReport& report);

/// Defined pixels map to round(score * 255); uncovered pixels are 0.
imageio::GrayImage render_heatmap(const ContributionMap& map);

/// `x,y` rows for every uncovered pixel.
std::string uncovered_csv(const ContributionMap& map);

}  // namespace brushwork::attribution
