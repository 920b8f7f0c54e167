#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "brushwork/imageio.hpp"
#include "brushwork/nnet.hpp"

namespace brushwork::experiment {

/// Image-level train/test partition of a manifest.
struct Split {
    std::vector<imageio::ManifestEntry> train;
    std::vector<imageio::ManifestEntry> test;
    std::uint64_t seed = 0;
    double fraction = 0.25;
};

/// Stratified by label and deterministic per seed. Entries keep manifest order
/// on each side.
Split split_manifest(const imageio::DatasetManifest& manifest, double fraction, std::uint64_t seed);

struct Metrics {
    double per_image_accuracy = 0.0;
    double per_tile_accuracy = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
    std::size_t n_images = 0;   // images with at least one salient tile
    std::size_t n_tiles = 0;
    std::size_t n_skipped = 0;  // images without salient tiles
    std::size_t tiles_correct = 0;
};

std::string metrics_json(const Metrics& m);

/// Resolves and decodes every manifest entry once; the sweep shares the cache
/// across tile sizes.
class ImageCache {
public:
    explicit ImageCache(const imageio::DatasetManifest& manifest);
    const imageio::ColorImage& get(const imageio::ManifestEntry& entry) const;

private:
    const imageio::DatasetManifest& manifest_;
    std::vector<std::string> keys_;
    std::vector<imageio::ColorImage> images_;
};

/// Attributes every entry and compares verdicts with labels. Images with no
/// salient tile are skipped and counted.
Metrics evaluate(const nnet::Model& model, const imageio::DatasetManifest& manifest,
                 const std::vector<imageio::ManifestEntry>& entries, int tile_size, int stride, double tau);
Metrics evaluate(const nnet::Model& model, const ImageCache& cache, const std::vector<imageio::ManifestEntry>& entries,
                 int tile_size, int stride, double tau);

/// Salient tiles of the given images as labeled training samples. Images
/// with no salient tile contribute nothing.
struct TileHarvest {
    std::vector<nnet::Sample> samples;
    std::size_t n_skipped = 0;
};
TileHarvest harvest_tiles(const ImageCache& cache, const std::vector<imageio::ManifestEntry>& entries, int tile_size,
                          int stride, double tau);

struct SweepConfig {
    nnet::TrainConfig train;
    nnet::Architecture arch;
    double tau = 1.0;
    double test_fraction = 0.25;
    std::uint64_t seed = 42;
};

struct SweepRow {
    int tile_size = 0;
    int stride = 0;
    double per_image_accuracy = 0.0;
    double per_tile_accuracy = 0.0;
    std::size_t n_train_tiles = 0;
    std::size_t n_test_tiles = 0;
    Metrics test_metrics;
    std::vector<double> loss_history;
};

struct SweepResult {
    std::vector<SweepRow> rows;  // requested size order
    SweepConfig config;
    Split split;
};

/// Stride used for a tile size throughout the sweep: half the tile, at least 1.
inline int sweep_stride(int tile_size) { return tile_size / 2 > 0 ? tile_size / 2 : 1; }

/// One shared split; per size a fresh model seeded from (seed, size) is
/// trained on the training images' salient tiles and evaluated on the test
/// images.
SweepResult run_sweep(const imageio::DatasetManifest& manifest, const std::vector<int>& sizes, const SweepConfig& cfg);

/// `tile_size,per_image_accuracy,per_tile_accuracy,n_train_tiles,n_test_tiles`.
std::string sweep_csv(const SweepResult& result);

/// Accuracy-vs-tile-size line chart.
imageio::GrayImage sweep_plot(const SweepResult& result, int width = 480, int height = 320);

/// Copy of the manifest with labels reassigned by a seeded permutation, so the
/// class balance is preserved but labels carry no image information.
imageio::DatasetManifest shuffle_labels(const imageio::DatasetManifest& manifest, std::uint64_t seed);

/// Parameters of the two-class synthetic stroke corpus.
struct SynthSpec {
    int canvas = 512;
    int count_per_class = 20;
    int signal_scale = 32;
    std::uint64_t seed = 42;

    void validate() const;
};

/// Edge length in pixels of one grain cell of the synthetic corpus.
int synth_cell_size(int signal_scale);

/// Renders one canvas. Positive and negative canvases share composition and
/// luma statistics and differ only in stroke structure at `signal_scale`.
/// When `coverage` is given it receives the painted fraction of the canvas.
imageio::GrayImage render_synth(const SynthSpec& spec, imageio::Label label, int index,
                                double* coverage = nullptr);

/// Writes `positive_NNN.png`, `negative_NNN.png` and `manifest.csv` into `out_dir`.
imageio::DatasetManifest gen_synth(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace brushwork::experiment
