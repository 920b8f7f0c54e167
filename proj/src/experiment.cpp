#include "brushwork/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "brushwork/attribution.hpp"
#include "brushwork/error.hpp"
#include "brushwork/parallel.hpp"
#include "brushwork/rng.hpp"
#include "brushwork/tiling.hpp"

namespace brushwork::experiment {

using imageio::Label;
using imageio::ManifestEntry;

namespace {

std::string shortest(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

Split split_manifest(const imageio::DatasetManifest& manifest, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error(ErrorCode::InvalidArgument, "test fraction outside [0, 1]");

    const std::size_t n = manifest.entries.size();
    std::vector<char> in_test(n, 0);
    for (Label label : {Label::Positive, Label::Negative}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < n; ++i) {
            if (manifest.entries[i].label == label) idx.push_back(i);
        }
        if (idx.empty()) continue;
        std::size_t n_test = 0;
        if (fraction >= 1.0) {
            n_test = idx.size();
        } else if (fraction > 0.0) {
            if (idx.size() < 2) throw Error(ErrorCode::InsufficientData, imageio::to_string(label));
            const auto want = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
            n_test = std::clamp<std::size_t>(want, 1, idx.size() - 1);
        }
        Rng rng(derive_seed(seed, label == Label::Positive ? 1 : 2));
        seeded_shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t k = 0; k < n_test; ++k) in_test[idx[k]] = 1;
    }

    Split split;
    split.seed = seed;
    split.fraction = fraction;
    for (std::size_t i = 0; i < n; ++i) (in_test[i] ? split.test : split.train).push_back(manifest.entries[i]);
    return split;
}

std::string metrics_json(const Metrics& m) {
    const nlohmann::ordered_json doc{
        {"per_image_accuracy", m.per_image_accuracy},
        {"per_tile_accuracy", m.per_tile_accuracy},
        {"confusion", {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}}},
        {"n_images", m.n_images},
        {"n_tiles", m.n_tiles},
        {"n_skipped", m.n_skipped},
    };
    return doc.dump(2) + "\n";
}

ImageCache::ImageCache(const imageio::DatasetManifest& manifest) : manifest_(manifest) {
    keys_.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) keys_.push_back(e.image_path);
    images_.resize(keys_.size());
    parallel_for(images_.size(), [&](std::size_t i) { images_[i] = imageio::load_image(manifest_.resolve(manifest_.entries[i])); });
}

const imageio::ColorImage& ImageCache::get(const ManifestEntry& entry) const {
    const auto it = std::find(keys_.begin(), keys_.end(), entry.image_path);
    if (it == keys_.end()) throw Error(ErrorCode::FileNotFound, entry.image_path + " (not in manifest)");
    return images_[static_cast<std::size_t>(it - keys_.begin())];
}

Metrics evaluate(const nnet::Model& model, const ImageCache& cache, const std::vector<ManifestEntry>& entries,
                 int tile_size, int stride, double tau) {
    if (entries.empty()) throw Error(ErrorCode::EmptyInput, "no images to evaluate");
    Metrics m;
    for (const auto& entry : entries) {
        attribution::AttributionReport report;
        try {
            report = attribution::attribute(model, cache.get(entry), tile_size, stride, tau, false);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoSalientTiles) {
                throw Error(e.code(), entry.image_path + ": " + e.detail());
            }
            ++m.n_skipped;
            continue;
        }
        const bool truth = entry.label == Label::Positive;
        const bool said = report.verdict == Label::Positive;
        if (truth && said) ++m.tp;
        if (!truth && said) ++m.fp;
        if (!truth && !said) ++m.tn;
        if (truth && !said) ++m.fn;
        ++m.n_images;
        for (const auto& s : report.tile_scores) {
            m.tiles_correct += ((s.score >= attribution::kVerdictThreshold) == truth) ? 1 : 0;
        }
        m.n_tiles += report.tile_scores.size();
    }
    if (m.n_images > 0) m.per_image_accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(m.n_images);
    if (m.n_tiles > 0) m.per_tile_accuracy = static_cast<double>(m.tiles_correct) / static_cast<double>(m.n_tiles);
    return m;
}

Metrics evaluate(const nnet::Model& model, const imageio::DatasetManifest& manifest,
                 const std::vector<ManifestEntry>& entries, int tile_size, int stride, double tau) {
    if (entries.empty()) throw Error(ErrorCode::EmptyInput, "no images to evaluate");
    imageio::DatasetManifest subset;
    subset.base_dir = manifest.base_dir;
    subset.entries = entries;
    const ImageCache cache(subset);
    return evaluate(model, cache, entries, tile_size, stride, tau);
}

TileHarvest harvest_tiles(const ImageCache& cache, const std::vector<ManifestEntry>& entries, int tile_size,
                          int stride, double tau) {
    TileHarvest out;
    for (const auto& entry : entries) {
        const imageio::ColorImage& img = cache.get(entry);
        tiling::TileGrid grid;
        try {
            grid = tiling::extract_tiles(img, tile_size, stride);
        } catch (const Error& e) {
            throw Error(e.code(), entry.image_path + ": " + e.detail());
        }
        const double h = tiling::image_entropy(imageio::to_grayscale(img));
        const std::vector<bool> keep = tiling::salient_mask(grid, h, tau);
        const int label = entry.label == Label::Positive ? 1 : 0;
        bool any = false;
        for (std::size_t i = 0; i < grid.tiles.size(); ++i) {
            if (!keep[i]) continue;
            out.samples.push_back({std::move(grid.tiles[i].color), label});
            any = true;
        }
        if (!any) ++out.n_skipped;
    }
    return out;
}

SweepResult run_sweep(const imageio::DatasetManifest& manifest, const std::vector<int>& sizes, const SweepConfig& cfg) {
    if (sizes.size() < 2) throw Error(ErrorCode::InvalidArgument, "a sweep needs at least two tile sizes");
    std::set<int> distinct;
    for (int s : sizes) {
        if (s < 1) throw Error(ErrorCode::InvalidArgument, "tile size must be >= 1");
        if (!distinct.insert(s).second) throw Error(ErrorCode::DuplicateSize, std::to_string(s));
    }
    cfg.train.validate();
    cfg.arch.validate();
    if (!(cfg.tau >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be >= 0");

    SweepResult result;
    result.config = cfg;
    result.split = split_manifest(manifest, cfg.test_fraction, cfg.seed);
    if (result.split.test.empty()) throw Error(ErrorCode::InsufficientData, "sweep needs test images");

    const ImageCache cache(manifest);
    for (int size : sizes) {
        for (const auto& e : manifest.entries) {
            const auto& img = cache.get(e);
            if (size > img.width || size > img.height) {
                throw Error(ErrorCode::TileLargerThanImage, "tile size " + std::to_string(size) + " for " + e.image_path);
            }
        }
    }

    for (int size : sizes) {
        SweepRow row;
        row.tile_size = size;
        row.stride = sweep_stride(size);

        TileHarvest harvest = harvest_tiles(cache, result.split.train, size, row.stride, cfg.tau);
        nnet::Model model = nnet::init_model(cfg.arch, derive_seed(cfg.seed, 2 * static_cast<std::uint64_t>(size)));
        model.meta.tile_size = size;
        model.meta.stride = row.stride;
        model.meta.tau = cfg.tau;

        nnet::TrainConfig train_cfg = cfg.train;
        train_cfg.seed = derive_seed(cfg.seed, 2 * static_cast<std::uint64_t>(size) + 1);
        nnet::TrainResult trained = nnet::train(std::move(model), harvest.samples, train_cfg);

        row.n_train_tiles = harvest.samples.size();
        row.loss_history = std::move(trained.loss_history);
        row.test_metrics = evaluate(trained.model, cache, result.split.test, size, row.stride, cfg.tau);
        row.per_image_accuracy = row.test_metrics.per_image_accuracy;
        row.per_tile_accuracy = row.test_metrics.per_tile_accuracy;
        row.n_test_tiles = row.test_metrics.n_tiles;
        result.rows.push_back(std::move(row));
    }
    return result;
}

std::string sweep_csv(const SweepResult& result) {
    std::string out = "tile_size,per_image_accuracy,per_tile_accuracy,n_train_tiles,n_test_tiles\n";
    for (const auto& r : result.rows) {
        out += std::to_string(r.tile_size) + "," + shortest(r.per_image_accuracy) + "," +
               shortest(r.per_tile_accuracy) + "," + std::to_string(r.n_train_tiles) + "," +
               std::to_string(r.n_test_tiles) + "\n";
    }
    return out;
}

namespace {

void draw_line(imageio::GrayImage& img, int x0, int y0, int x1, int y1, std::uint8_t value) {
    const int dx = std::abs(x1 - x0);
    const int dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1;
    const int sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        if (x0 >= 0 && y0 >= 0 && x0 < img.width && y0 < img.height) img.at(x0, y0) = value;
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

}  // namespace

imageio::GrayImage sweep_plot(const SweepResult& result, int width, int height) {
    imageio::GrayImage img(width, height, 255);
    const int left = 40;
    const int right = width - 20;
    const int top = 20;
    const int bottom = height - 30;
    draw_line(img, left, top, left, bottom, 0);
    draw_line(img, left, bottom, right, bottom, 0);
    // gridlines at accuracy 0.25, 0.5, 0.75, 1.0
    for (int q = 1; q <= 4; ++q) {
        const int y = bottom - (bottom - top) * q / 4;
        for (int x = left; x <= right; x += 4) img.at(x, y) = 160;
    }

    const std::size_t n = result.rows.size();
    if (n == 0) return img;
    auto px = [&](std::size_t i) {
        return n == 1 ? (left + right) / 2 : left + 10 + static_cast<int>((right - left - 20) * i / (n - 1));
    };
    auto py = [&](double acc) { return bottom - static_cast<int>(std::lround(acc * (bottom - top))); };
    for (std::size_t i = 0; i < n; ++i) {
        const int x = px(i);
        draw_line(img, x, bottom, x, bottom + 5, 0);
        if (i + 1 < n) {
            draw_line(img, x, py(result.rows[i].per_tile_accuracy), px(i + 1), py(result.rows[i + 1].per_tile_accuracy), 128);
            draw_line(img, x, py(result.rows[i].per_image_accuracy), px(i + 1), py(result.rows[i + 1].per_image_accuracy), 0);
        }
        const int y = py(result.rows[i].per_image_accuracy);
        for (int d = -3; d <= 3; ++d) {
            draw_line(img, x - 3, y + d, x + 3, y + d, 0);
        }
    }
    return img;
}

imageio::DatasetManifest shuffle_labels(const imageio::DatasetManifest& manifest, std::uint64_t seed) {
    imageio::DatasetManifest out = manifest;
    std::vector<Label> labels;
    for (const auto& e : manifest.entries) labels.push_back(e.label);
    Rng rng(seed);
    seeded_shuffle(labels.begin(), labels.end(), rng);
    for (std::size_t i = 0; i < labels.size(); ++i) out.entries[i].label = labels[i];
    return out;
}

}  // namespace brushwork::experiment
