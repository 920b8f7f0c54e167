// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "brushwork/attribution.hpp"
#include "brushwork/error.hpp"
#include "brushwork/experiment.hpp"
#include "brushwork/nnet.hpp"
#include "brushwork/tiling.hpp"
#include "layer_gradcheck.hpp"
#include "oracles.hpp"
#include "tempdir.hpp"

using namespace brushwork;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    // Records a failed condition; the detail keeps accumulating either way.
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += " [failed: " + what + "]";
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::IoError;
}

bool within_coin_flip(double acc) { return acc >= 0.35 && acc <= 0.65; }

// The shared corpus for the two sweep criteria.
struct SweepCorpus {
    fixture::TempDir dir;
    imageio::DatasetManifest manifest;

    SweepCorpus() {
        experiment::SynthSpec spec;
        spec.canvas = 256;
        spec.count_per_class = 40;
        spec.signal_scale = 32;
        spec.seed = 7;
        manifest = experiment::gen_synth(spec, dir.path());
    }
};

experiment::SweepConfig sweep_config() {
    experiment::SweepConfig cfg;
    cfg.train.epochs = 15;
    return cfg;
}

std::string row_summary(const experiment::SweepResult& r) {
    std::string s;
    for (const auto& row : r.rows) s += fmt(" acc@%d=%.3f", row.tile_size, row.per_image_accuracy);
    return s;
}

Outcome scale_spike(const SweepCorpus& corpus) {
    const auto t0 = Clock::now();
    const auto result = experiment::run_sweep(corpus.manifest, {16, 32, 128}, sweep_config());
    const double elapsed = seconds_since(t0);
    Outcome o;
    o.detail = row_summary(result) + fmt(", %.1f s", elapsed);
    for (const auto& row : result.rows) o.detail += fmt(", %d skipped %zu", row.tile_size, row.test_metrics.n_skipped);
    o.require(result.rows.size() == 3, "one row per size");
    if (result.rows.size() == 3) {
        o.require(result.rows[1].per_image_accuracy >= 0.90, "size 32 >= 0.90");
        o.require(within_coin_flip(result.rows[2].per_image_accuracy), "size 128 in [0.35, 0.65]");
    }
    o.require(elapsed <= 600.0, "runtime <= 10 min");
    return o;
}

Outcome coin_flip_floor(const SweepCorpus& corpus) {
    const auto shuffled = experiment::shuffle_labels(corpus.manifest, 11);
    const auto result = experiment::run_sweep(shuffled, {16, 32, 128}, sweep_config());
    Outcome o;
    // n_test is the held-out split; images without a salient tile at a given
    // size are skipped by evaluation and reported per size.
    const std::size_t n_test = result.split.test.size();
    o.detail = row_summary(result) + fmt(", n_test=%zu", n_test);
    for (const auto& row : result.rows) {
        o.detail += fmt(", %d: %zu scored/%zu skipped", row.tile_size, row.test_metrics.n_images,
                        row.test_metrics.n_skipped);
        o.require(within_coin_flip(row.per_image_accuracy), fmt("size %d in [0.35, 0.65]", row.tile_size));
        o.require(row.test_metrics.n_images + row.test_metrics.n_skipped == n_test, "every test image accounted");
    }
    o.require(n_test >= 20, "n_test >= 20");
    return o;
}

Outcome gradient_check() {
    const auto t0 = Clock::now();
    constexpr double kTol = 1e-5;
    Outcome o;
    double layer_worst = 0.0;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        layer_worst = std::max({layer_worst, oracle::layer_check::conv3x3(seed), oracle::layer_check::relu(seed),
                                oracle::layer_check::maxpool2x2(seed), oracle::layer_check::dense(seed)});
    }
    o.require(layer_worst < kTol, "per-layer max rel < 1e-5");

    double model_worst = 0.0;
    std::size_t checked = 0, kinks = 0;
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        const auto model = oracle::gradcheck_model(seed);
        const auto batch = oracle::gradcheck_batch(2, model.arch.input_resolution, seed);
        const auto stats = oracle::check_model_gradients(model, batch, {1, 0}, oracle::layer_check::kEps);
        model_worst = std::max(model_worst, stats.max_rel);
        checked += stats.checked;
        kinks += stats.kinks;
        o.require(stats.kinks * 100 < model.parameter_count(), "kinks < 1% of parameters");
    }
    o.require(model_worst < kTol, "composed max rel < 1e-5");
    const double elapsed = seconds_since(t0);
    o.require(elapsed <= 60.0, "runtime <= 60 s");
    o.detail = fmt(" layers %.2e, model %.2e over %zu params (%zu kinks skipped), %.1f s", layer_worst, model_worst,
                   checked, kinks, elapsed);
    return o;
}

Outcome entropy_oracle() {
    Outcome o;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto tile = imageio::to_grayscale(seed % 2 ? oracle::patchy_image(32, 32, seed)
                                                         : oracle::random_image(32, 32, seed));
        worst = std::max(worst, std::abs(tiling::shannon_entropy(tile.pixels) - oracle::entropy(tile.pixels)));
    }
    o.require(worst <= 1e-12, "100 tiles within 1e-12");

    const std::vector<std::uint8_t> constant(50 * 50, 128);
    std::vector<std::uint8_t> halves(64 * 64, 0);
    std::fill(halves.begin() + halves.size() / 2, halves.end(), 255);
    std::vector<std::uint8_t> ramp(64);
    for (int i = 0; i < 64; ++i) ramp[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
    const double h0 = tiling::shannon_entropy(constant);
    const double h1 = tiling::shannon_entropy(halves);
    const double h6 = tiling::shannon_entropy(ramp);
    o.require(h0 == 0.0 && h1 == 1.0 && h6 == 6.0, "exact 0/1/6");
    o.detail = fmt(" max |diff| %.1e over 100 tiles; reference tiles %g, %g, %g", worst, h0, h1, h6);
    return o;
}

Outcome tiling_geometry() {
    Outcome o;
    std::mt19937_64 rng(2024);
    int count_ok = 0, pixels_ok = 0;
    for (int c = 0; c < 200; ++c) {
        const int w = 1 + static_cast<int>(rng() % 90);
        const int h = 1 + static_cast<int>(rng() % 90);
        const int s = 1 + static_cast<int>(rng() % std::min(w, h));
        const int d = 1 + static_cast<int>(rng() % 40);
        const auto img = oracle::random_image(w, h, rng());
        const auto grid = tiling::extract_tiles(img, s, d);
        const int cols = (w - s) / d + 1;
        const int rows = (h - s) / d + 1;
        count_ok += grid.grid_cols == cols && grid.grid_rows == rows &&
                    grid.tiles.size() == static_cast<std::size_t>(cols * rows);
        bool same = true;
        for (const auto& t : grid.tiles) {
            for (int y = 0; y < s && same; ++y) {
                const auto* src = img.at(t.origin_x, t.origin_y + y);
                same = std::equal(src, src + s * 3, t.color.at(0, y));
            }
        }
        pixels_ok += same;
    }
    o.require(count_ok == 200, "grid counts");
    o.require(pixels_ok == 200, "bit-identical windows");
    o.detail = fmt(" %d/200 grid counts, %d/200 bit-identical", count_ok, pixels_ok);
    return o;
}

Outcome aggregation_contract() {
    Outcome o;
    auto model = nnet::init_model({}, 9);
    // non-trivial scores: a random output layer
    const auto w = oracle::random_values(model.params[model.params.size() - 2].size(), 9, -0.5, 0.5);
    std::copy(w.begin(), w.end(), model.params[model.params.size() - 2].data.begin());
    model.meta.tile_size = 16;
    model.meta.stride = 8;

    std::mt19937_64 rng(6);
    double perm_worst = 0.0;
    int mean_ok = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto report = attribution::attribute(model, oracle::patchy_image(96, 96, seed), 16, 8, 0.5);
        const auto doc = nlohmann::json::parse(attribution::report_json(report));
        double sum = 0.0;
        for (const auto& t : doc["tiles"]) sum += t["score"].get<double>();
        mean_ok += sum / static_cast<double>(doc["tiles"].size()) == doc["aggregate"].get<double>();

        auto scores = report.tile_scores;
        for (int k = 0; k < 20; ++k) {
            std::shuffle(scores.begin(), scores.end(), rng);
            perm_worst = std::max(perm_worst, std::abs(attribution::aggregate(scores) - report.aggregate));
        }
    }
    o.require(mean_ok == 10, "aggregate equals mean of reported scores");
    o.require(perm_worst <= 1e-15, "permutation within 1e-15");
    const bool threshold = attribution::verdict_for(0.5) == imageio::Label::Positive &&
                           attribution::verdict_for(std::nextafter(0.5, 0.0)) == imageio::Label::Negative;
    o.require(threshold, "verdict threshold at 0.5");
    o.detail = fmt(" %d/10 reports consistent, permutation drift %.1e, threshold %s", mean_ok, perm_worst,
                   threshold ? "exact" : "off");
    return o;
}

Outcome determinism_and_persistence() {
    Outcome o;
    fixture::TempDir dir;
    experiment::SynthSpec spec;
    spec.canvas = 64;
    spec.count_per_class = 4;
    spec.signal_scale = 16;
    const auto manifest = experiment::gen_synth(spec, dir / "corpus");
    const experiment::ImageCache cache(manifest);
    const auto probe = cache.get(manifest.entries.front());

    const auto pipeline = [&](const std::string& tag) {
        const auto harvest = experiment::harvest_tiles(cache, manifest.entries, 32, 16, 1.0);
        nnet::TrainConfig cfg;
        cfg.epochs = 3;
        auto model = nnet::train(nnet::init_model({}, 42), harvest.samples, cfg).model;
        model.meta.tile_size = 32;
        model.meta.stride = 16;
        const auto path = dir / ("model_" + tag + ".bin");
        fixture::write_bytes(path, nnet::serialize_model(model));
        const auto loaded = nnet::deserialize_model(fixture::read_bytes(path));
        const auto report = attribution::attribute(loaded, probe, 32, 16, 1.0, true);
        return std::make_pair(fixture::read_bytes(path), attribution::report_json(report));
    };
    const auto [model_a, json_a] = pipeline("a");
    const auto [model_b, json_b] = pipeline("b");
    o.require(model_a == model_b, "bit-identical model files");
    o.require(json_a == json_b, "bit-identical report JSON");

    auto magic = model_a;
    magic[0] ^= 0xff;
    auto flipped = model_a;
    flipped[flipped.size() / 2] ^= 0x01;
    const auto magic_code = code_of([&] { nnet::deserialize_model(magic); });
    const auto flip_code = code_of([&] { nnet::deserialize_model(flipped); });
    o.require(magic_code == ErrorCode::BadMagic, "BadMagic");
    o.require(flip_code == ErrorCode::ChecksumMismatch, "ChecksumMismatch");
    o.detail = fmt(" model %zu bytes, report %zu bytes, both runs identical: %s; corruption -> %s, %s",
                   model_a.size(), json_a.size(), model_a == model_b && json_a == json_b ? "yes" : "no",
                   std::string(to_string(magic_code)).c_str(), std::string(to_string(flip_code)).c_str());
    return o;
}

Outcome separable_training() {
    Outcome o;
    std::vector<nnet::Sample> samples;
    for (int i = 0; i < 24; ++i) {
        imageio::ColorImage dark(16, 16), bright(16, 16);
        std::fill(dark.pixels.begin(), dark.pixels.end(), static_cast<std::uint8_t>(30 + i % 5));
        std::fill(bright.pixels.begin(), bright.pixels.end(), static_cast<std::uint8_t>(220 - i % 5));
        samples.push_back({dark, 0});
        samples.push_back({bright, 1});
    }
    int oracle_correct = 0;
    for (const auto& s : samples) {
        double mean = 0.0;
        for (auto v : s.patch.pixels) mean += v;
        mean /= static_cast<double>(s.patch.pixels.size());
        oracle_correct += (mean > 125.0) == (s.label == 1);
    }
    o.require(oracle_correct == static_cast<int>(samples.size()), "mean-intensity oracle separates the set");

    nnet::TrainConfig cfg;
    cfg.epochs = 10;
    const auto result = nnet::train(nnet::init_model({}, 42), samples, cfg);
    const double acc = nnet::accuracy(result.model, samples);
    o.require(acc == 1.0, "training accuracy 1.0");
    o.detail = fmt(" oracle %d/%zu, network accuracy %.3f after 10 epochs, loss %.3g -> %.3g", oracle_correct,
                   samples.size(), acc, result.loss_history.front(), result.loss_history.back());
    return o;
}

bool report(const char* id, const char* name, const std::function<Outcome()>& run) {
    Outcome o;
    try {
        o = run();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string(" [error: ") + e.what() + "]";
    }
    std::printf("%s %s %s:%s\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    return o.pass;
}

}  // namespace

int main() {
    const SweepCorpus corpus;
    int failures = 0;
    failures += !report("AC1", "scale spike", [&] { return scale_spike(corpus); });
    failures += !report("AC2", "coin-flip floor", [&] { return coin_flip_floor(corpus); });
    failures += !report("AC3", "gradient verification", gradient_check);
    failures += !report("AC4", "entropy oracle", entropy_oracle);
    failures += !report("AC5", "tiling geometry", tiling_geometry);
    failures += !report("AC6", "aggregation contract", aggregation_contract);
    failures += !report("AC7", "determinism and persistence", determinism_and_persistence);
    failures += !report("AC8", "separable training", separable_training);
    std::printf("%d of 8 criteria passed\n", 8 - failures);
    return failures == 0 ? 0 : 1;
}
