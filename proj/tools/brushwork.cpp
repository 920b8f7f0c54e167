// brushwork: command-line front end for tile-based attribution.
//
// Exit codes: 0 success, 2 usage/validation, 3 data or I/O, 4 numeric divergence.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "brushwork/attribution.hpp"
#include "brushwork/error.hpp"
#include "brushwork/experiment.hpp"
#include "brushwork/fsutil.hpp"
#include "brushwork/imageio.hpp"
#include "brushwork/nnet.hpp"
#include "brushwork/tiling.hpp"

namespace fs = std::filesystem;
using namespace brushwork;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitDiverged = 4;

struct Global {
    std::uint64_t seed = 42;
    bool quiet = false;
};

void note(const Global& g, const std::string& msg) {
    if (!g.quiet) std::cerr << msg << '\n';
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument:
        case ErrorCode::DuplicateSize:
            return kExitUsage;
        case ErrorCode::NonFiniteLoss:
            return kExitDiverged;
        default:
            return kExitData;
    }
}

std::vector<int> parse_sizes(const std::string& text) {
    std::vector<int> sizes;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(item, &used);
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, "bad tile size '" + item + "'");
        }
        if (used != item.size() || v < 1) throw Error(ErrorCode::InvalidArgument, "bad tile size '" + item + "'");
        sizes.push_back(v);
    }
    if (sizes.size() < 2) throw Error(ErrorCode::InvalidArgument, "--sizes needs at least two tile sizes");
    std::set<int> seen;
    for (int s : sizes) {
        if (!seen.insert(s).second) throw Error(ErrorCode::DuplicateSize, std::to_string(s));
    }
    return sizes;
}

int resolve_stride(int stride, int tile_size) { return stride > 0 ? stride : std::max(1, tile_size / 2); }

// ---- train ------------------------------------------------------------------

struct TrainArgs {
    std::string manifest;
    std::string out;
    int tile_size = 64;
    int stride = 0;
    double tau = 1.0;
    int epochs = 10;
    double lr = 1e-3;
    int batch = 32;
    int resolution = 64;
    std::string optimizer = "adam";
};

int run_train(const Global& g, const TrainArgs& a) {
    nnet::Architecture arch;
    arch.input_resolution = a.resolution;
    arch.validate();
    nnet::TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.learning_rate = a.lr;
    cfg.batch_size = a.batch;
    cfg.seed = g.seed;
    cfg.optimizer = a.optimizer == "sgd" ? nnet::Optimizer::Sgd : nnet::Optimizer::Adam;
    cfg.validate();
    const int stride = resolve_stride(a.stride, a.tile_size);

    const imageio::DatasetManifest manifest = imageio::load_manifest(a.manifest);
    if (manifest.count(imageio::Label::Positive) == 0) throw Error(ErrorCode::EmptyClass, "positive");
    if (manifest.count(imageio::Label::Negative) == 0) throw Error(ErrorCode::EmptyClass, "negative");
    const experiment::ImageCache cache(manifest);
    experiment::TileHarvest harvest = experiment::harvest_tiles(cache, manifest.entries, a.tile_size, stride, a.tau);
    note(g, std::to_string(harvest.samples.size()) + " salient tiles, " + std::to_string(harvest.n_skipped) +
                " images without salient tiles");

    nnet::Model model = nnet::init_model(arch, g.seed);
    model.meta.tile_size = a.tile_size;
    model.meta.stride = stride;
    model.meta.tau = a.tau;

    std::cout << "epoch,mean_loss\n";
    nnet::TrainResult result = nnet::train(std::move(model), harvest.samples, cfg, [](int epoch, double loss) {
        char line[64];
        std::snprintf(line, sizeof line, "%d,%.17g\n", epoch, loss);
        std::cout << line << std::flush;
    });
    nnet::save_model(result.model, a.out);
    note(g, "model written to " + a.out);
    return 0;
}

// ---- attribute --------------------------------------------------------------

struct AttributeArgs {
    std::string model;
    std::string image;
    std::string report;
    std::string heatmap;
    std::string uncovered;
    int stride = 0;
    double tau = -1.0;
    bool fallback = false;
};

// Rethrows any failure as a data error whose message names the offending file.
template <typename F>
auto with_path(const std::string& path, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        const ErrorCode code = e.code() == ErrorCode::InvalidArgument ? ErrorCode::IoError : e.code();
        if (e.detail().find(path) != std::string::npos) throw Error(code, e.detail());
        throw Error(code, path + ": " + e.detail());
    }
}

int run_attribute(const Global& g, const AttributeArgs& a) {
    const nnet::Model model = with_path(a.model, [&] { return nnet::load_model(a.model); });
    const imageio::ColorImage img = with_path(a.image, [&] { return imageio::load_image(a.image); });
    const int stride = a.stride > 0 ? a.stride : model.meta.stride;
    const double tau = a.tau >= 0.0 ? a.tau : model.meta.tau;

    attribution::AttributionReport report = with_path(
        a.image, [&] { return attribution::attribute(model, img, model.meta.tile_size, stride, tau, a.fallback); });
    report.image_path = a.image;

    std::vector<std::uint8_t> heatmap_png;
    std::string uncovered;
    if (!a.heatmap.empty() || !a.uncovered.empty()) {
        const auto map = attribution::contribution_map(report.tile_scores, img.width, img.height, report.tile_size);
        if (!a.heatmap.empty()) heatmap_png = imageio::encode_png(attribution::render_heatmap(map));
        if (!a.uncovered.empty()) uncovered = attribution::uncovered_csv(map);
    }
    write_file_atomic(a.report, attribution::report_json(report));
    if (!a.heatmap.empty()) write_file_atomic(a.heatmap, heatmap_png);
    if (!a.uncovered.empty()) write_file_atomic(a.uncovered, uncovered);
    note(g, "aggregate " + std::to_string(report.aggregate) + ", verdict " + imageio::to_string(report.verdict));
    return 0;
}

// ---- sweep ------------------------------------------------------------------

struct SweepArgs {
    std::string manifest;
    std::string sizes = "16,32,64,128";
    std::string out;
    std::string plot;
    int epochs = 15;
    double lr = 1e-3;
    int batch = 32;
    double tau = 1.0;
    double test_fraction = 0.25;
    int resolution = 64;
};

int run_sweep(const Global& g, const SweepArgs& a) {
    const std::vector<int> sizes = parse_sizes(a.sizes);
    experiment::SweepConfig cfg;
    cfg.train.epochs = a.epochs;
    cfg.train.learning_rate = a.lr;
    cfg.train.batch_size = a.batch;
    cfg.train.validate();
    cfg.arch.input_resolution = a.resolution;
    cfg.arch.validate();
    cfg.tau = a.tau;
    cfg.test_fraction = a.test_fraction;
    cfg.seed = g.seed;

    const imageio::DatasetManifest manifest = imageio::load_manifest(a.manifest);
    const experiment::SweepResult result = experiment::run_sweep(manifest, sizes, cfg);
    const std::string csv = experiment::sweep_csv(result);
    std::vector<std::uint8_t> plot;
    if (!a.plot.empty()) plot = imageio::encode_png(experiment::sweep_plot(result));
    write_file_atomic(a.out, csv);
    if (!a.plot.empty()) write_file_atomic(a.plot, plot);
    if (!g.quiet) std::cout << csv;
    return 0;
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
    std::string out_dir;
    int canvas = 512;
    int count = 20;
    int signal_scale = 32;
};

int run_synth(const Global& g, const SynthArgs& a) {
    experiment::SynthSpec spec;
    spec.canvas = a.canvas;
    spec.count_per_class = a.count;
    spec.signal_scale = a.signal_scale;
    spec.seed = g.seed;
    spec.validate();
    const auto manifest = experiment::gen_synth(spec, a.out_dir);
    note(g, std::to_string(manifest.entries.size()) + " images written to " + a.out_dir);
    return 0;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
    std::string model;
    std::string manifest;
    int stride = 0;
    double tau = -1.0;
};

int run_eval(const Global&, const EvalArgs& a) {
    const nnet::Model model = nnet::load_model(a.model);
    const imageio::DatasetManifest manifest = imageio::load_manifest(a.manifest);
    const int stride = a.stride > 0 ? a.stride : model.meta.stride;
    const double tau = a.tau >= 0.0 ? a.tau : model.meta.tau;
    const experiment::Metrics m =
        experiment::evaluate(model, manifest, manifest.entries, model.meta.tile_size, stride, tau);
    std::cout << experiment::metrics_json(m);
    return 0;
}

// ---- tiles ------------------------------------------------------------------

struct TilesArgs {
    std::string image;
    std::string out;
    int tile_size = 64;
    int stride = 0;
    double tau = 1.0;
};

int run_tiles(const Global& g, const TilesArgs& a) {
    const imageio::ColorImage img = imageio::load_image(a.image);
    const int stride = resolve_stride(a.stride, a.tile_size);
    tiling::TileGrid grid;
    try {
        grid = tiling::extract_tiles(img, a.tile_size, stride);
    } catch (const Error& e) {
        throw Error(e.code(), a.image + ": " + e.detail());
    }
    const double h = tiling::image_entropy(imageio::to_grayscale(img));
    const std::vector<bool> keep = tiling::salient_mask(grid, h, a.tau);

    std::string csv = "col,row,origin_x,origin_y,entropy,selected\n";
    char line[160];
    for (std::size_t i = 0; i < grid.tiles.size(); ++i) {
        const auto& t = grid.tiles[i];
        std::snprintf(line, sizeof line, "%d,%d,%d,%d,%.17g,%s\n", t.col, t.row, t.origin_x, t.origin_y, t.entropy,
                      keep[i] ? "true" : "false");
        csv += line;
    }
    write_file_atomic(a.out, csv);
    note(g, std::to_string(grid.tiles.size()) + " tiles, image entropy " + std::to_string(h));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"brushwork: entropy-gated tile attribution with a small convolutional classifier"};
    app.require_subcommand(1);
    app.fallthrough();

    Global global;
    app.add_option("--seed", global.seed, "Seed for every random choice")->capture_default_str();
    app.add_flag("--quiet", global.quiet, "Suppress progress messages");

    const auto positive = CLI::Range(1, std::numeric_limits<int>::max());
    const auto non_negative = CLI::NonNegativeNumber;

    TrainArgs train;
    auto* cmd_train = app.add_subcommand("train", "Train a classifier on the salient tiles of a manifest");
    cmd_train->add_option("--manifest", train.manifest, "CSV manifest (path,label)")->required();
    cmd_train->add_option("--out", train.out, "Model file to write")->required();
    cmd_train->add_option("--tile-size", train.tile_size, "Tile edge in pixels")->check(positive)->capture_default_str();
    cmd_train->add_option("--stride", train.stride, "Tile stride (default: tile size / 2)")->check(positive);
    cmd_train->add_option("--tau", train.tau, "Entropy ratio threshold")->check(non_negative)->capture_default_str();
    cmd_train->add_option("--epochs", train.epochs)->check(positive)->capture_default_str();
    cmd_train->add_option("--lr", train.lr, "Learning rate")->check(CLI::PositiveNumber)->capture_default_str();
    cmd_train->add_option("--batch", train.batch, "Batch size")->check(positive)->capture_default_str();
    cmd_train->add_option("--resolution", train.resolution, "Network input edge, divisible by 8")
        ->check(positive)
        ->capture_default_str();
    cmd_train->add_option("--optimizer", train.optimizer)->check(CLI::IsMember({"adam", "sgd"}))->capture_default_str();

    AttributeArgs attr;
    auto* cmd_attr = app.add_subcommand("attribute", "Score one image and write an attribution report");
    cmd_attr->add_option("--model", attr.model)->required();
    cmd_attr->add_option("--image", attr.image)->required();
    cmd_attr->add_option("--report", attr.report, "JSON report to write")->required();
    cmd_attr->add_option("--heatmap", attr.heatmap, "Contribution map PNG to write");
    cmd_attr->add_option("--uncovered-csv", attr.uncovered, "CSV of pixels no salient tile covers");
    cmd_attr->add_option("--stride", attr.stride, "Tile stride (default: the model's)")->check(positive);
    cmd_attr->add_option("--tau", attr.tau, "Entropy ratio threshold (default: the model's)")->check(non_negative);
    cmd_attr->add_flag("--fallback-top1", attr.fallback, "Score the best tile when none is salient");

    SweepArgs sweep;
    auto* cmd_sweep = app.add_subcommand("sweep", "Train and test one classifier per tile size");
    cmd_sweep->add_option("--manifest", sweep.manifest)->required();
    cmd_sweep->add_option("--out", sweep.out, "Sweep CSV to write")->required();
    cmd_sweep->add_option("--sizes", sweep.sizes, "Comma-separated tile sizes")->capture_default_str();
    cmd_sweep->add_option("--plot", sweep.plot, "Accuracy-vs-size PNG to write");
    cmd_sweep->add_option("--epochs", sweep.epochs)->check(positive)->capture_default_str();
    cmd_sweep->add_option("--lr", sweep.lr)->check(CLI::PositiveNumber)->capture_default_str();
    cmd_sweep->add_option("--batch", sweep.batch)->check(positive)->capture_default_str();
    cmd_sweep->add_option("--tau", sweep.tau)->check(non_negative)->capture_default_str();
    cmd_sweep->add_option("--test-fraction", sweep.test_fraction)->check(CLI::Range(0.0, 1.0))->capture_default_str();
    cmd_sweep->add_option("--resolution", sweep.resolution)->check(positive)->capture_default_str();

    SynthArgs synth;
    auto* cmd_synth = app.add_subcommand("synth", "Generate a two-class synthetic stroke corpus");
    cmd_synth->add_option("--out-dir", synth.out_dir)->required();
    cmd_synth->add_option("--canvas", synth.canvas)->check(positive)->capture_default_str();
    cmd_synth->add_option("--count", synth.count, "Images per class")->check(positive)->capture_default_str();
    cmd_synth->add_option("--signal-scale", synth.signal_scale)->check(positive)->capture_default_str();

    EvalArgs eval;
    auto* cmd_eval = app.add_subcommand("eval", "Evaluate a model on a manifest; metrics JSON to stdout");
    cmd_eval->add_option("--model", eval.model)->required();
    cmd_eval->add_option("--manifest", eval.manifest)->required();
    cmd_eval->add_option("--stride", eval.stride)->check(positive);
    cmd_eval->add_option("--tau", eval.tau)->check(non_negative);

    TilesArgs tiles;
    auto* cmd_tiles = app.add_subcommand("tiles", "Write per-tile entropy and selection diagnostics");
    cmd_tiles->add_option("--image", tiles.image)->required();
    cmd_tiles->add_option("--out", tiles.out)->required();
    cmd_tiles->add_option("--tile-size", tiles.tile_size)->check(positive)->capture_default_str();
    cmd_tiles->add_option("--stride", tiles.stride)->check(positive);
    cmd_tiles->add_option("--tau", tiles.tau)->check(non_negative)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        const auto parsed = app.get_subcommands();
        std::cerr << (parsed.empty() ? app.help() : parsed.front()->help());
        return kExitUsage;
    }

    try {
        if (cmd_train->parsed()) return run_train(global, train);
        if (cmd_attr->parsed()) return run_attribute(global, attr);
        if (cmd_sweep->parsed()) return run_sweep(global, sweep);
        if (cmd_synth->parsed()) return run_synth(global, synth);
        if (cmd_eval->parsed()) return run_eval(global, eval);
        if (cmd_tiles->parsed()) return run_tiles(global, tiles);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
