#include <algorithm>
#include <cmath>
#include <numbers>

#include "brushwork/error.hpp"
#include "brushwork/experiment.hpp"
#include "brushwork/fsutil.hpp"
#include "brushwork/parallel.hpp"
#include "brushwork/rng.hpp"

namespace brushwork::experiment {

// The corpus is a field of oriented strokes on a noisy flat ground. Both
// classes draw strokes from the same distribution; what differs is the
// bristle grain painted inside each stroke. The grain lives on cells of
// 2 x 2 sub-blocks, each sub-block cell/2 pixels wide, with two Gaussian
// amplitudes (u, v) per cell:
//
//   positive:  [ u   v ]     negative:  [ u   v ]
//              [-v   u ]                [ v  -u ]
//
// Every pixel has the same marginal law in both classes, so luma histograms
// agree. Any bilinear sample taken inside one cell sees a variance of
// (wTL +- wBR)^2 + (wTR -+ wBL)^2, and the two classes differ by
// 4 (wTL wBR - wTR wBL), which is zero for bilinear weights. A tile resampled
// to the network input with one sample per cell therefore carries no class
// information; tiles shown at or above native resolution do.

namespace {

constexpr double kStrokeCoverage = 0.45;  // fraction of cells painted
constexpr double kGrainSigma = 7.0;
constexpr double kGroundSigma = 7.0;      // iid pixel noise on unpainted cells
constexpr double kValueSpread = 100.0;    // stroke values span 128 +- spread/2
constexpr int kPaletteLevels = 3;

struct Stroke {
    double cx, cy, dx, dy, half_length, half_width;
    double value;
};

double normal(Rng& rng) {
    // Box-Muller, one variate per call
    const double u1 = 1.0 - unit_uniform(rng);
    const double u2 = unit_uniform(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

bool inside(const Stroke& s, double x, double y) {
    const double px = x - s.cx;
    const double py = y - s.cy;
    const double along = px * s.dx + py * s.dy;
    const double across = -px * s.dy + py * s.dx;
    const double a = std::max(0.0, std::abs(along) - s.half_length);
    return a * a + across * across <= s.half_width * s.half_width;
}

}  // namespace

void SynthSpec::validate() const {
    if (signal_scale < 2) throw Error(ErrorCode::InvalidArgument, "signal scale must be >= 2");
    if (canvas < 4 * signal_scale) {
        throw Error(ErrorCode::InvalidArgument, "canvas " + std::to_string(canvas) + " must be >= 4 x signal scale " +
                                                    std::to_string(signal_scale));
    }
    if (count_per_class < 2) throw Error(ErrorCode::InvalidArgument, "count per class must be >= 2");
}

int synth_cell_size(int signal_scale) { return 2 * std::max(1, signal_scale / 32); }

imageio::GrayImage render_synth(const SynthSpec& spec, imageio::Label label, int index, double* coverage) {
    spec.validate();
    const int n = spec.canvas;
    const int cell = synth_cell_size(spec.signal_scale);
    const int sub = cell / 2;
    const int cells = n / cell;
    const std::uint64_t stream = (label == imageio::Label::Positive ? 1ULL : 2ULL) << 32 | static_cast<std::uint32_t>(index);
    Rng rng(derive_seed(spec.seed, stream));

    const double ground = 128.0;

    // strokes, rasterized per cell so that cells are never split by an edge
    std::vector<char> painted(static_cast<std::size_t>(cells) * cells, 0);
    std::vector<double> cell_value(painted.size(), 0.0);
    std::size_t covered = 0;
    const std::size_t target = static_cast<std::size_t>(kStrokeCoverage * static_cast<double>(painted.size()));
    while (covered < target) {
        Stroke s;
        s.cx = n * unit_uniform(rng);
        s.cy = n * unit_uniform(rng);
        const double angle = std::numbers::pi * unit_uniform(rng);
        s.dx = std::cos(angle);
        s.dy = std::sin(angle);
        s.half_length = 0.5 * spec.signal_scale * (0.75 + 0.5 * unit_uniform(rng));
        s.half_width = spec.signal_scale / 8.0;
        const double level = (std::floor(unit_uniform(rng) * kPaletteLevels) + 0.5) / kPaletteLevels;
        s.value = 128.0 - kValueSpread / 2 + kValueSpread * level;

        const double reach = s.half_length + s.half_width + cell;
        const int c0 = std::max(0, static_cast<int>((s.cx - reach) / cell));
        const int c1 = std::min(cells - 1, static_cast<int>((s.cx + reach) / cell));
        const int r0 = std::max(0, static_cast<int>((s.cy - reach) / cell));
        const int r1 = std::min(cells - 1, static_cast<int>((s.cy + reach) / cell));
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                if (!inside(s, (c + 0.5) * cell, (r + 0.5) * cell)) continue;
                const std::size_t k = static_cast<std::size_t>(r) * cells + c;
                if (!painted[k]) ++covered;
                painted[k] = 1;
                cell_value[k] = s.value;
            }
        }
    }

    const auto quantize = [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); };
    imageio::GrayImage out(n, n);

    const bool positive = label == imageio::Label::Positive;
    for (int r = 0; r < cells; ++r) {
        for (int c = 0; c < cells; ++c) {
            const std::size_t k = static_cast<std::size_t>(r) * cells + c;
            if (!painted[k]) {
                for (int y = r * cell; y < (r + 1) * cell; ++y) {
                    for (int x = c * cell; x < (c + 1) * cell; ++x) out.at(x, y) = quantize(ground + kGroundSigma * normal(rng));
                }
                continue;
            }
            const double u = kGrainSigma * normal(rng);
            const double v = kGrainSigma * normal(rng);
            // sub-block order TL, TR, BL, BR
            const double grain[4] = {u, v, positive ? -v : v, positive ? u : -u};
            for (int q = 0; q < 4; ++q) {
                const int x0 = c * cell + (q % 2) * sub;
                const int y0 = r * cell + (q / 2) * sub;
                const std::uint8_t value = quantize(cell_value[k] + grain[q]);
                for (int y = y0; y < y0 + sub; ++y) {
                    for (int x = x0; x < x0 + sub; ++x) out.at(x, y) = value;
                }
            }
        }
    }
    if (coverage) *coverage = static_cast<double>(covered) / static_cast<double>(painted.size());
    return out;
}

imageio::DatasetManifest gen_synth(const SynthSpec& spec, const std::filesystem::path& out_dir) {
    spec.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::IoError, out_dir.string() + ": " + ec.message());

    imageio::DatasetManifest manifest;
    manifest.base_dir = out_dir;
    for (imageio::Label label : {imageio::Label::Positive, imageio::Label::Negative}) {
        for (int i = 0; i < spec.count_per_class; ++i) {
            char name[64];
            std::snprintf(name, sizeof name, "%s_%03d.png", imageio::to_string(label).c_str(), i);
            manifest.entries.push_back({name, label});
        }
    }
    parallel_for(manifest.entries.size(), [&](std::size_t i) {
        const auto& e = manifest.entries[i];
        const int index = static_cast<int>(e.label == imageio::Label::Positive ? i : i - spec.count_per_class);
        imageio::save_png(render_synth(spec, e.label, index), out_dir / e.image_path);
    });
    imageio::save_manifest(manifest, out_dir / "manifest.csv");
    return manifest;
}

}  // namespace brushwork::experiment
