#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "brushwork/error.hpp"
#include "brushwork/nnet.hpp"
#include "brushwork/parallel.hpp"
#include "brushwork/rng.hpp"

namespace brushwork::nnet {

Tensor::Tensor(std::vector<std::size_t> extents, double fill)
    : shape(std::move(extents)), data(element_count(shape), fill) {}

std::size_t element_count(std::span<const std::size_t> shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void Architecture::validate() const {
    if (input_resolution < 1 || channels < 1 || hidden_units < 1 || conv_channels.empty()) {
        throw Error(ErrorCode::InvalidArchitecture, "non-positive extent");
    }
    for (int c : conv_channels) {
        if (c < 1) throw Error(ErrorCode::InvalidArchitecture, "non-positive conv channel count");
    }
    const int divisor = 1 << conv_channels.size();
    if (input_resolution % divisor != 0) {
        throw Error(ErrorCode::InvalidArchitecture, "input resolution " + std::to_string(input_resolution) +
                                                        " not divisible by " + std::to_string(divisor));
    }
}

int Architecture::final_resolution() const { return input_resolution >> conv_channels.size(); }

std::size_t Architecture::flat_features() const {
    const auto r = static_cast<std::size_t>(final_resolution());
    return static_cast<std::size_t>(conv_channels.back()) * r * r;
}

std::vector<std::vector<std::size_t>> Architecture::parameter_shapes() const {
    std::vector<std::vector<std::size_t>> shapes;
    std::size_t in = static_cast<std::size_t>(channels);
    for (int c : conv_channels) {
        const auto out = static_cast<std::size_t>(c);
        shapes.push_back({out, in, 3, 3});
        shapes.push_back({out});
        in = out;
    }
    const auto hidden = static_cast<std::size_t>(hidden_units);
    shapes.push_back({hidden, flat_features()});
    shapes.push_back({hidden});
    shapes.push_back({1, hidden});
    shapes.push_back({1});
    return shapes;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : params) n += t.size();
    return n;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw Error(ErrorCode::InvalidArgument, "epochs must be >= 1");
    if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw Error(ErrorCode::InvalidArgument, "learning rate must be > 0");
    }
}

Model init_model(const Architecture& arch, std::uint64_t seed) {
    arch.validate();
    Model model;
    model.arch = arch;
    model.meta.seed = seed;

    Rng rng(seed);
    const auto shapes = arch.parameter_shapes();
    const std::size_t output_weight = shapes.size() - 2;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        Tensor t(shapes[i]);
        const bool is_weight = i % 2 == 0;
        if (is_weight && i != output_weight) {
            const std::size_t fan_in = t.size() / shapes[i][0];
            const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
            for (double& w : t.data) w = (2.0 * unit_uniform(rng) - 1.0) * limit;
        }
        model.params.push_back(std::move(t));
    }
    return model;
}

Tensor normalize_tile(const imageio::ColorImage& patch, int resolution) {
    if (resolution < 1) throw Error(ErrorCode::InvalidArgument, "resolution must be >= 1");
    if (patch.width < 1 || patch.width != patch.height) {
        throw Error(ErrorCode::InvalidArgument, "tile must be square and non-empty");
    }
    const int s = patch.width;
    const auto r = static_cast<std::size_t>(resolution);
    Tensor out({3, r, r});

    // corner-aligned: output i samples source coordinate i * (s - 1) / (R - 1)
    std::vector<int> lo(r), hi(r);
    std::vector<double> frac(r);
    for (std::size_t i = 0; i < r; ++i) {
        const double src = resolution == 1 ? 0.0 : static_cast<double>(i * (s - 1)) / (resolution - 1);
        const int i0 = std::min(static_cast<int>(src), s - 1);
        lo[i] = i0;
        hi[i] = std::min(i0 + 1, s - 1);
        frac[i] = src - i0;
    }

    constexpr double scale = 1.0 / 255.0;
    for (std::size_t y = 0; y < r; ++y) {
        const double fy = frac[y];
        for (std::size_t x = 0; x < r; ++x) {
            const double fx = frac[x];
            const std::uint8_t* p00 = patch.at(lo[x], lo[y]);
            const std::uint8_t* p01 = patch.at(hi[x], lo[y]);
            const std::uint8_t* p10 = patch.at(lo[x], hi[y]);
            const std::uint8_t* p11 = patch.at(hi[x], hi[y]);
            for (std::size_t c = 0; c < 3; ++c) {
                const double top = p00[c] + (p01[c] - p00[c]) * fx;
                const double bottom = p10[c] + (p11[c] - p10[c]) * fx;
                const double v = top + (bottom - top) * fy;
                out.data[(c * r + y) * r + x] = v * scale - 0.5;
            }
        }
    }
    return out;
}

Tensor normalize_tile(const tiling::Tile& tile, int resolution) { return normalize_tile(tile.color, resolution); }

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double bce_loss(double p, int label) {
    constexpr double lo = 1e-12;
    constexpr double hi = 1.0 - 1e-12;
    const double q = std::clamp(p, lo, hi);
    return label == 1 ? -std::log(q) : -std::log(1.0 - q);
}

namespace {

double to_open_interval(double p) {
    return std::clamp(p, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

/// Per-sample activations kept for the backward pass.
struct Workspace {
    std::vector<std::vector<double>> cols;
    std::vector<std::vector<double>> conv;    // post-ReLU conv outputs
    std::vector<std::vector<double>> pooled;
    std::vector<std::vector<std::uint8_t>> argmax;
    std::vector<double> hidden;               // post-ReLU
    double logit = 0.0;
    std::vector<double> grad_a;
    std::vector<double> grad_b;
    std::vector<double> grad_hidden;
};

layers::ConvShape block_shape(const Architecture& arch, std::size_t block) {
    layers::ConvShape s;
    s.in_channels = block == 0 ? arch.channels : arch.conv_channels[block - 1];
    s.out_channels = arch.conv_channels[block];
    s.height = s.width = arch.input_resolution >> block;
    return s;
}

void check_input(const Model& model, const Tensor& input) {
    const auto r = static_cast<std::size_t>(model.arch.input_resolution);
    const std::vector<std::size_t> expected{static_cast<std::size_t>(model.arch.channels), r, r};
    if (input.shape != expected || input.data.size() != element_count(expected)) {
        std::ostringstream msg;
        msg << "input shape [";
        for (std::size_t i = 0; i < input.shape.size(); ++i) msg << (i ? "," : "") << input.shape[i];
        msg << "], expected [" << expected[0] << "," << r << "," << r << "]";
        throw Error(ErrorCode::ShapeMismatch, msg.str());
    }
}

void run_forward(const Model& model, std::span<const double> input, Workspace& ws) {
    const Architecture& arch = model.arch;
    const std::size_t blocks = arch.conv_channels.size();
    ws.cols.resize(blocks);
    ws.conv.resize(blocks);
    ws.pooled.resize(blocks);
    ws.argmax.resize(blocks);

    std::span<const double> x = input;
    for (std::size_t b = 0; b < blocks; ++b) {
        const layers::ConvShape s = block_shape(arch, b);
        ws.conv[b].resize(s.out_size());
        layers::conv3x3_forward(s, x, model.params[2 * b].data, model.params[2 * b + 1].data, ws.conv[b], ws.cols[b]);
        layers::relu_forward(ws.conv[b]);
        ws.pooled[b].resize(s.out_size() / 4);
        ws.argmax[b].resize(s.out_size() / 4);
        layers::maxpool2x2_forward(s.out_channels, s.height, s.width, ws.conv[b], ws.pooled[b], ws.argmax[b]);
        x = ws.pooled[b];
    }

    const auto features = static_cast<int>(arch.flat_features());
    const std::size_t d1 = 2 * blocks;
    ws.hidden.resize(static_cast<std::size_t>(arch.hidden_units));
    layers::dense_forward(features, arch.hidden_units, x, model.params[d1].data, model.params[d1 + 1].data, ws.hidden);
    layers::relu_forward(ws.hidden);
    double logit = 0.0;
    layers::dense_forward(arch.hidden_units, 1, ws.hidden, model.params[d1 + 2].data, model.params[d1 + 3].data,
                          std::span(&logit, 1));
    ws.logit = logit;
}

/// Adds the parameter gradient of one sample, given dLoss/dlogit, into `grads`.
void run_backward(const Model& model, Workspace& ws, double dlogit, Gradients& grads) {
    const Architecture& arch = model.arch;
    const std::size_t blocks = arch.conv_channels.size();
    const std::size_t d1 = 2 * blocks;
    const auto features = static_cast<int>(arch.flat_features());

    ws.grad_hidden.resize(static_cast<std::size_t>(arch.hidden_units));
    layers::dense_backward(arch.hidden_units, 1, ws.hidden, model.params[d1 + 2].data, std::span(&dlogit, 1),
                           grads[d1 + 2].data, grads[d1 + 3].data, ws.grad_hidden);
    layers::relu_backward(ws.hidden, ws.grad_hidden);

    ws.grad_a.resize(static_cast<std::size_t>(features));
    layers::dense_backward(features, arch.hidden_units, ws.pooled[blocks - 1], model.params[d1].data, ws.grad_hidden,
                           grads[d1].data, grads[d1 + 1].data, ws.grad_a);

    for (std::size_t bb = blocks; bb-- > 0;) {
        const layers::ConvShape s = block_shape(arch, bb);
        // grad_a holds dLoss/dpooled for this block
        ws.grad_b.resize(s.out_size());
        layers::maxpool2x2_backward(s.out_channels, s.height, s.width, ws.grad_a, ws.argmax[bb], ws.grad_b);
        layers::relu_backward(ws.conv[bb], ws.grad_b);
        std::span<double> din;
        if (bb > 0) {
            ws.grad_a.resize(s.in_size());
            din = ws.grad_a;
        }
        layers::conv3x3_backward(s, ws.cols[bb], model.params[2 * bb].data, ws.grad_b, grads[2 * bb].data,
                                 grads[2 * bb + 1].data, din);
    }
}

Gradients zero_gradients(const Model& model) {
    Gradients g;
    g.reserve(model.params.size());
    for (const auto& p : model.params) g.emplace_back(p.shape);
    return g;
}

/// dLoss/dlogit for the binary cross-entropy of sigmoid(logit), computed
/// without cancellation.
double logit_gradient(double logit, int label) { return label == 1 ? -sigmoid(-logit) : sigmoid(logit); }

// Samples are reduced in fixed groups of this size, then groups in index
// order, so the summation order never depends on the worker count.
constexpr std::size_t kChunk = 4;

struct ChunkState {
    Workspace ws;
    Gradients grads;
    double loss = 0.0;
};

template <typename InputAt>
BatchGradient batch_gradient(const Model& model, std::size_t n, InputAt&& input_at, std::span<const int> labels,
                             std::vector<ChunkState>& chunks) {
    const std::size_t chunk_count = (n + kChunk - 1) / kChunk;
    if (chunks.size() < chunk_count) chunks.resize(chunk_count);
    const double inv_n = 1.0 / static_cast<double>(n);

    parallel_for(chunk_count, [&](std::size_t c) {
        ChunkState& st = chunks[c];
        if (st.grads.size() != model.params.size()) {
            st.grads = zero_gradients(model);
        } else {
            for (auto& g : st.grads) std::fill(g.data.begin(), g.data.end(), 0.0);
        }
        st.loss = 0.0;
        const std::size_t end = std::min(n, (c + 1) * kChunk);
        for (std::size_t i = c * kChunk; i < end; ++i) {
            const Tensor& x = input_at(i);
            run_forward(model, x.data, st.ws);
            const double p = to_open_interval(sigmoid(st.ws.logit));
            st.loss += bce_loss(p, labels[i]);
            run_backward(model, st.ws, logit_gradient(st.ws.logit, labels[i]) * inv_n, st.grads);
        }
    });

    BatchGradient out;
    out.grads = zero_gradients(model);
    double loss = 0.0;
    for (std::size_t c = 0; c < chunk_count; ++c) {
        loss += chunks[c].loss;
        for (std::size_t k = 0; k < out.grads.size(); ++k) {
            auto& dst = out.grads[k].data;
            const auto& src = chunks[c].grads[k].data;
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
    }
    out.loss = loss * inv_n;

    bool finite = std::isfinite(out.loss);
    for (const auto& g : out.grads) {
        for (double v : g.data) finite = finite && std::isfinite(v);
    }
    if (!finite) throw Error(ErrorCode::NonFiniteLoss, "NaN or Inf in loss or gradients");
    return out;
}

}  // namespace

double forward_logit(const Model& model, const Tensor& input) {
    check_input(model, input);
    thread_local Workspace ws;
    run_forward(model, input.data, ws);
    return ws.logit;
}

double forward(const Model& model, const Tensor& input) { return to_open_interval(sigmoid(forward_logit(model, input))); }

BatchGradient backward(const Model& model, std::span<const Tensor> batch, std::span<const int> labels) {
    if (batch.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
    if (batch.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "batch and label counts differ");
    for (const auto& x : batch) check_input(model, x);
    std::vector<ChunkState> chunks;
    return batch_gradient(model, batch.size(), [&](std::size_t i) -> const Tensor& { return batch[i]; }, labels,
                          chunks);
}

namespace {

class Stepper {
public:
    Stepper(const Model& model, const TrainConfig& cfg) : cfg_(cfg) {
        if (cfg.optimizer == Optimizer::Adam) {
            m_ = zero_gradients(model);
            v_ = zero_gradients(model);
        }
    }

    void apply(Model& model, const Gradients& grads) {
        if (cfg_.optimizer == Optimizer::Sgd) {
            for (std::size_t k = 0; k < grads.size(); ++k) {
                auto& w = model.params[k].data;
                const auto& g = grads[k].data;
                for (std::size_t j = 0; j < w.size(); ++j) w[j] -= cfg_.learning_rate * g[j];
            }
            return;
        }
        ++step_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        for (std::size_t k = 0; k < grads.size(); ++k) {
            auto& w = model.params[k].data;
            auto& m = m_[k].data;
            auto& v = v_[k].data;
            const auto& g = grads[k].data;
            for (std::size_t j = 0; j < w.size(); ++j) {
                m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
                v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
                const double mhat = m[j] / c1;
                const double vhat = v[j] / c2;
                w[j] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
            }
        }
    }

private:
    const TrainConfig& cfg_;
    Gradients m_;
    Gradients v_;
    long step_ = 0;
};

}  // namespace

TrainResult train(Model model, std::span<const Sample> samples, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    model.arch.validate();
    std::size_t positives = 0;
    for (const auto& s : samples) {
        if (s.label != 0 && s.label != 1) throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1");
        positives += static_cast<std::size_t>(s.label);
    }
    if (positives == 0) throw Error(ErrorCode::EmptyClass, "positive");
    if (positives == samples.size()) throw Error(ErrorCode::EmptyClass, "negative");

    const int resolution = model.arch.input_resolution;
    const std::size_t batch_size = static_cast<std::size_t>(cfg.batch_size);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.seed);
    Stepper stepper(model, cfg);

    std::vector<ChunkState> chunks;
    std::vector<Tensor> inputs(batch_size);
    std::vector<int> labels(batch_size);
    TrainResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle) seeded_shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t n = std::min(batch_size, order.size() - start);
            parallel_for(n, [&](std::size_t i) {
                const Sample& s = samples[order[start + i]];
                inputs[i] = normalize_tile(s.patch, resolution);
                labels[i] = s.label;
            });
            BatchGradient bg = batch_gradient(
                model, n, [&](std::size_t i) -> const Tensor& { return inputs[i]; }, std::span(labels).first(n),
                chunks);
            epoch_loss += bg.loss * static_cast<double>(n);
            stepper.apply(model, bg.grads);
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(samples.size()));
        if (on_epoch) on_epoch(epoch + 1, result.loss_history.back());
    }
    model.meta.epochs += cfg.epochs;
    result.model = std::move(model);
    return result;
}

double accuracy(const Model& model, std::span<const Sample> samples) {
    if (samples.empty()) throw Error(ErrorCode::EmptyInput, "no samples");
    std::vector<char> correct(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
        const double p = forward(model, normalize_tile(samples[i].patch, model.arch.input_resolution));
        correct[i] = (p >= 0.5) == (samples[i].label == 1);
    });
    const auto hits = std::count(correct.begin(), correct.end(), 1);
    return static_cast<double>(hits) / static_cast<double>(samples.size());
}

}  // namespace brushwork::nnet
