#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "brushwork/imageio.hpp"
#include "brushwork/tiling.hpp"

namespace brushwork::nnet {

/// Dense row-major array of doubles.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> extents, double fill = 0.0);

    std::size_t size() const { return data.size(); }
    bool operator==(const Tensor&) const = default;
};

std::size_t element_count(std::span<const std::size_t> shape);

/// Layer stack: for each entry of `conv_channels` a block of
/// [conv 3x3 pad 1 -> ReLU -> maxpool 2x2], then dense -> ReLU -> dense -> sigmoid.
struct Architecture {
    int input_resolution = 64;
    int channels = 3;
    std::vector<int> conv_channels{8, 16, 32};
    int hidden_units = 64;

    /// Throws InvalidArchitecture unless the resolution halves exactly at every pool.
    void validate() const;
    int final_resolution() const;
    std::size_t flat_features() const;
    /// Expected shape of every parameter tensor, in storage order.
    std::vector<std::vector<std::size_t>> parameter_shapes() const;

    bool operator==(const Architecture&) const = default;
};

struct ModelMetadata {
    int tile_size = 1;
    int stride = 1;
    double tau = 1.0;
    std::uint64_t seed = 0;
    int epochs = 0;
    double norm_scale = 1.0 / 255.0;
    double norm_offset = -0.5;

    bool operator==(const ModelMetadata&) const = default;
};

/// Parameters are stored per layer as (weight, bias) pairs: conv weights are
/// [out, in, 3, 3], dense weights [out, in].
struct Model {
    Architecture arch;
    std::vector<Tensor> params;
    ModelMetadata meta;

    std::size_t parameter_count() const;
    bool operator==(const Model&) const = default;
};

using Gradients = std::vector<Tensor>;

enum class Optimizer { Adam, Sgd };

struct TrainConfig {
    int epochs = 10;
    double learning_rate = 1e-3;
    Optimizer optimizer = Optimizer::Adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int batch_size = 32;
    std::uint64_t seed = 42;
    bool shuffle = true;

    void validate() const;
};

/// A training example: an RGB patch of any square size, resampled on use.
struct Sample {
    imageio::ColorImage patch;
    int label = 0;  // 1 = by the artist
};

struct TrainResult {
    Model model;
    std::vector<double> loss_history;  // mean loss per epoch
};

struct BatchGradient {
    Gradients grads;
    double loss = 0.0;  // mean over the batch
};

/// He-uniform hidden weights (+-sqrt(6 / fan_in)), zero biases, zero output layer.
Model init_model(const Architecture& arch, std::uint64_t seed);

/// Corner-aligned bilinear resample of a square RGB patch to R x R, then
/// v / 255 - 0.5 per value. Output is channel-planar [3, R, R].
Tensor normalize_tile(const imageio::ColorImage& patch, int resolution);
Tensor normalize_tile(const tiling::Tile& tile, int resolution);

/// Pre-sigmoid output.
double forward_logit(const Model& model, const Tensor& input);
/// Probability in (0, 1); saturated values are clamped to the nearest interior double.
double forward(const Model& model, const Tensor& input);

double sigmoid(double z);
/// Binary cross-entropy with p clamped to [1e-12, 1 - 1e-12].
double bce_loss(double p, int label);

/// Gradient of the mean batch loss with respect to every parameter.
BatchGradient backward(const Model& model, std::span<const Tensor> batch, std::span<const int> labels);

/// Called after every epoch with (epoch number from 1, mean loss).
using EpochCallback = std::function<void(int, double)>;

TrainResult train(Model model, std::span<const Sample> samples, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Fraction of samples whose thresholded (>= 0.5) output matches the label.
double accuracy(const Model& model, std::span<const Sample> samples);

std::vector<std::uint8_t> serialize_model(const Model& model);
Model deserialize_model(std::span<const std::uint8_t> bytes);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

/// Layer kernels, exposed for verification. Activations are channel-planar
/// [C, H, W]; gradient outputs named `d*_accum` are added to, not overwritten.
namespace layers {

struct ConvShape {
    int in_channels = 0;
    int out_channels = 0;
    int height = 0;
    int width = 0;

    std::size_t in_size() const { return static_cast<std::size_t>(in_channels) * height * width; }
    std::size_t out_size() const { return static_cast<std::size_t>(out_channels) * height * width; }
    std::size_t col_rows() const { return static_cast<std::size_t>(in_channels) * 9; }
    std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
};

/// 3x3 convolution, zero padding 1, stride 1. `cols` receives the unfolded
/// input (in_channels * 9 rows by H * W columns) and is reused by backward.
void conv3x3_forward(const ConvShape& shape, std::span<const double> in, std::span<const double> weight,
                     std::span<const double> bias, std::span<double> out, std::vector<double>& cols);

/// `din` may be empty when the input gradient is not needed.
void conv3x3_backward(const ConvShape& shape, std::span<const double> cols, std::span<const double> weight,
                      std::span<const double> dout, std::span<double> dweight_accum,
                      std::span<double> dbias_accum, std::span<double> din);

void relu_forward(std::span<double> values);
/// Zeroes gradient entries whose forward output was not positive.
void relu_backward(std::span<const double> out, std::span<double> grad);

/// 2x2 max pool, stride 2. `argmax` holds the winning offset (dy * 2 + dx);
/// ties keep the first candidate in row-major order.
void maxpool2x2_forward(int channels, int height, int width, std::span<const double> in, std::span<double> out,
                        std::span<std::uint8_t> argmax);
void maxpool2x2_backward(int channels, int height, int width, std::span<const double> dout,
                         std::span<const std::uint8_t> argmax, std::span<double> din);

void dense_forward(int in_features, int out_features, std::span<const double> in, std::span<const double> weight,
                   std::span<const double> bias, std::span<double> out);
void dense_backward(int in_features, int out_features, std::span<const double> in, std::span<const double> weight,
                    std::span<const double> dout, std::span<double> dweight_accum, std::span<double> dbias_accum,
                    std::span<double> din);

}  // namespace layers

}  // namespace brushwork::nnet
