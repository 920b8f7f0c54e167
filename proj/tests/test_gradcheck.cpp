#include <doctest.h>

#include <cmath>

#include "brushwork/nnet.hpp"
#include "layer_gradcheck.hpp"
#include "oracles.hpp"

using namespace brushwork;
namespace L = nnet::layers;

namespace {

constexpr double kEps = oracle::layer_check::kEps;
constexpr double kTol = 1e-5;

}  // namespace

TEST_CASE("conv3x3 gradients match central differences") {
    for (std::uint64_t seed : {1u, 2u, 3u}) CHECK(oracle::layer_check::conv3x3(seed) < kTol);
}

TEST_CASE("relu gradient matches central differences away from zero") {
    for (std::uint64_t seed : {1u, 2u, 3u}) CHECK(oracle::layer_check::relu(seed) < kTol);
}

TEST_CASE("maxpool gradient matches central differences") {
    for (std::uint64_t seed : {1u, 2u, 3u}) CHECK(oracle::layer_check::maxpool2x2(seed) < kTol);
}

TEST_CASE("dense gradients match central differences") {
    for (std::uint64_t seed : {1u, 2u, 3u}) CHECK(oracle::layer_check::dense(seed) < kTol);
}

TEST_CASE("single-parameter dense unit: analytic slope agrees with eps 1e-6 difference") {
    // z = w x + b, loss = bce(sigmoid(z), y); the dense kernel supplies dL/dw given dL/dz.
    for (int label : {0, 1}) {
        std::vector<double> x{0.7}, w{-1.3}, b{0.2};
        const auto loss = [&] {
            std::vector<double> z(1);
            L::dense_forward(1, 1, x, w, b, z);
            return nnet::bce_loss(nnet::sigmoid(z[0]), label);
        };
        std::vector<double> z(1);
        L::dense_forward(1, 1, x, w, b, z);
        const std::vector<double> dz{nnet::sigmoid(z[0]) - label};
        std::vector<double> dw(1, 0.0), db(1, 0.0), din(1);
        L::dense_backward(1, 1, x, w, dz, dw, db, din);
        const double numeric = oracle::layer_check::central_difference(w, 0, loss, 1e-6);
        CHECK(std::abs(dw[0] - numeric) / std::abs(numeric) < 1e-8);
    }
}

TEST_CASE("default architecture: every parameter agrees with central differences") {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        const auto model = oracle::gradcheck_model(seed);
        const auto batch = oracle::gradcheck_batch(2, model.arch.input_resolution, seed);
        const std::vector<int> labels{1, 0};
        const auto stats = oracle::check_model_gradients(model, batch, labels, kEps);
        MESSAGE("seed " << seed << ": checked " << stats.checked << ", kinks " << stats.kinks << ", max rel "
                        << stats.max_rel << " (tensor " << stats.worst_tensor << ", index " << stats.worst_index
                        << ")");
        CHECK(stats.checked + stats.kinks == model.parameter_count());
        CHECK(stats.kinks * 100 < model.parameter_count());
        CHECK(stats.max_rel < kTol);
    }
}

TEST_CASE("gradients vanish when the model already outputs the labels") {
    auto model = oracle::gradcheck_model(5);
    model.params.back().data[0] = 60.0;  // logit ~60 on every input: p = 1 - 1e-26
    const auto batch = oracle::gradcheck_batch(3, model.arch.input_resolution, 5);
    const std::vector<int> labels{1, 1, 1};
    const auto g = nnet::backward(model, batch, labels);
    double worst = 0.0;
    for (const auto& t : g.grads) {
        for (double v : t.data) worst = std::max(worst, std::abs(v));
    }
    CHECK(worst < 1e-12);
}
