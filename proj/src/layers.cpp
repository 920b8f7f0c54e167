#include <algorithm>
#include <cstring>

#include <Eigen/Core>

#include "brushwork/error.hpp"
#include "brushwork/nnet.hpp"

namespace brushwork::nnet::layers {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixView = Eigen::Map<RowMatrix>;
using ConstMatrixView = Eigen::Map<const RowMatrix>;
using VectorView = Eigen::Map<Eigen::VectorXd>;
using ConstVectorView = Eigen::Map<const Eigen::VectorXd>;

void require(bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

void im2col(const ConvShape& s, const double* in, double* cols) {
    const int h = s.height;
    const int w = s.width;
    const std::size_t hw = s.pixels();
    for (int c = 0; c < s.in_channels; ++c) {
        const double* plane = in + c * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                double* row = cols + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
                const int dy = ky - 1;
                const int dx = kx - 1;
                for (int y = 0; y < h; ++y) {
                    double* dst = row + static_cast<std::size_t>(y) * w;
                    const int sy = y + dy;
                    if (sy < 0 || sy >= h) {
                        std::fill(dst, dst + w, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<std::size_t>(sy) * w;
                    if (dx < 0) {
                        dst[0] = 0.0;
                        std::copy(src, src + w - 1, dst + 1);
                    } else if (dx == 0) {
                        std::copy(src, src + w, dst);
                    } else {
                        std::copy(src + 1, src + w, dst);
                        dst[w - 1] = 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const ConvShape& s, const double* cols, double* din) {
    const int h = s.height;
    const int w = s.width;
    const std::size_t hw = s.pixels();
    for (int c = 0; c < s.in_channels; ++c) {
        double* plane = din + c * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const double* row = cols + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
                const int dy = ky - 1;
                const int dx = kx - 1;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + dy;
                    if (sy < 0 || sy >= h) continue;
                    const double* src = row + static_cast<std::size_t>(y) * w;
                    double* dst = plane + static_cast<std::size_t>(sy) * w;
                    const int x0 = std::max(0, -dx);
                    const int x1 = std::min(w, w - dx);
                    for (int x = x0; x < x1; ++x) dst[x + dx] += src[x];
                }
            }
        }
    }
}

}  // namespace

void conv3x3_forward(const ConvShape& s, std::span<const double> in, std::span<const double> weight,
                     std::span<const double> bias, std::span<double> out, std::vector<double>& cols) {
    require(in.size() == s.in_size(), "conv input size");
    require(weight.size() == static_cast<std::size_t>(s.out_channels) * s.col_rows(), "conv weight size");
    require(bias.size() == static_cast<std::size_t>(s.out_channels), "conv bias size");
    require(out.size() == s.out_size(), "conv output size");

    const auto rows = static_cast<Eigen::Index>(s.col_rows());
    const auto hw = static_cast<Eigen::Index>(s.pixels());
    cols.resize(s.col_rows() * s.pixels());
    im2col(s, in.data(), cols.data());

    ConstMatrixView w(weight.data(), s.out_channels, rows);
    ConstMatrixView c(cols.data(), rows, hw);
    MatrixView o(out.data(), s.out_channels, hw);
    o.noalias() = w * c;
    for (int k = 0; k < s.out_channels; ++k) o.row(k).array() += bias[k];
}

void conv3x3_backward(const ConvShape& s, std::span<const double> cols, std::span<const double> weight,
                      std::span<const double> dout, std::span<double> dweight_accum,
                      std::span<double> dbias_accum, std::span<double> din) {
    require(cols.size() == s.col_rows() * s.pixels(), "conv cols size");
    require(dout.size() == s.out_size(), "conv output gradient size");
    require(dweight_accum.size() == weight.size(), "conv weight gradient size");
    require(dbias_accum.size() == static_cast<std::size_t>(s.out_channels), "conv bias gradient size");

    const auto rows = static_cast<Eigen::Index>(s.col_rows());
    const auto hw = static_cast<Eigen::Index>(s.pixels());
    ConstMatrixView c(cols.data(), rows, hw);
    ConstMatrixView d(dout.data(), s.out_channels, hw);
    MatrixView dw(dweight_accum.data(), s.out_channels, rows);
    dw.noalias() += d * c.transpose();
    // plain loop: Eigen's vectorized sum peels by address, which would make the
    // rounding depend on where the buffer happens to be allocated
    for (int k = 0; k < s.out_channels; ++k) {
        const double* row = dout.data() + static_cast<std::size_t>(k) * s.pixels();
        double total = 0.0;
        for (std::size_t i = 0; i < s.pixels(); ++i) total += row[i];
        dbias_accum[k] += total;
    }

    if (din.empty()) return;
    require(din.size() == s.in_size(), "conv input gradient size");
    RowMatrix dcols(rows, hw);
    ConstMatrixView w(weight.data(), s.out_channels, rows);
    dcols.noalias() = w.transpose() * d;
    std::fill(din.begin(), din.end(), 0.0);
    col2im_add(s, dcols.data(), din.data());
}

void relu_forward(std::span<double> values) {
    for (double& v : values) v = v > 0.0 ? v : 0.0;
}

void relu_backward(std::span<const double> out, std::span<double> grad) {
    require(out.size() == grad.size(), "relu gradient size");
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(out[i] > 0.0)) grad[i] = 0.0;
    }
}

void maxpool2x2_forward(int channels, int height, int width, std::span<const double> in, std::span<double> out,
                        std::span<std::uint8_t> argmax) {
    const int oh = height / 2;
    const int ow = width / 2;
    require(height % 2 == 0 && width % 2 == 0, "pool input must have even extents");
    require(in.size() == static_cast<std::size_t>(channels) * height * width, "pool input size");
    require(out.size() == static_cast<std::size_t>(channels) * oh * ow, "pool output size");
    require(argmax.size() == out.size(), "pool argmax size");

    for (int c = 0; c < channels; ++c) {
        const double* plane = in.data() + static_cast<std::size_t>(c) * height * width;
        for (int y = 0; y < oh; ++y) {
            const double* r0 = plane + static_cast<std::size_t>(2 * y) * width;
            const double* r1 = r0 + width;
            for (int x = 0; x < ow; ++x) {
                const double cand[4] = {r0[2 * x], r0[2 * x + 1], r1[2 * x], r1[2 * x + 1]};
                std::uint8_t best = 0;
                for (std::uint8_t k = 1; k < 4; ++k) {
                    if (cand[k] > cand[best]) best = k;
                }
                const std::size_t o = (static_cast<std::size_t>(c) * oh + y) * ow + x;
                out[o] = cand[best];
                argmax[o] = best;
            }
        }
    }
}

void maxpool2x2_backward(int channels, int height, int width, std::span<const double> dout,
                         std::span<const std::uint8_t> argmax, std::span<double> din) {
    const int oh = height / 2;
    const int ow = width / 2;
    require(dout.size() == static_cast<std::size_t>(channels) * oh * ow, "pool output gradient size");
    require(argmax.size() == dout.size(), "pool argmax size");
    require(din.size() == static_cast<std::size_t>(channels) * height * width, "pool input gradient size");

    std::fill(din.begin(), din.end(), 0.0);
    for (int c = 0; c < channels; ++c) {
        double* plane = din.data() + static_cast<std::size_t>(c) * height * width;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                const std::size_t o = (static_cast<std::size_t>(c) * oh + y) * ow + x;
                const int k = argmax[o];
                plane[static_cast<std::size_t>(2 * y + k / 2) * width + 2 * x + k % 2] += dout[o];
            }
        }
    }
}

void dense_forward(int in_features, int out_features, std::span<const double> in, std::span<const double> weight,
                   std::span<const double> bias, std::span<double> out) {
    require(in.size() == static_cast<std::size_t>(in_features), "dense input size");
    require(weight.size() == static_cast<std::size_t>(in_features) * out_features, "dense weight size");
    require(bias.size() == static_cast<std::size_t>(out_features), "dense bias size");
    require(out.size() == static_cast<std::size_t>(out_features), "dense output size");

    ConstMatrixView w(weight.data(), out_features, in_features);
    ConstVectorView x(in.data(), in_features);
    VectorView y(out.data(), out_features);
    y.noalias() = w * x;
    y += ConstVectorView(bias.data(), out_features);
}

void dense_backward(int in_features, int out_features, std::span<const double> in, std::span<const double> weight,
                    std::span<const double> dout, std::span<double> dweight_accum, std::span<double> dbias_accum,
                    std::span<double> din) {
    require(in.size() == static_cast<std::size_t>(in_features), "dense input size");
    require(dout.size() == static_cast<std::size_t>(out_features), "dense output gradient size");
    require(dweight_accum.size() == static_cast<std::size_t>(in_features) * out_features, "dense weight gradient size");
    require(dbias_accum.size() == static_cast<std::size_t>(out_features), "dense bias gradient size");

    ConstVectorView x(in.data(), in_features);
    ConstVectorView d(dout.data(), out_features);
    MatrixView dw(dweight_accum.data(), out_features, in_features);
    dw.noalias() += d * x.transpose();
    VectorView(dbias_accum.data(), out_features) += d;

    if (din.empty()) return;
    require(din.size() == static_cast<std::size_t>(in_features), "dense input gradient size");
    ConstMatrixView w(weight.data(), out_features, in_features);
    VectorView(din.data(), in_features).noalias() = w.transpose() * d;
}

}  // namespace brushwork::nnet::layers
