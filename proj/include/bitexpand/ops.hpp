#pragma once

#include <cstddef>
#include <vector>

#include "bitexpand/tensor.hpp"

namespace bitexpand {

/// Convolution parameters.
///
/// For a regular convolution `weight` is (c_out, c_in, k, k). For a
/// transposed convolution it is (c_in, c_out, k, k), i.e. the weight of the
/// strided convolution it is the adjoint of. Padding is always same-zero with
/// `(k - 1) * dilation / 2` cells on each side.
struct ConvParams {
    Tensor weight;
    std::vector<float> bias;
    int stride = 1;
    int dilation = 1;

    std::size_t kernel() const { return weight.h(); }
    int padding() const { return static_cast<int>((kernel() - 1) * dilation / 2); }
};

struct ConvGrads {
    Tensor grad_x;
    Tensor grad_weight;
    std::vector<float> grad_bias;
};

/// Output spatial size of a same-padded strided convolution: ceil(size / stride).
std::size_t conv_out_size(std::size_t size, const ConvParams& p);

Tensor conv2d(const Tensor& x, const ConvParams& p);
ConvGrads conv2d_backward(const Tensor& x, const ConvParams& p, const Tensor& grad_out);

/// Fractionally strided convolution: the exact adjoint of conv2d with the same
/// kernel at stride p.stride. Output spatial size is (stride * h, stride * w).
Tensor transposed_conv2d(const Tensor& x, const ConvParams& p);
ConvGrads transposed_conv2d_backward(const Tensor& x, const ConvParams& p, const Tensor& grad_out);

Tensor leaky_relu(const Tensor& x, float slope);
Tensor leaky_relu_backward(const Tensor& x, float slope, const Tensor& grad_out);

/// Half-pixel-centre bilinear resampling. Also used for downscaling.
Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w);
/// Adjoint of bilinear_resize: scatters grad_out back with the interpolation weights.
Tensor bilinear_resize_backward(const Tensor& grad_out, std::size_t in_h, std::size_t in_w);

/// Upsampling entry points; require out_h >= h and out_w >= w.
Tensor bilinear_upsample(const Tensor& x, std::size_t out_h, std::size_t out_w);
Tensor bilinear_upsample_backward(const Tensor& grad_out, std::size_t in_h, std::size_t in_w);

Tensor add(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& acc, const Tensor& b);
Tensor concat_channels(const Tensor& a, const Tensor& b);

struct LossResult {
    double loss = 0.0;
    Tensor grad;
};

/// Batch-mean of per-sample mean absolute error. Sign of zero is taken as 0.
LossResult l1_loss(const Tensor& pred, const Tensor& target);

}  // namespace bitexpand
