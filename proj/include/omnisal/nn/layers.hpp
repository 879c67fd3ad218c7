#pragma once

#include <cstddef>
#include <vector>

#include "omnisal/nn/tensor.hpp"

namespace omnisal::nn {

// Spatial size algebra. Convolution and pooling use floor((i + 2p - k) / s) + 1,
// transposed convolution (i - 1) * s - 2p + k. Both throw ShapeMismatch when the
// result would be smaller than one pixel.
int conv_out_size(int in, int kernel, int stride, int pad);
int deconv_out_size(int in, int kernel, int stride, int pad);

struct ParamGrads {
  Tensor grad_x;
  Tensor grad_w;
  Tensor grad_b;
};

/// Cross-correlation of x (N, Cin, H, W) with w (Cout, Cin, k, k) plus bias (Cout).
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);
ParamGrads conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out, int stride, int pad);

/// Transposed convolution, w laid out as (Cout, Cin, k, k) like conv2d.
Tensor deconv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);
ParamGrads deconv2d_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out, int stride, int pad);

struct PoolResult {
  Tensor out;
  std::vector<std::size_t> argmax;  // flat input index per output element
  std::vector<std::size_t> input_shape;
};

/// Window maximum without padding; ties go to the first window element in
/// row-major order.
PoolResult maxpool_forward(const Tensor& x, int kernel, int stride);
Tensor maxpool_backward(const PoolResult& forward, const Tensor& grad_out);

Tensor relu(const Tensor& x);
/// Passes gradient where x > 0 (derivative at 0 is 0).
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

struct LossResult {
  double loss = 0.0;
  Tensor grad;
};

/// loss = sum((pred - target)^2) / (2 * batch * items_per_sample); the
/// gradient is (pred - target) / (batch * items_per_sample).
LossResult euclidean_loss(const Tensor& pred, const Tensor& target);

/// Pixel-centre aligned bilinear resampling of the spatial axes and its adjoint.
Tensor resize_bilinear(const Tensor& x, std::size_t height, std::size_t width);
Tensor resize_bilinear_backward(const Tensor& grad_out, std::size_t in_height, std::size_t in_width);

}  // namespace omnisal::nn
