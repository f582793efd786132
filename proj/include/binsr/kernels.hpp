#pragma once

#include <span>

#include "binsr/tensor.hpp"

// Dense float kernels shared by the training tape and the eval interpreter.
// Backward kernels accumulate into their output spans.
namespace binsr::kernels {

Shape conv2d_output_shape(const Shape& input, const Shape& weight, int stride, int pad);

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor* bias, int stride,
                      int pad);

void conv2d_backward_input(std::span<const float> grad_out, const Shape& out_shape,
                           const Tensor& weight, int stride, int pad, const Shape& in_shape,
                           std::span<float> grad_in);

void conv2d_backward_weight(const Tensor& input, std::span<const float> grad_out,
                            const Shape& out_shape, int stride, int pad, const Shape& w_shape,
                            std::span<float> grad_weight);

void conv2d_backward_bias(std::span<const float> grad_out, const Shape& out_shape,
                          std::span<float> grad_bias);

/// out(n, c, r*h + i, r*w + j) = in(n, c*r*r + i*r + j, h, w)
Tensor pixel_shuffle(const Tensor& input, int r);
/// Exact inverse permutation of pixel_shuffle.
Tensor pixel_unshuffle(const Tensor& input, int r);

Tensor repeat_channels(const Tensor& input, int k);

Tensor add(const Tensor& a, const Tensor& b);

}  // namespace binsr::kernels
