#pragma once

// Real-valued building blocks. Each complex linear layer is four calls into
// these (W_R*A_R, W_R*A_I, W_I*A_R, W_I*A_I) with a +/- sign; backward uses the
// same decomposition. All functions accumulate into their output.

#include <cstddef>

#include "bcvnn/complex_tensor.hpp"

namespace bcvnn::kernels {

struct ConvGeometry {
  std::size_t in_channels, in_h, in_w;
  std::size_t out_channels, kernel_h, kernel_w, stride;
  std::size_t out_h, out_w;

  std::size_t in_size() const { return in_channels * in_h * in_w; }
  std::size_t out_size() const { return out_channels * out_h * out_w; }
};

ConvGeometry conv_geometry(const Shape& input, const Shape& weight, std::size_t stride);

void conv_forward(const ConvGeometry& g, const Scalar* in, const Scalar* w, Scalar* out, Scalar sign);
void conv_backward_input(const ConvGeometry& g, const Scalar* w, const Scalar* gout, Scalar* gin, Scalar sign);
void conv_backward_weight(const ConvGeometry& g, const Scalar* in, const Scalar* gout, Scalar* gw, Scalar sign);

void dense_forward(std::size_t in_n, std::size_t out_n, const Scalar* in, const Scalar* w, Scalar* out, Scalar sign);
void dense_backward_input(std::size_t in_n, std::size_t out_n, const Scalar* w, const Scalar* gout, Scalar* gin,
                          Scalar sign);
void dense_backward_weight(std::size_t in_n, std::size_t out_n, const Scalar* in, const Scalar* gout, Scalar* gw,
                           Scalar sign);

/// Batch count and per-sample flattened length of a dense-layer input.
std::pair<std::size_t, std::size_t> dense_layout(const Shape& input);

}  // namespace bcvnn::kernels
