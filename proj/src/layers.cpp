#include "bcvnn/layers.hpp"

#include <algorithm>

#include "bcvnn/error.hpp"
#include "kernels.hpp"

namespace bcvnn {

namespace kernels {

ConvGeometry conv_geometry(const Shape& input, const Shape& weight, std::size_t stride) {
  require(input.size() == 4, ErrorCode::ShapeMismatch, "conv input must be NCHW, got " + shape_to_string(input));
  require(weight.size() == 4, ErrorCode::ShapeMismatch, "conv weight must be OCHW, got " + shape_to_string(weight));
  require(stride >= 1, ErrorCode::InvalidArgument, "conv stride must be >= 1");
  require(input[1] == weight[1], ErrorCode::ShapeMismatch,
          "conv channel mismatch: input " + shape_to_string(input) + ", kernel " + shape_to_string(weight));
  require(input[2] >= weight[2] && input[3] >= weight[3], ErrorCode::ShapeMismatch,
          "conv kernel " + shape_to_string(weight) + " larger than input " + shape_to_string(input));
  ConvGeometry g{};
  g.in_channels = input[1];
  g.in_h = input[2];
  g.in_w = input[3];
  g.out_channels = weight[0];
  g.kernel_h = weight[2];
  g.kernel_w = weight[3];
  g.stride = stride;
  g.out_h = (g.in_h - g.kernel_h) / stride + 1;
  g.out_w = (g.in_w - g.kernel_w) / stride + 1;
  return g;
}

void conv_forward(const ConvGeometry& g, const Scalar* in, const Scalar* w, Scalar* out, Scalar sign) {
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    Scalar* out_plane = out + o * g.out_h * g.out_w;
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      const Scalar* in_plane = in + c * g.in_h * g.in_w;
      const Scalar* kernel = w + (o * g.in_channels + c) * g.kernel_h * g.kernel_w;
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          const Scalar wv = sign * kernel[ky * g.kernel_w + kx];
          for (std::size_t y = 0; y < g.out_h; ++y) {
            const Scalar* row = in_plane + (y * g.stride + ky) * g.in_w + kx;
            Scalar* out_row = out_plane + y * g.out_w;
            for (std::size_t x = 0; x < g.out_w; ++x) out_row[x] += wv * row[x * g.stride];
          }
        }
      }
    }
  }
}

void conv_backward_input(const ConvGeometry& g, const Scalar* w, const Scalar* gout, Scalar* gin, Scalar sign) {
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    const Scalar* gout_plane = gout + o * g.out_h * g.out_w;
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      Scalar* gin_plane = gin + c * g.in_h * g.in_w;
      const Scalar* kernel = w + (o * g.in_channels + c) * g.kernel_h * g.kernel_w;
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          const Scalar wv = sign * kernel[ky * g.kernel_w + kx];
          for (std::size_t y = 0; y < g.out_h; ++y) {
            Scalar* row = gin_plane + (y * g.stride + ky) * g.in_w + kx;
            const Scalar* gout_row = gout_plane + y * g.out_w;
            for (std::size_t x = 0; x < g.out_w; ++x) row[x * g.stride] += wv * gout_row[x];
          }
        }
      }
    }
  }
}

void conv_backward_weight(const ConvGeometry& g, const Scalar* in, const Scalar* gout, Scalar* gw, Scalar sign) {
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    const Scalar* gout_plane = gout + o * g.out_h * g.out_w;
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      const Scalar* in_plane = in + c * g.in_h * g.in_w;
      Scalar* kernel = gw + (o * g.in_channels + c) * g.kernel_h * g.kernel_w;
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          Scalar acc = 0;
          for (std::size_t y = 0; y < g.out_h; ++y) {
            const Scalar* row = in_plane + (y * g.stride + ky) * g.in_w + kx;
            const Scalar* gout_row = gout_plane + y * g.out_w;
            for (std::size_t x = 0; x < g.out_w; ++x) acc += gout_row[x] * row[x * g.stride];
          }
          kernel[ky * g.kernel_w + kx] += sign * acc;
        }
      }
    }
  }
}

void dense_forward(std::size_t in_n, std::size_t out_n, const Scalar* in, const Scalar* w, Scalar* out, Scalar sign) {
  for (std::size_t o = 0; o < out_n; ++o) {
    const Scalar* row = w + o * in_n;
    Scalar acc = 0;
    for (std::size_t i = 0; i < in_n; ++i) acc += row[i] * in[i];
    out[o] += sign * acc;
  }
}

void dense_backward_input(std::size_t in_n, std::size_t out_n, const Scalar* w, const Scalar* gout, Scalar* gin,
                          Scalar sign) {
  for (std::size_t o = 0; o < out_n; ++o) {
    const Scalar* row = w + o * in_n;
    const Scalar g = sign * gout[o];
    for (std::size_t i = 0; i < in_n; ++i) gin[i] += g * row[i];
  }
}

void dense_backward_weight(std::size_t in_n, std::size_t out_n, const Scalar* in, const Scalar* gout, Scalar* gw,
                           Scalar sign) {
  for (std::size_t o = 0; o < out_n; ++o) {
    Scalar* row = gw + o * in_n;
    const Scalar g = sign * gout[o];
    for (std::size_t i = 0; i < in_n; ++i) row[i] += g * in[i];
  }
}

std::pair<std::size_t, std::size_t> dense_layout(const Shape& input) {
  require(!input.empty(), ErrorCode::ShapeMismatch, "dense input has no extents");
  if (input.size() == 1) return {1, input[0]};
  return {input[0], element_count(input) / input[0]};
}

}  // namespace kernels

char part_mode_letter(PartMode mode) {
  switch (mode) {
    case PartMode::Real: return 'R';
    case PartMode::Imag: return 'I';
    case PartMode::Both: return 'B';
  }
  return '?';
}

PartMode part_mode_from_letter(char letter) {
  switch (letter) {
    case 'R': return PartMode::Real;
    case 'I': return PartMode::Imag;
    case 'B': return PartMode::Both;
    default: fail(ErrorCode::InvalidArgument, std::string("unknown part mode '") + letter + "' (expected R, I or B)");
  }
}

std::string_view layer_kind_name(const LayerSpec& layer) {
  static constexpr std::string_view names[] = {"conv2d", "dense", "pool", "activation", "dropout"};
  return names[layer.index()];
}

bool has_parameters(const LayerSpec& layer) {
  return std::holds_alternative<Conv2DSpec>(layer) || std::holds_alternative<DenseSpec>(layer);
}

bool is_dropout(const LayerSpec& layer) { return std::holds_alternative<DropoutSpec>(layer); }

namespace {

void add_bias(const ComplexWeights& w, std::size_t samples, std::size_t channels, std::size_t inner,
              ComplexTensor& out) {
  if (w.bias.empty()) return;
  require(w.bias.size() == channels, ErrorCode::ShapeMismatch,
          "bias length " + std::to_string(w.bias.size()) + " does not match " + std::to_string(channels) +
              " output channels");
  auto br = w.bias.real(), bi = w.bias.imag();
  auto re = out.real(), im = out.imag();
  for (std::size_t n = 0; n < samples; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = (n * channels + c) * inner;
      for (std::size_t k = 0; k < inner; ++k) {
        re[base + k] += br[c];
        im[base + k] += bi[c];
      }
    }
  }
}

}  // namespace

ComplexTensor complex_conv2d(const ComplexTensor& input, const ComplexWeights& w, std::size_t stride) {
  const auto g = kernels::conv_geometry(input.shape(), w.weight.shape(), stride);
  const std::size_t samples = input.shape()[0];
  ComplexTensor out({samples, g.out_channels, g.out_h, g.out_w});
  const Scalar* wr = w.weight.real().data();
  const Scalar* wi = w.weight.imag().data();
  for (std::size_t n = 0; n < samples; ++n) {
    const Scalar* ar = input.real().data() + n * g.in_size();
    const Scalar* ai = input.imag().data() + n * g.in_size();
    Scalar* outr = out.real().data() + n * g.out_size();
    Scalar* outi = out.imag().data() + n * g.out_size();
    kernels::conv_forward(g, ar, wr, outr, +1);  // W_R * A_R
    kernels::conv_forward(g, ai, wi, outr, -1);  // W_I * A_I
    kernels::conv_forward(g, ai, wr, outi, +1);  // W_R * A_I
    kernels::conv_forward(g, ar, wi, outi, +1);  // W_I * A_R
  }
  add_bias(w, samples, g.out_channels, g.out_h * g.out_w, out);
  return out;
}

ComplexTensor complex_dense(const ComplexTensor& input, const ComplexWeights& w) {
  const auto [samples, in_n] = kernels::dense_layout(input.shape());
  require(w.weight.rank() == 2, ErrorCode::ShapeMismatch, "dense weight must be [out, in]");
  require(w.weight.shape()[1] == in_n, ErrorCode::ShapeMismatch,
          "dense input length " + std::to_string(in_n) + " does not match weight " +
              shape_to_string(w.weight.shape()));
  const std::size_t out_n = w.weight.shape()[0];
  ComplexTensor out(input.rank() == 1 ? Shape{out_n} : Shape{samples, out_n});
  const Scalar* wr = w.weight.real().data();
  const Scalar* wi = w.weight.imag().data();
  for (std::size_t n = 0; n < samples; ++n) {
    const Scalar* ar = input.real().data() + n * in_n;
    const Scalar* ai = input.imag().data() + n * in_n;
    Scalar* outr = out.real().data() + n * out_n;
    Scalar* outi = out.imag().data() + n * out_n;
    kernels::dense_forward(in_n, out_n, ar, wr, outr, +1);
    kernels::dense_forward(in_n, out_n, ai, wi, outr, -1);
    kernels::dense_forward(in_n, out_n, ai, wr, outi, +1);
    kernels::dense_forward(in_n, out_n, ar, wi, outi, +1);
  }
  add_bias(w, samples, out_n, 1, out);
  return out;
}

ComplexTensor complex_pool(const ComplexTensor& input, std::size_t window, PoolReduction reduction) {
  require(input.rank() == 4, ErrorCode::ShapeMismatch, "pool input must be NCHW, got " + shape_to_string(input.shape()));
  require(window >= 1, ErrorCode::InvalidArgument, "pool window must be >= 1");
  const auto& s = input.shape();
  require(s[2] % window == 0 && s[3] % window == 0, ErrorCode::ShapeMismatch,
          "spatial extents " + shape_to_string(s) + " not divisible by pool window " + std::to_string(window));
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3], oh = h / window, ow = w / window;
  ComplexTensor out({s[0], s[1], oh, ow});
  const Scalar inv_area = Scalar{1} / static_cast<Scalar>(window * window);
  auto reduce_part = [&](std::span<const Scalar> src, std::span<Scalar> dst) {
    for (std::size_t p = 0; p < planes; ++p) {
      const Scalar* plane = src.data() + p * h * w;
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          Scalar acc = reduction == PoolReduction::Max ? plane[y * window * w + x * window] : Scalar{0};
          for (std::size_t dy = 0; dy < window; ++dy) {
            for (std::size_t dx = 0; dx < window; ++dx) {
              const Scalar v = plane[(y * window + dy) * w + x * window + dx];
              if (reduction == PoolReduction::Max) {
                acc = std::max(acc, v);
              } else {
                acc += v;
              }
            }
          }
          dst[(p * oh + y) * ow + x] = reduction == PoolReduction::Max ? acc : acc * inv_area;
        }
      }
    }
  };
  reduce_part(input.real(), out.real());
  reduce_part(input.imag(), out.imag());
  return out;
}

ComplexTensor complex_activation(const ComplexTensor& input, ActivationKind kind) {
  require(kind == ActivationKind::CReLU, ErrorCode::InvalidArgument, "unsupported activation");
  ComplexTensor out = input;
  for (auto& v : out.real()) v = std::max(v, Scalar{0});
  for (auto& v : out.imag()) v = std::max(v, Scalar{0});
  return out;
}

std::pair<std::size_t, std::size_t> dropout_layout(const Shape& shape) {
  require(!shape.empty(), ErrorCode::ShapeMismatch, "dropout input has no extents");
  if (shape.size() == 1) return {1, shape[0]};
  return {shape[0], shape[1]};
}

DropoutMasks draw_dropout_masks(std::size_t samples, std::size_t channels, double keep_rate, PartMode mode,
                                Rng& rng) {
  require(keep_rate > 0.0 && keep_rate <= 1.0, ErrorCode::InvalidArgument,
          "keep_rate must be in (0, 1], got " + std::to_string(keep_rate));
  DropoutMasks masks{samples, channels, {}, {}};
  auto draw = [&](std::vector<unsigned char>& flags) {
    flags.resize(samples * channels);
    for (auto& f : flags) f = rng.bernoulli(keep_rate) ? 1 : 0;
  };
  if (mode != PartMode::Imag) draw(masks.real);
  if (mode != PartMode::Real) draw(masks.imag);
  return masks;
}

ComplexTensor apply_dropout_masks(const ComplexTensor& input, const DropoutMasks& masks, double keep_rate) {
  const auto [samples, channels] = dropout_layout(input.shape());
  require(samples == masks.samples && channels == masks.channels, ErrorCode::ShapeMismatch,
          "dropout mask layout does not match input " + shape_to_string(input.shape()));
  const std::size_t inner = input.size() / (samples * channels);
  const Scalar survivor_scale = static_cast<Scalar>(1.0 / keep_rate);
  ComplexTensor out = input;
  auto apply = [&](const std::vector<unsigned char>& flags, std::span<Scalar> part) {
    if (flags.empty()) return;
    for (std::size_t sc = 0; sc < samples * channels; ++sc) {
      const Scalar factor = flags[sc] ? survivor_scale : Scalar{0};
      for (std::size_t k = 0; k < inner; ++k) part[sc * inner + k] *= factor;
    }
  };
  apply(masks.real, out.real());
  apply(masks.imag, out.imag());
  return out;
}

ComplexTensor bernoulli_channel_dropout(const ComplexTensor& input, double keep_rate, PartMode mode, Rng& rng) {
  const auto [samples, channels] = dropout_layout(input.shape());
  const auto masks = draw_dropout_masks(samples, channels, keep_rate, mode, rng);
  if (keep_rate == 1.0) return input;
  return apply_dropout_masks(input, masks, keep_rate);
}

}  // namespace bcvnn
