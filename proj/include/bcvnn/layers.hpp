#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bcvnn/complex_tensor.hpp"
#include "bcvnn/rng.hpp"

namespace bcvnn {

/// Which part of a complex activation a Bayesian layer masks.
enum class PartMode { Real, Imag, Both };

char part_mode_letter(PartMode mode);
PartMode part_mode_from_letter(char letter);

enum class PoolReduction { Max, Avg };
enum class ActivationKind { CReLU };

struct Conv2DSpec {
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
};

struct DenseSpec {
  std::size_t out_features = 1;
};

struct PoolSpec {
  std::size_t window = 2;
  PoolReduction reduction = PoolReduction::Max;
};

struct ActivationSpec {
  ActivationKind kind = ActivationKind::CReLU;
};

struct DropoutSpec {
  double keep_rate = 1.0;
  PartMode part_mode = PartMode::Both;
};

using LayerSpec = std::variant<Conv2DSpec, DenseSpec, PoolSpec, ActivationSpec, DropoutSpec>;

std::string_view layer_kind_name(const LayerSpec& layer);
bool has_parameters(const LayerSpec& layer);
bool is_dropout(const LayerSpec& layer);

/// Complex parameters of one layer: weight.real() is M_real, weight.imag() is
/// M_imag. Conv weights are [O, C, KH, KW], dense weights [O, I]; bias is [O].
struct ComplexWeights {
  ComplexTensor weight;
  ComplexTensor bias;

  friend bool operator==(const ComplexWeights&, const ComplexWeights&) = default;
};

// Layer forward operations. Feature maps are NCHW; dense inputs are either a
// rank-1 vector (single sample) or [N, ...] with trailing extents flattened.

ComplexTensor complex_conv2d(const ComplexTensor& input, const ComplexWeights& w, std::size_t stride);
ComplexTensor complex_dense(const ComplexTensor& input, const ComplexWeights& w);
ComplexTensor complex_pool(const ComplexTensor& input, std::size_t window, PoolReduction reduction);
ComplexTensor complex_activation(const ComplexTensor& input, ActivationKind kind = ActivationKind::CReLU);

/// Per-(sample, channel) keep flags for each masked part. An empty vector
/// means that part is not masked.
struct DropoutMasks {
  std::size_t samples = 0;
  std::size_t channels = 0;
  std::vector<unsigned char> real;
  std::vector<unsigned char> imag;
};

/// Sample counts and channel counts as seen by channel dropout: rank-1 input is
/// one sample whose elements are channels; otherwise dim 0 is samples and dim 1
/// channels.
std::pair<std::size_t, std::size_t> dropout_layout(const Shape& shape);

/// Draws real-part flags (sample-major) first, then imag-part flags.
DropoutMasks draw_dropout_masks(std::size_t samples, std::size_t channels, double keep_rate, PartMode mode, Rng& rng);

/// Zeroes dropped channels of each masked part and scales survivors by
/// 1/keep_rate. Unmasked parts are copied unchanged.
ComplexTensor apply_dropout_masks(const ComplexTensor& input, const DropoutMasks& masks, double keep_rate);

ComplexTensor bernoulli_channel_dropout(const ComplexTensor& input, double keep_rate, PartMode mode, Rng& rng);

}  // namespace bcvnn
