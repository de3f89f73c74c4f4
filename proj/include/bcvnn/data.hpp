#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bcvnn/training.hpp"

namespace bcvnn {

enum class MnistMode { ZeroImag, Dft };

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxImages {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::vector<std::uint8_t>> images;
};

IdxImages read_idx_images(const std::string& path);
std::vector<std::uint8_t> read_idx_labels(const std::string& path);
void write_idx_images(const std::string& path, const IdxImages& images);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

/// Unnormalized 2-D DFT of a real H x W image.
ComplexTensor dft2(std::span<const Scalar> image, std::size_t rows, std::size_t cols);

/// Samples have shape [1, rows, cols]. ZeroImag: real = pixel/255. Dft: DFT
/// of the normalized image. limit = 0 loads everything after offset.
Dataset load_mnist_complex(const std::string& images_path, const std::string& labels_path, MnistMode mode,
                           std::size_t offset = 0, std::size_t limit = 0);

struct SyntheticSpec {
  std::size_t classes = 2;
  std::size_t samples_per_class = 50;
  Shape feature_shape{8};
  double class_separation = 1.0;
  std::uint64_t seed = 1;
};

/// Complex Gaussian clouds around class centroids with distinct magnitude and
/// phase signatures. Samples are emitted class-interleaved.
Dataset generate_synthetic(const SyntheticSpec& spec);

/// <prefix>.bcvt holds the stacked [N, ...] inputs, <prefix>.labels.csv the
/// labels (index,label).
void save_dataset(const std::string& prefix, const Dataset& data);
Dataset load_dataset(const std::string& prefix, std::size_t classes);

}  // namespace bcvnn
