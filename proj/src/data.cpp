#include "bcvnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>

#include "bcvnn/csv.hpp"
#include "bcvnn/error.hpp"

namespace bcvnn {

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  require(in.gcount() == 4, ErrorCode::Format, path + ": truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

std::ifstream open_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path);
  return in;
}

}  // namespace

IdxImages read_idx_images(const std::string& path) {
  auto in = open_binary(path);
  const auto magic = read_be32(in, path);
  require(magic == kIdxImagesMagic, ErrorCode::Format, path + ": bad IDX image magic");
  const std::size_t count = read_be32(in, path);
  IdxImages out;
  out.rows = read_be32(in, path);
  out.cols = read_be32(in, path);
  require(out.rows >= 1 && out.cols >= 1, ErrorCode::Format, path + ": zero image extent");
  const std::size_t per = out.rows * out.cols;
  out.images.resize(count);
  for (auto& img : out.images) {
    img.resize(per);
    in.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(per));
    require(static_cast<std::size_t>(in.gcount()) == per, ErrorCode::Format, path + ": truncated image data");
  }
  return out;
}

std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
  auto in = open_binary(path);
  const auto magic = read_be32(in, path);
  require(magic == kIdxLabelsMagic, ErrorCode::Format, path + ": bad IDX label magic");
  const std::size_t count = read_be32(in, path);
  std::vector<std::uint8_t> labels(count);
  in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(count));
  require(static_cast<std::size_t>(in.gcount()) == count, ErrorCode::Format, path + ": truncated label data");
  return labels;
}

void write_idx_images(const std::string& path, const IdxImages& images) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot open " + path + " for writing");
  write_be32(out, kIdxImagesMagic);
  write_be32(out, static_cast<std::uint32_t>(images.images.size()));
  write_be32(out, static_cast<std::uint32_t>(images.rows));
  write_be32(out, static_cast<std::uint32_t>(images.cols));
  for (const auto& img : images.images) {
    require(img.size() == images.rows * images.cols, ErrorCode::InvalidArgument, "image size mismatch");
    out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
  }
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot open " + path + " for writing");
  write_be32(out, kIdxLabelsMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

ComplexTensor dft2(std::span<const Scalar> image, std::size_t rows, std::size_t cols) {
  require(image.size() == rows * cols, ErrorCode::ShapeMismatch, "dft2: image size does not match extents");
  using C = std::complex<double>;
  auto twiddles = [](std::size_t n) {
    std::vector<C> t(n);
    for (std::size_t k = 0; k < n; ++k) {
      t[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
    }
    return t;
  };
  const auto tr = twiddles(rows), tc = twiddles(cols);
  // Row transforms, then column transforms.
  std::vector<C> tmp(rows * cols);
  for (std::size_t y = 0; y < rows; ++y) {
    for (std::size_t v = 0; v < cols; ++v) {
      C acc{};
      for (std::size_t x = 0; x < cols; ++x) acc += static_cast<double>(image[y * cols + x]) * tc[(v * x) % cols];
      tmp[y * cols + v] = acc;
    }
  }
  ComplexTensor out({rows, cols});
  for (std::size_t u = 0; u < rows; ++u) {
    for (std::size_t v = 0; v < cols; ++v) {
      C acc{};
      for (std::size_t y = 0; y < rows; ++y) acc += tmp[y * cols + v] * tr[(u * y) % rows];
      out.real()[u * cols + v] = static_cast<Scalar>(acc.real());
      out.imag()[u * cols + v] = static_cast<Scalar>(acc.imag());
    }
  }
  return out;
}

Dataset load_mnist_complex(const std::string& images_path, const std::string& labels_path, MnistMode mode,
                           std::size_t offset, std::size_t limit) {
  const auto images = read_idx_images(images_path);
  const auto labels = read_idx_labels(labels_path);
  require(images.images.size() == labels.size(), ErrorCode::Format,
          "image count " + std::to_string(images.images.size()) + " does not match label count " +
              std::to_string(labels.size()));
  require(offset <= labels.size(), ErrorCode::InvalidArgument, "MNIST offset beyond end of file");
  const std::size_t count = limit == 0 ? labels.size() - offset : std::min(limit, labels.size() - offset);
  Dataset data;
  data.classes = 10;
  const std::size_t per = images.rows * images.cols;
  std::vector<Scalar> pixels(per);
  for (std::size_t i = offset; i < offset + count; ++i) {
    require(labels[i] < 10, ErrorCode::Format, "MNIST label out of range at row " + std::to_string(i));
    for (std::size_t k = 0; k < per; ++k) pixels[k] = static_cast<Scalar>(images.images[i][k]) / Scalar{255};
    if (mode == MnistMode::ZeroImag) {
      data.inputs.emplace_back(Shape{1, images.rows, images.cols}, pixels, std::vector<Scalar>(per, Scalar{0}));
    } else {
      data.inputs.push_back(dft2(pixels, images.rows, images.cols).reshaped({1, images.rows, images.cols}));
    }
    data.labels.push_back(labels[i]);
  }
  return data;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  require(spec.classes >= 2, ErrorCode::InvalidArgument, "synthetic data needs at least two classes");
  require(spec.samples_per_class >= 1, ErrorCode::InvalidArgument, "samples_per_class must be >= 1");
  require(spec.class_separation > 0.0, ErrorCode::InvalidArgument, "class_separation must be > 0");
  const std::size_t features = element_count(spec.feature_shape);
  require(!spec.feature_shape.empty() && features >= 1, ErrorCode::InvalidArgument, "empty feature shape");

  Rng rng(spec.seed);
  std::vector<std::vector<std::complex<double>>> centroids(spec.classes);
  for (std::size_t k = 0; k < spec.classes; ++k) {
    // Radius grows with the class index; phases are random per feature.
    const double radius =
        spec.class_separation * (1.0 + 0.5 * static_cast<double>(k) / static_cast<double>(spec.classes - 1));
    for (std::size_t j = 0; j < features; ++j) {
      centroids[k].push_back(std::polar(radius, rng.uniform(0.0, 2.0 * std::numbers::pi)));
    }
  }
  const double noise = std::sqrt(0.5);
  Dataset data;
  data.classes = spec.classes;
  for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
    for (std::size_t k = 0; k < spec.classes; ++k) {
      std::vector<Scalar> re(features), im(features);
      for (std::size_t j = 0; j < features; ++j) {
        re[j] = static_cast<Scalar>(centroids[k][j].real() + noise * rng.normal());
        im[j] = static_cast<Scalar>(centroids[k][j].imag() + noise * rng.normal());
      }
      data.inputs.emplace_back(spec.feature_shape, std::move(re), std::move(im));
      data.labels.push_back(static_cast<int>(k));
    }
  }
  return data;
}

void save_dataset(const std::string& prefix, const Dataset& data) {
  validate(data);
  require(data.size() >= 1, ErrorCode::InvalidArgument, "cannot save an empty dataset");
  std::vector<std::size_t> rows(data.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  save_tensor(prefix + ".bcvt", stack_inputs(data, rows));
  std::ofstream out(prefix + ".labels.csv", std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + prefix + ".labels.csv");
  csv::write_row(out, {"index", "label"});
  for (std::size_t i = 0; i < data.size(); ++i) csv::write_row(out, {std::to_string(i), std::to_string(data.labels[i])});
}

Dataset load_dataset(const std::string& prefix, std::size_t classes) {
  const auto stacked = load_tensor(prefix + ".bcvt");
  require(stacked.rank() >= 2, ErrorCode::Format, prefix + ".bcvt must be [N, ...]");
  std::ifstream in(prefix + ".labels.csv", std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + prefix + ".labels.csv");
  const auto rows = csv::read_all(in);
  require(!rows.empty() && rows[0].size() == 2 && rows[0][1] == "label", ErrorCode::Format,
          prefix + ".labels.csv lacks an index,label header");
  const std::size_t n = stacked.shape()[0];
  require(rows.size() - 1 == n, ErrorCode::Format, "label count does not match stacked tensor");
  Shape sample(stacked.shape().begin() + 1, stacked.shape().end());
  const std::size_t per = element_count(sample);
  Dataset data;
  int top = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = static_cast<int>(csv::parse_int(rows[i + 1].at(1)));
    top = std::max(top, label);
    data.labels.push_back(label);
    data.inputs.emplace_back(sample, std::vector<Scalar>(stacked.real().begin() + i * per, stacked.real().begin() + (i + 1) * per),
                             std::vector<Scalar>(stacked.imag().begin() + i * per, stacked.imag().begin() + (i + 1) * per));
  }
  data.classes = classes != 0 ? classes : std::max<std::size_t>(2, static_cast<std::size_t>(top) + 1);
  validate(data);
  return data;
}

}  // namespace bcvnn
