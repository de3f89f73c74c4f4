// Naive reference implementations used as independent oracles. They work on
// std::complex<double> and share no code with the library kernels.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "bcvnn/complex_tensor.hpp"
#include "bcvnn/rng.hpp"

namespace oracle {

using cd = std::complex<double>;

inline std::vector<cd> to_complex(const bcvnn::ComplexTensor& t) {
  std::vector<cd> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = {double(t.real()[i]), double(t.imag()[i])};
  return out;
}

inline bcvnn::ComplexTensor random_tensor(const bcvnn::Shape& shape, bcvnn::Rng& rng, double scale = 1.0) {
  bcvnn::ComplexTensor t(shape);
  for (auto& v : t.real()) v = static_cast<bcvnn::Scalar>(rng.uniform(-scale, scale));
  for (auto& v : t.imag()) v = static_cast<bcvnn::Scalar>(rng.uniform(-scale, scale));
  return t;
}

// Direct valid-padding convolution, NCHW input, OCHW kernel.
inline std::vector<cd> conv2d(const std::vector<cd>& x, std::size_t n, std::size_t c, std::size_t h, std::size_t w,
                              const std::vector<cd>& k, std::size_t o, std::size_t kh, std::size_t kw,
                              const std::vector<cd>& bias, std::size_t stride) {
  const std::size_t oh = (h - kh) / stride + 1, ow = (w - kw) / stride + 1;
  std::vector<cd> out(n * o * oh * ow);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t f = 0; f < o; ++f)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          cd acc = bias[f];
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j)
                acc += k[((f * c + ch) * kh + i) * kw + j] * x[((b * c + ch) * h + y * stride + i) * w + xx * stride + j];
          out[((b * o + f) * oh + y) * ow + xx] = acc;
        }
  return out;
}

// y = W x + b for each of n rows of x.
inline std::vector<cd> dense(const std::vector<cd>& x, std::size_t n, std::size_t in, const std::vector<cd>& wt,
                             std::size_t out_features, const std::vector<cd>& bias) {
  std::vector<cd> out(n * out_features);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < out_features; ++o) {
      cd acc = bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += wt[o * in + i] * x[b * in + i];
      out[b * out_features + o] = acc;
    }
  return out;
}

// Four nested loops straight from the DFT definition.
inline std::vector<cd> dft2(const std::vector<double>& img, std::size_t rows, std::size_t cols) {
  std::vector<cd> out(rows * cols);
  for (std::size_t u = 0; u < rows; ++u)
    for (std::size_t v = 0; v < cols; ++v) {
      cd acc{};
      for (std::size_t y = 0; y < rows; ++y)
        for (std::size_t x = 0; x < cols; ++x) {
          const double angle = -2.0 * std::numbers::pi * (double(u * y) / double(rows) + double(v * x) / double(cols));
          acc += img[y * cols + x] * cd(std::cos(angle), std::sin(angle));
        }
      out[u * cols + v] = acc;
    }
  return out;
}

inline std::vector<double> softmax_of_magnitudes(const std::vector<cd>& logits) {
  std::vector<double> mags;
  for (const auto& z : logits) mags.push_back(std::abs(z));
  const double top = *std::max_element(mags.begin(), mags.end());
  double sum = 0.0;
  for (auto& m : mags) sum += (m = std::exp(m - top));
  for (auto& m : mags) m /= sum;
  return mags;
}

// Indices of points not dominated in (acc up, ece down). Quadratic scan.
inline std::vector<std::size_t> pareto(const std::vector<std::pair<double, double>>& pts) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
      if (i == j) continue;
      const bool ge = pts[j].first >= pts[i].first && pts[j].second <= pts[i].second;
      const bool gt = pts[j].first > pts[i].first || pts[j].second < pts[i].second;
      dominated = ge && gt;
    }
    if (!dominated) keep.push_back(i);
  }
  return keep;
}

inline double rel_err(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
