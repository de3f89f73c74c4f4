#include <random>

#include "bcvnn/error.hpp"
#include "bcvnn/layers.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bcvnn;

namespace {

ComplexWeights random_weights(const Shape& weight_shape, std::size_t out, Rng& rng) {
  return {oracle::random_tensor(weight_shape, rng), oracle::random_tensor({out}, rng)};
}

void check_close(const ComplexTensor& got, const std::vector<oracle::cd>& want, double tol) {
  REQUIRE(got.size() == want.size());
  const auto g = oracle::to_complex(got);
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(oracle::rel_err(g[i].real(), want[i].real(), 1.0) <= tol);
    CHECK(oracle::rel_err(g[i].imag(), want[i].imag(), 1.0) <= tol);
  }
}

// Independent replay of the documented generator: mt19937_64, 53-bit uniform.
std::vector<unsigned char> reference_flags(std::uint64_t seed, std::size_t count, double keep) {
  std::mt19937_64 engine(seed);
  std::vector<unsigned char> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(double(engine() >> 11) * 0x1.0p-53 < keep ? 1 : 0);
  return out;
}

}  // namespace

TEST_CASE("conv2d scalar case") {
  const ComplexTensor x({1, 1, 1, 1}, {1}, {2});
  const ComplexWeights w{ComplexTensor({1, 1, 1, 1}, {3}, {4}), czeros({1})};
  const auto y = complex_conv2d(x, w, 1);
  CHECK(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y.real()[0] == -5);
  CHECK(y.imag()[0] == 10);
}

TEST_CASE("conv2d with purely real operands has zero imaginary output") {
  Rng rng(2);
  auto x = oracle::random_tensor({1, 2, 5, 5}, rng);
  auto w = random_weights({3, 2, 3, 3}, 3, rng);
  for (auto* t : {&x, &w.weight, &w.bias}) std::fill(t->imag().begin(), t->imag().end(), Scalar{0});
  const auto y = complex_conv2d(x, w, 1);
  for (const auto v : y.imag()) CHECK(v == 0);
}

TEST_CASE("conv2d matches a naive complex multiply-accumulate") {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(2), c = 1 + rng.below(3), o = 1 + rng.below(4);
    const std::size_t kh = 1 + rng.below(3), kw = 1 + rng.below(3), stride = 1 + rng.below(2);
    const std::size_t h = kh + rng.below(5), w = kw + rng.below(5);
    const auto x = oracle::random_tensor({n, c, h, w}, rng);
    const auto wt = random_weights({o, c, kh, kw}, o, rng);
    const auto want = oracle::conv2d(oracle::to_complex(x), n, c, h, w, oracle::to_complex(wt.weight), o, kh, kw,
                                     oracle::to_complex(wt.bias), stride);
    check_close(complex_conv2d(x, wt, stride), want, 1e-12);
  }
  SUBCASE("fixed 1x2x4x4 input with 3x2x3x3 kernel") {
    const auto x = oracle::random_tensor({1, 2, 4, 4}, rng);
    const auto wt = random_weights({3, 2, 3, 3}, 3, rng);
    const auto y = complex_conv2d(x, wt, 1);
    CHECK(y.shape() == Shape{1, 3, 2, 2});
    check_close(y, oracle::conv2d(oracle::to_complex(x), 1, 2, 4, 4, oracle::to_complex(wt.weight), 3, 3, 3,
                                  oracle::to_complex(wt.bias), 1),
                1e-12);
  }
}

TEST_CASE("conv2d shape errors") {
  Rng rng(1);
  const auto w = random_weights({2, 3, 3, 3}, 2, rng);
  CHECK_THROWS_AS(complex_conv2d(czeros({1, 2, 5, 5}), w, 1), Error);
  CHECK_THROWS_AS(complex_conv2d(czeros({1, 3, 2, 5}), w, 1), Error);
  CHECK_THROWS_AS(complex_conv2d(czeros({1, 3, 5, 5}), w, 0), Error);
}

TEST_CASE("dense scalar and identity cases") {
  const ComplexWeights w{ComplexTensor({1, 1}, {3}, {4}), czeros({1})};
  const auto y = complex_dense(ComplexTensor({1}, {1}, {2}), w);
  CHECK(y.real()[0] == -5);
  CHECK(y.imag()[0] == 10);

  ComplexWeights eye{czeros({4, 4}), czeros({4})};
  for (std::size_t i = 0; i < 4; ++i) eye.weight.real()[i * 4 + i] = 1;
  Rng rng(4);
  const auto x = oracle::random_tensor({4}, rng);
  CHECK(complex_dense(x, eye) == x);
}

TEST_CASE("dense matches a naive complex matrix-vector product") {
  Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(3), in = 1 + rng.below(8), out = 1 + rng.below(8);
    const auto x = oracle::random_tensor({n, in}, rng);
    const auto w = random_weights({out, in}, out, rng);
    check_close(complex_dense(x, w),
                oracle::dense(oracle::to_complex(x), n, in, oracle::to_complex(w.weight), out,
                              oracle::to_complex(w.bias)),
                1e-12);
  }
  const auto x = oracle::random_tensor({4}, rng);
  const auto w = random_weights({3, 4}, 3, rng);
  const auto y = complex_dense(x, w);
  CHECK(y.shape() == Shape{3});
  check_close(y, oracle::dense(oracle::to_complex(x), 1, 4, oracle::to_complex(w.weight), 3, oracle::to_complex(w.bias)),
              1e-12);
}

TEST_CASE("dense flattens trailing dimensions of a batch") {
  Rng rng(6);
  const auto x = oracle::random_tensor({2, 2, 3}, rng);
  const auto w = random_weights({5, 6}, 5, rng);
  CHECK(complex_dense(x, w) == complex_dense(x.reshaped({2, 6}), w));
  CHECK_THROWS_AS(complex_dense(oracle::random_tensor({2, 7}, rng), w), Error);
}

TEST_CASE("pooling works on each part independently") {
  const ComplexTensor x({1, 1, 2, 2}, {1, 3, 5, 7}, {0, 2, 4, 6});
  const auto avg = complex_pool(x, 2, PoolReduction::Avg);
  CHECK(avg.real()[0] == 4);
  CHECK(avg.imag()[0] == 3);
  const auto mx = complex_pool(x, 2, PoolReduction::Max);
  CHECK(mx.real()[0] == 7);
  CHECK(mx.imag()[0] == 6);

  ComplexTensor c({2, 3, 4, 4});
  std::fill(c.real().begin(), c.real().end(), Scalar(1.5));
  std::fill(c.imag().begin(), c.imag().end(), Scalar(-2));
  for (auto mode : {PoolReduction::Avg, PoolReduction::Max}) {
    const auto p = complex_pool(c, 2, mode);
    CHECK(p.shape() == Shape{2, 3, 2, 2});
    for (auto v : p.real()) CHECK(v == 1.5);
    for (auto v : p.imag()) CHECK(v == -2);
  }
  CHECK_THROWS_AS(complex_pool(czeros({1, 1, 3, 3}), 2, PoolReduction::Max), Error);
}

TEST_CASE("CReLU clamps each part at zero") {
  const ComplexTensor x({2}, {-1, 3}, {2, -4});
  const auto y = complex_activation(x);
  CHECK(y.real()[0] == 0);
  CHECK(y.imag()[0] == 2);
  CHECK(y.real()[1] == 3);
  CHECK(y.imag()[1] == 0);
  const ComplexTensor pos({3}, {0, 1, 2}, {3, 0, 5});
  CHECK(complex_activation(pos) == pos);
}

TEST_CASE("dropout with keep_rate 1 is the identity") {
  Rng data_rng(8);
  const auto x = oracle::random_tensor({3, 4, 2, 2}, data_rng);
  for (auto mode : {PartMode::Real, PartMode::Imag, PartMode::Both}) {
    Rng rng(1);
    CHECK(bernoulli_channel_dropout(x, 1.0, mode, rng) == x);
  }
}

TEST_CASE("part isolation: the untouched part is bit-identical") {
  Rng data_rng(12);
  const auto x = oracle::random_tensor({4, 6, 3, 3}, data_rng);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng a(seed), b(seed);
    const auto yi = bernoulli_channel_dropout(x, 0.5, PartMode::Imag, a);
    CHECK(std::equal(yi.real().begin(), yi.real().end(), x.real().begin()));
    const auto yr = bernoulli_channel_dropout(x, 0.5, PartMode::Real, b);
    CHECK(std::equal(yr.imag().begin(), yr.imag().end(), x.imag().begin()));
  }
}

TEST_CASE("seeded Real-mode mask matches an independent replay") {
  Rng data_rng(21);
  const auto x = oracle::random_tensor({1, 4, 3, 3}, data_rng);
  for (std::uint64_t seed : {1ULL, 7ULL, 99ULL, 123456789ULL}) {
    Rng rng(seed);
    const auto y = bernoulli_channel_dropout(x, 0.5, PartMode::Real, rng);
    const auto flags = reference_flags(seed, 4, 0.5);
    for (std::size_t c = 0; c < 4; ++c) {
      for (std::size_t k = 0; k < 9; ++k) {
        const std::size_t i = c * 9 + k;
        CHECK(y.real()[i] == (flags[c] ? 2 * x.real()[i] : Scalar{0}));
        CHECK(y.imag()[i] == x.imag()[i]);
      }
    }
  }
}

TEST_CASE("Both mode draws real flags first, then imaginary") {
  const auto masks = [] {
    Rng rng(31);
    return draw_dropout_masks(2, 5, 0.5, PartMode::Both, rng);
  }();
  const auto flags = reference_flags(31, 20, 0.5);
  CHECK(masks.real == std::vector<unsigned char>(flags.begin(), flags.begin() + 10));
  CHECK(masks.imag == std::vector<unsigned char>(flags.begin() + 10, flags.end()));
}

TEST_CASE("masks act on whole channels") {
  Rng data_rng(4);
  auto x = oracle::random_tensor({3, 5, 4, 4}, data_rng);
  for (auto& v : x.real()) v = v == 0 ? Scalar(1) : v;
  for (auto& v : x.imag()) v = v == 0 ? Scalar(1) : v;
  Rng rng(77);
  for (int draw = 0; draw < 100; ++draw) {
    const auto y = bernoulli_channel_dropout(x, 0.6, PartMode::Both, rng);
    for (auto part : {0, 1}) {
      const auto src = part ? x.imag() : x.real();
      const auto dst = part ? y.imag() : y.real();
      for (std::size_t sc = 0; sc < 15; ++sc) {
        std::size_t zeros = 0;
        for (std::size_t k = 0; k < 16; ++k) zeros += dst[sc * 16 + k] == 0;
        CHECK((zeros == 0 || zeros == 16));
        if (zeros == 0) {
          for (std::size_t k = 0; k < 16; ++k) CHECK(dst[sc * 16 + k] == doctest::Approx(src[sc * 16 + k] / 0.6).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("invalid keep rates") {
  Rng rng(1);
  CHECK_THROWS_AS(bernoulli_channel_dropout(czeros({2, 2}), 0.0, PartMode::Both, rng), Error);
  CHECK_THROWS_AS(bernoulli_channel_dropout(czeros({2, 2}), 1.5, PartMode::Both, rng), Error);
}

TEST_CASE("part mode letters") {
  CHECK(part_mode_letter(PartMode::Real) == 'R');
  CHECK(part_mode_letter(PartMode::Imag) == 'I');
  CHECK(part_mode_letter(PartMode::Both) == 'B');
  CHECK(part_mode_from_letter('I') == PartMode::Imag);
  CHECK_THROWS_AS(part_mode_from_letter('X'), Error);
}
