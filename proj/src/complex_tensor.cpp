#include "bcvnn/complex_tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bcvnn/error.hpp"

namespace bcvnn {

namespace {

void check_extents(const Shape& shape) {
  require(!shape.empty(), ErrorCode::ShapeMismatch, "tensor shape must have at least one extent");
  for (auto extent : shape) {
    require(extent >= 1, ErrorCode::ShapeMismatch, "zero extent in shape " + shape_to_string(shape));
  }
}

void check_same_shape(const ComplexTensor& a, const ComplexTensor& b, const char* op) {
  require(a.shape() == b.shape(), ErrorCode::ShapeMismatch,
          std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
}

template <typename Fn>
ComplexTensor partwise(const ComplexTensor& a, const ComplexTensor& b, const char* op, Fn fn) {
  check_same_shape(a, b, op);
  std::vector<Scalar> re(a.size());
  std::vector<Scalar> im(a.size());
  auto ar = a.real(), ai = a.imag(), br = b.real(), bi = b.imag();
  for (std::size_t k = 0; k < a.size(); ++k) {
    std::tie(re[k], im[k]) = fn(ar[k], ai[k], br[k], bi[k]);
  }
  return ComplexTensor(a.shape(), std::move(re), std::move(im));
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

void put_f64(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

void get_bytes(std::istream& in, unsigned char* dst, std::size_t n) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  require(static_cast<std::size_t>(in.gcount()) == n, ErrorCode::Format, "truncated tensor container");
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  get_bytes(in, b, 4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  get_bytes(in, b, 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return std::bit_cast<double>(v);
}

}  // namespace

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

ComplexTensor::ComplexTensor(Shape shape) : shape_(std::move(shape)) {
  check_extents(shape_);
  real_.assign(element_count(shape_), Scalar{0});
  imag_.assign(real_.size(), Scalar{0});
}

ComplexTensor::ComplexTensor(Shape shape, std::vector<Scalar> real, std::vector<Scalar> imag)
    : shape_(std::move(shape)), real_(std::move(real)), imag_(std::move(imag)) {
  check_extents(shape_);
  const auto n = element_count(shape_);
  require(real_.size() == n && imag_.size() == n, ErrorCode::ShapeMismatch,
          "part lengths do not match shape " + shape_to_string(shape_));
}

ComplexTensor ComplexTensor::reshaped(Shape shape) const {
  check_extents(shape);
  require(element_count(shape) == size(), ErrorCode::ShapeMismatch,
          "cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
  ComplexTensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

bool ComplexTensor::all_finite() const noexcept {
  auto finite = [](Scalar v) { return std::isfinite(v); };
  return std::all_of(real_.begin(), real_.end(), finite) && std::all_of(imag_.begin(), imag_.end(), finite);
}

ComplexTensor czeros(const Shape& shape) { return ComplexTensor(shape); }

ComplexTensor cmul(const ComplexTensor& a, const ComplexTensor& b) {
  return partwise(a, b, "cmul", [](Scalar ar, Scalar ai, Scalar br, Scalar bi) {
    return std::pair{ar * br - ai * bi, ar * bi + ai * br};
  });
}

ComplexTensor cadd(const ComplexTensor& a, const ComplexTensor& b) {
  return partwise(a, b, "cadd",
                  [](Scalar ar, Scalar ai, Scalar br, Scalar bi) { return std::pair{ar + br, ai + bi}; });
}

ComplexTensor csub(const ComplexTensor& a, const ComplexTensor& b) {
  return partwise(a, b, "csub",
                  [](Scalar ar, Scalar ai, Scalar br, Scalar bi) { return std::pair{ar - br, ai - bi}; });
}

ComplexTensor scale(const ComplexTensor& a, Scalar s) {
  ComplexTensor out = a;
  for (auto& v : out.real()) v *= s;
  for (auto& v : out.imag()) v *= s;
  return out;
}

RealTensor magnitude(const ComplexTensor& a) {
  RealTensor out{a.shape(), std::vector<Scalar>(a.size())};
  auto re = a.real(), im = a.imag();
  for (std::size_t k = 0; k < a.size(); ++k) out.data[k] = std::hypot(re[k], im[k]);
  return out;
}

void write_tensor(std::ostream& out, const ComplexTensor& tensor) {
  require(tensor.rank() >= 1 && tensor.rank() <= 255, ErrorCode::InvalidArgument, "tensor rank out of range");
  out.write("BCVT", 4);
  const char header[2] = {static_cast<char>(kTensorFormatVersion), static_cast<char>(tensor.rank())};
  out.write(header, 2);
  for (auto extent : tensor.shape()) {
    require(extent <= 0xFFFFFFFFu, ErrorCode::InvalidArgument, "extent exceeds u32");
    put_u32(out, static_cast<std::uint32_t>(extent));
  }
  for (auto v : tensor.real()) put_f64(out, static_cast<double>(v));
  for (auto v : tensor.imag()) put_f64(out, static_cast<double>(v));
  require(static_cast<bool>(out), ErrorCode::Io, "failed writing tensor");
}

ComplexTensor read_tensor(std::istream& in) {
  unsigned char magic[4];
  get_bytes(in, magic, 4);
  require(std::memcmp(magic, "BCVT", 4) == 0, ErrorCode::Format, "bad tensor magic");
  unsigned char header[2];
  get_bytes(in, header, 2);
  require(header[0] == kTensorFormatVersion, ErrorCode::Format,
          "unsupported tensor version " + std::to_string(header[0]));
  require(header[1] >= 1, ErrorCode::Format, "tensor rank must be at least 1");
  Shape shape(header[1]);
  for (auto& extent : shape) extent = get_u32(in);
  check_extents(shape);
  const auto n = element_count(shape);
  std::vector<Scalar> re(n), im(n);
  for (auto& v : re) v = static_cast<Scalar>(get_f64(in));
  for (auto& v : im) v = static_cast<Scalar>(get_f64(in));
  return ComplexTensor(std::move(shape), std::move(re), std::move(im));
}

void save_tensor(const std::string& path, const ComplexTensor& tensor) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot open " + path + " for writing");
  write_tensor(out, tensor);
}

ComplexTensor load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path);
  return read_tensor(in);
}

}  // namespace bcvnn
