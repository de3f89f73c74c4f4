#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace bcvnn {

#ifdef BCVNN_SINGLE_PRECISION
using Scalar = float;
#else
using Scalar = double;
#endif

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense complex tensor stored as two row-major real arrays of identical shape.
class ComplexTensor {
 public:
  ComplexTensor() = default;

  /// Zero-filled tensor. Every extent must be at least one.
  explicit ComplexTensor(Shape shape);
  ComplexTensor(Shape shape, std::vector<Scalar> real, std::vector<Scalar> imag);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return real_.size(); }
  bool empty() const noexcept { return real_.empty(); }

  std::span<const Scalar> real() const noexcept { return real_; }
  std::span<const Scalar> imag() const noexcept { return imag_; }
  std::span<Scalar> real() noexcept { return real_; }
  std::span<Scalar> imag() noexcept { return imag_; }

  /// Same data under a new shape with an equal element count.
  ComplexTensor reshaped(Shape shape) const;

  bool all_finite() const noexcept;

  friend bool operator==(const ComplexTensor&, const ComplexTensor&) = default;

 private:
  Shape shape_;
  std::vector<Scalar> real_;
  std::vector<Scalar> imag_;
};

struct RealTensor {
  Shape shape;
  std::vector<Scalar> data;
};

ComplexTensor czeros(const Shape& shape);
ComplexTensor cmul(const ComplexTensor& a, const ComplexTensor& b);
ComplexTensor cadd(const ComplexTensor& a, const ComplexTensor& b);
ComplexTensor csub(const ComplexTensor& a, const ComplexTensor& b);
ComplexTensor scale(const ComplexTensor& a, Scalar s);
RealTensor magnitude(const ComplexTensor& a);

// Binary container: "BCVT", version u8, rank u8, extents u32 LE, then all real
// then all imag elements as f64 LE.
inline constexpr unsigned char kTensorFormatVersion = 1;

void write_tensor(std::ostream& out, const ComplexTensor& tensor);
ComplexTensor read_tensor(std::istream& in);
void save_tensor(const std::string& path, const ComplexTensor& tensor);
ComplexTensor load_tensor(const std::string& path);

}  // namespace bcvnn
