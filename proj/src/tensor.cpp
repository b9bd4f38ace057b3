#include "csmri/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "csmri/errors.hpp"

namespace csmri {

Tensor::Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
  std::size_t n = 1;
  for (int d : shape_) {
    if (d < 0) throw InvalidArgument("negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  data_.assign(n, fill);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_shape(*this, other, "Tensor::operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

ComplexField to_complex(const Image& x) {
  ComplexField z(x.rows(), x.cols());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = Complex(x[i], 0.0);
  return z;
}

Image real_part(const ComplexField& z) {
  Image x = Tensor::image(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.size(); ++i) x[i] = z[i].real();
  return x;
}

Image magnitude(const ComplexField& z) {
  Image x = Tensor::image(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.size(); ++i) x[i] = std::abs(z[i]);
  return x;
}

Tensor to_channels(const ComplexField& z) {
  Tensor t({2, z.rows(), z.cols()});
  const std::size_t plane = z.size();
  for (std::size_t i = 0; i < plane; ++i) {
    t[i] = z[i].real();
    t[plane + i] = z[i].imag();
  }
  return t;
}

ComplexField from_channels(const Tensor& t) {
  if (t.rank() != 3 || t.channels() != 2) {
    throw ShapeMismatch("from_channels: expected (2, rows, cols), got " + shape_string(t.shape()));
  }
  ComplexField z(t.rows(), t.cols());
  const std::size_t plane = z.size();
  for (std::size_t i = 0; i < plane; ++i) z[i] = Complex(t[i], t[plane + i]);
  return z;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Complex inner(const ComplexField& a, const ComplexField& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("inner: field shapes differ");
  Complex s{};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

double norm2(const ComplexField& a) {
  double s = 0.0;
  for (const Complex& v : a.values()) s += std::norm(v);
  return std::sqrt(s);
}

std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ')';
  return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
  if (!a.same_shape(b)) {
    throw ShapeMismatch(std::string(where) + ": shape " + shape_string(a.shape()) + " vs " +
                        shape_string(b.shape()));
  }
}

}  // namespace csmri
