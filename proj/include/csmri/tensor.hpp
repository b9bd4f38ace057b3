#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace csmri {

using Complex = std::complex<double>;

// Dense row-major real array. Feature maps are rank 3 (channels, rows, cols);
// an Image is a rank-3 tensor with one channel. Weights use (out, in, kh, kw),
// biases (out), fully connected weights (out, in).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);

  static Tensor image(int rows, int cols, double fill = 0.0) {
    return Tensor({1, rows, cols}, fill);
  }
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Feature-map view; valid for rank-3 tensors.
  int channels() const { return shape_[0]; }
  int rows() const { return shape_[1]; }
  int cols() const { return shape_[2]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(int c, int r, int col) {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + r) * shape_[2] + col];
  }
  double at(int c, int r, int col) const {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + r) * shape_[2] + col];
  }

  std::span<double> channel(int c) {
    const std::size_t plane = static_cast<std::size_t>(shape_[1]) * shape_[2];
    return {data_.data() + c * plane, plane};
  }
  std::span<const double> channel(int c) const {
    const std::size_t plane = static_cast<std::size_t>(shape_[1]) * shape_[2];
    return {data_.data() + c * plane, plane};
  }

  void fill(double v);
  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double s);

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

using Image = Tensor;

// Complex rows x cols array, row-major.
class ComplexField {
 public:
  ComplexField() = default;
  ComplexField(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  Complex* data() { return data_.data(); }
  const Complex* data() const { return data_.data(); }
  std::span<Complex> values() { return data_; }
  std::span<const Complex> values() const { return data_; }

  Complex& operator[](std::size_t i) { return data_[i]; }
  const Complex& operator[](std::size_t i) const { return data_[i]; }
  Complex& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const Complex& at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  bool same_shape(const ComplexField& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  friend bool operator==(const ComplexField& a, const ComplexField& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Complex> data_;
};

// Real image -> complex field with zero imaginary part.
ComplexField to_complex(const Image& x);
Image real_part(const ComplexField& z);
Image magnitude(const ComplexField& z);

// Two-channel (real, imag) view used when complex data enters convolutions.
Tensor to_channels(const ComplexField& z);
ComplexField from_channels(const Tensor& t);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
// <a, b> = sum conj(a) b.
Complex inner(const ComplexField& a, const ComplexField& b);
double norm2(const ComplexField& a);

std::string shape_string(const std::vector<int>& shape);
void require_same_shape(const Tensor& a, const Tensor& b, const char* where);

}  // namespace csmri
