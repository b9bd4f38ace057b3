#pragma once

#include <span>

namespace csmri::kernels {

struct Dims {
  int channels;
  int rows;
  int cols;
  int plane() const { return rows * cols; }
  int size() const { return channels * rows * cols; }
};

// Square kernel, equal stride and zero padding in both directions.
struct ConvGeometry {
  int kernel;
  int stride;
  int pad;
};

Dims conv_output_dims(Dims in, int out_channels, ConvGeometry g);

// Both namespaces implement the same three primitives of a 2D cross-correlation
// layer y = W * x + b with W laid out (out, in, k, k):
//   conv2d_forward          y  = W * x + b            (overwrites y)
//   conv2d_backward_input   dx = W^T * dy             (overwrites dx)
//   conv2d_backward_weight  dW += dy (*) x, db += sum dy  (accumulates; db may be empty)
// A transposed convolution is conv2d_backward_input in the forward direction.
//
// `serial` is the direct textbook formulation, one output element at a time;
// it is the reference the parallel kernels are tested against.
// `parallel` partitions over the channel that owns each write, so results are
// bit-identical for any thread count.

namespace serial {
void conv2d_forward(std::span<const double> x, Dims xd, std::span<const double> w,
                    std::span<const double> b, ConvGeometry g, std::span<double> y, Dims yd);
void conv2d_backward_input(std::span<const double> dy, Dims yd, std::span<const double> w,
                           ConvGeometry g, std::span<double> dx, Dims xd);
void conv2d_backward_weight(std::span<const double> x, Dims xd, std::span<const double> dy, Dims yd,
                            ConvGeometry g, std::span<double> dw, std::span<double> db);
}  // namespace serial

namespace parallel {
void conv2d_forward(std::span<const double> x, Dims xd, std::span<const double> w,
                    std::span<const double> b, ConvGeometry g, std::span<double> y, Dims yd);
void conv2d_backward_input(std::span<const double> dy, Dims yd, std::span<const double> w,
                           ConvGeometry g, std::span<double> dx, Dims xd);
void conv2d_backward_weight(std::span<const double> x, Dims xd, std::span<const double> dy, Dims yd,
                            ConvGeometry g, std::span<double> dw, std::span<double> db);
}  // namespace parallel

}  // namespace csmri::kernels
