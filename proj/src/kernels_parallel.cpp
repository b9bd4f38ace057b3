#include <algorithm>

#include "csmri/kernels.hpp"

namespace csmri::kernels::parallel {
namespace {

// Output index range [lo, hi) whose tap `kk` lands inside [0, extent).
struct Range {
  int lo;
  int hi;
};

Range valid_outputs(int kk, ConvGeometry g, int extent, int out_extent) {
  const int shift = g.pad - kk;  // input = o * stride - shift
  int lo = shift <= 0 ? 0 : (shift + g.stride - 1) / g.stride;
  const int top = extent - 1 + shift;
  int hi = top < 0 ? 0 : top / g.stride + 1;
  hi = std::min(hi, out_extent);
  lo = std::min(lo, hi);
  return {lo, hi};
}

}  // namespace

void conv2d_forward(std::span<const double> x, Dims xd, std::span<const double> w,
                    std::span<const double> b, ConvGeometry g, std::span<double> y, Dims yd) {
  const int k = g.kernel;
  const int s = g.stride;
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < yd.channels; ++oc) {
    double* out = y.data() + static_cast<std::ptrdiff_t>(oc) * yd.plane();
    std::fill(out, out + yd.plane(), b.empty() ? 0.0 : b[oc]);
    for (int ic = 0; ic < xd.channels; ++ic) {
      const double* in = x.data() + static_cast<std::ptrdiff_t>(ic) * xd.plane();
      for (int ky = 0; ky < k; ++ky) {
        const Range ry = valid_outputs(ky, g, xd.rows, yd.rows);
        for (int kx = 0; kx < k; ++kx) {
          const Range rx = valid_outputs(kx, g, xd.cols, yd.cols);
          const double wv = w[((oc * xd.channels + ic) * k + ky) * k + kx];
          for (int oy = ry.lo; oy < ry.hi; ++oy) {
            const double* in_row = in + (oy * s + ky - g.pad) * xd.cols;
            double* out_row = out + oy * yd.cols;
            const int off = kx - g.pad;
            if (s == 1) {
              for (int ox = rx.lo; ox < rx.hi; ++ox) out_row[ox] += wv * in_row[ox + off];
            } else {
              for (int ox = rx.lo; ox < rx.hi; ++ox) out_row[ox] += wv * in_row[ox * s + off];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_input(std::span<const double> dy, Dims yd, std::span<const double> w,
                           ConvGeometry g, std::span<double> dx, Dims xd) {
  const int k = g.kernel;
  const int s = g.stride;
#pragma omp parallel for schedule(static)
  for (int ic = 0; ic < xd.channels; ++ic) {
    double* out = dx.data() + static_cast<std::ptrdiff_t>(ic) * xd.plane();
    std::fill(out, out + xd.plane(), 0.0);
    for (int oc = 0; oc < yd.channels; ++oc) {
      const double* grad = dy.data() + static_cast<std::ptrdiff_t>(oc) * yd.plane();
      for (int ky = 0; ky < k; ++ky) {
        const Range ry = valid_outputs(ky, g, xd.rows, yd.rows);
        for (int kx = 0; kx < k; ++kx) {
          const Range rx = valid_outputs(kx, g, xd.cols, yd.cols);
          const double wv = w[((oc * xd.channels + ic) * k + ky) * k + kx];
          for (int oy = ry.lo; oy < ry.hi; ++oy) {
            double* out_row = out + (oy * s + ky - g.pad) * xd.cols;
            const double* grad_row = grad + oy * yd.cols;
            const int off = kx - g.pad;
            if (s == 1) {
              for (int ox = rx.lo; ox < rx.hi; ++ox) out_row[ox + off] += wv * grad_row[ox];
            } else {
              for (int ox = rx.lo; ox < rx.hi; ++ox) out_row[ox * s + off] += wv * grad_row[ox];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_weight(std::span<const double> x, Dims xd, std::span<const double> dy, Dims yd,
                            ConvGeometry g, std::span<double> dw, std::span<double> db) {
  const int k = g.kernel;
  const int s = g.stride;
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < yd.channels; ++oc) {
    const double* grad = dy.data() + static_cast<std::ptrdiff_t>(oc) * yd.plane();
    if (!db.empty()) {
      double acc = 0.0;
      for (int i = 0; i < yd.plane(); ++i) acc += grad[i];
      db[oc] += acc;
    }
    for (int ic = 0; ic < xd.channels; ++ic) {
      const double* in = x.data() + static_cast<std::ptrdiff_t>(ic) * xd.plane();
      for (int ky = 0; ky < k; ++ky) {
        const Range ry = valid_outputs(ky, g, xd.rows, yd.rows);
        for (int kx = 0; kx < k; ++kx) {
          const Range rx = valid_outputs(kx, g, xd.cols, yd.cols);
          double acc = 0.0;
          for (int oy = ry.lo; oy < ry.hi; ++oy) {
            const double* in_row = in + (oy * s + ky - g.pad) * xd.cols;
            const double* grad_row = grad + oy * yd.cols;
            const int off = kx - g.pad;
            for (int ox = rx.lo; ox < rx.hi; ++ox) acc += grad_row[ox] * in_row[ox * s + off];
          }
          dw[((oc * xd.channels + ic) * k + ky) * k + kx] += acc;
        }
      }
    }
  }
}

}  // namespace csmri::kernels::parallel
