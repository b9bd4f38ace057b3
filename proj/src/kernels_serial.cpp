#include "csmri/kernels.hpp"

#include "csmri/errors.hpp"

namespace csmri::kernels {

Dims conv_output_dims(Dims in, int out_channels, ConvGeometry g) {
  const int rows = (in.rows + 2 * g.pad - g.kernel) / g.stride + 1;
  const int cols = (in.cols + 2 * g.pad - g.kernel) / g.stride + 1;
  if (rows <= 0 || cols <= 0) throw ShapeMismatch("convolution input smaller than kernel");
  return {out_channels, rows, cols};
}

namespace serial {

void conv2d_forward(std::span<const double> x, Dims xd, std::span<const double> w,
                    std::span<const double> b, ConvGeometry g, std::span<double> y, Dims yd) {
  const int k = g.kernel;
  for (int oc = 0; oc < yd.channels; ++oc) {
    for (int oy = 0; oy < yd.rows; ++oy) {
      for (int ox = 0; ox < yd.cols; ++ox) {
        double acc = b.empty() ? 0.0 : b[oc];
        for (int ic = 0; ic < xd.channels; ++ic) {
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * g.stride + ky - g.pad;
            if (iy < 0 || iy >= xd.rows) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * g.stride + kx - g.pad;
              if (ix < 0 || ix >= xd.cols) continue;
              acc += w[((oc * xd.channels + ic) * k + ky) * k + kx] * x[(ic * xd.rows + iy) * xd.cols + ix];
            }
          }
        }
        y[(oc * yd.rows + oy) * yd.cols + ox] = acc;
      }
    }
  }
}

void conv2d_backward_input(std::span<const double> dy, Dims yd, std::span<const double> w,
                           ConvGeometry g, std::span<double> dx, Dims xd) {
  const int k = g.kernel;
  for (int ic = 0; ic < xd.channels; ++ic) {
    for (int iy = 0; iy < xd.rows; ++iy) {
      for (int ix = 0; ix < xd.cols; ++ix) {
        double acc = 0.0;
        for (int oc = 0; oc < yd.channels; ++oc) {
          for (int ky = 0; ky < k; ++ky) {
            const int ty = iy + g.pad - ky;
            if (ty < 0 || ty % g.stride != 0 || ty / g.stride >= yd.rows) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int tx = ix + g.pad - kx;
              if (tx < 0 || tx % g.stride != 0 || tx / g.stride >= yd.cols) continue;
              acc += w[((oc * xd.channels + ic) * k + ky) * k + kx] *
                     dy[(oc * yd.rows + ty / g.stride) * yd.cols + tx / g.stride];
            }
          }
        }
        dx[(ic * xd.rows + iy) * xd.cols + ix] = acc;
      }
    }
  }
}

void conv2d_backward_weight(std::span<const double> x, Dims xd, std::span<const double> dy, Dims yd,
                            ConvGeometry g, std::span<double> dw, std::span<double> db) {
  const int k = g.kernel;
  for (int oc = 0; oc < yd.channels; ++oc) {
    if (!db.empty()) {
      double acc = 0.0;
      for (int i = 0; i < yd.plane(); ++i) acc += dy[oc * yd.plane() + i];
      db[oc] += acc;
    }
    for (int ic = 0; ic < xd.channels; ++ic) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          double acc = 0.0;
          for (int oy = 0; oy < yd.rows; ++oy) {
            const int iy = oy * g.stride + ky - g.pad;
            if (iy < 0 || iy >= xd.rows) continue;
            for (int ox = 0; ox < yd.cols; ++ox) {
              const int ix = ox * g.stride + kx - g.pad;
              if (ix < 0 || ix >= xd.cols) continue;
              acc += dy[(oc * yd.rows + oy) * yd.cols + ox] * x[(ic * xd.rows + iy) * xd.cols + ix];
            }
          }
          dw[((oc * xd.channels + ic) * k + ky) * k + kx] += acc;
        }
      }
    }
  }
}

}  // namespace serial
}  // namespace csmri::kernels
