#pragma once

#include "csmri/tensor.hpp"

namespace csmri {

// Unitary 2D DFT with the zero frequency at index (rows/2, cols/2):
// fftshift(fft2(ifftshift(x))) / sqrt(rows*cols). In place.
void fft2c(ComplexField& z);
// Inverse of fft2c (and its adjoint).
void ifft2c(ComplexField& z);

ComplexField fft2c(const ComplexField& z);
ComplexField ifft2c(const ComplexField& z);

}  // namespace csmri
