#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "csmri/kspace.hpp"
#include "csmri/tensor.hpp"

namespace csmri {

enum class DataSource { phantom, files };

// Equal-shape images with finite values in [0, 1].
struct Dataset {
  std::vector<Image> images;
  DataSource source = DataSource::phantom;
  std::uint64_t seed = 0;

  std::size_t size() const { return images.size(); }
  int rows() const { return images.empty() ? 0 : images.front().rows(); }
  int cols() const { return images.empty() ? 0 : images.front().cols(); }
};

// Modified (higher-contrast) Shepp-Logan head phantom, values in [0, 1].
Image shepp_logan(int rows, int cols);

// Image 0 is the Shepp-Logan phantom; the rest are seeded random ellipse
// compositions with linear intensity ramps, clipped to [0, 1].
Dataset make_phantoms(int count, int rows, int cols, std::uint64_t seed);

// 8-bit grayscale PNG/PGM files of one shape, lexicographic filename order,
// scaled by 1/255.
Dataset load_images(const std::filesystem::path& dir);

// Complex Gaussian noise (real and imaginary parts each std/sqrt(2)) added to
// the sampled entries of y only.
ComplexField add_gaussian_noise(const ComplexField& y, const SamplingMask& mask, double std_dev,
                                std::uint64_t seed);

// Returned for any PSNR at or above this value, including exact equality.
inline constexpr double kPsnrCap = 99.99;

struct MetricRecord {
  double psnr = 0.0;
  double ssim = 0.0;
};

double psnr(const Image& x, const Image& ref, double peak = 1.0);
// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), c1 = (0.01)^2,
// c2 = (0.03)^2 for unit peak, averaged over valid window positions.
double ssim(const Image& x, const Image& ref);
MetricRecord evaluate(const Image& x, const Image& ref);

}  // namespace csmri
