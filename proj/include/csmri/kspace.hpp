#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "csmri/tensor.hpp"

namespace csmri {

enum class MaskFamily { cartesian, pseudo_radial, random2d };

std::string to_string(MaskFamily family);
MaskFamily parse_mask_family(std::string_view name);

// Boolean k-space sampling pattern in centered layout: the zero frequency is
// at (rows/2, cols/2). pattern[r * cols + c] == 1 marks a sampled location.
struct SamplingMask {
  int rows = 0;
  int cols = 0;
  double alpha = 1.0;
  MaskFamily family = MaskFamily::cartesian;
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> pattern;

  bool sampled(int r, int c) const { return pattern[static_cast<std::size_t>(r) * cols + c] != 0; }
  std::size_t count() const;
  // round(alpha * rows * cols)
  std::size_t target_count() const;
  double achieved_ratio() const { return static_cast<double>(count()) / pattern.size(); }
};

// Requires even rows, cols >= 8 and 0 < alpha <= 1. Deterministic in all
// arguments; the center location is always sampled.
//   cartesian      variable-density full rows, central 4% always kept
//   pseudo_radial  golden-angle lines through the center
//   random2d       Bernoulli pattern corrected to the exact target count
SamplingMask make_mask(int rows, int cols, double alpha, MaskFamily family, std::uint64_t seed);

// Mask file pair: 8-bit grayscale PNG (0 / 255) and a JSON manifest
// {family, alpha, seed, m, n}. `stem` is the path without extension.
void save_mask(const SamplingMask& mask, const std::filesystem::path& stem);
SamplingMask load_mask(const std::filesystem::path& stem);

// Under-sampled Fourier operator T = P F with unitary centered F. Fields live on
// the full grid with exact zeros off the mask.
class MeasurementOp {
 public:
  explicit MeasurementOp(SamplingMask mask);
  explicit MeasurementOp(std::shared_ptr<const SamplingMask> mask);

  int rows() const { return mask_->rows; }
  int cols() const { return mask_->cols; }
  const SamplingMask& mask() const { return *mask_; }
  const std::shared_ptr<const SamplingMask>& mask_ptr() const { return mask_; }

  ComplexField forward(const Image& x) const;
  ComplexField forward(const ComplexField& x) const;
  // F^H (P y)
  ComplexField adjoint(const ComplexField& y) const;
  // T^H T x
  ComplexField normal(const ComplexField& x) const;
  // Zeroes entries off the mask, in place.
  void project(ComplexField& y) const;

 private:
  void check(int rows, int cols, const char* where) const;
  std::shared_ptr<const SamplingMask> mask_;
};

// |T^H y| as a real image.
Image zero_fill(const MeasurementOp& op, const ComplexField& y);

}  // namespace csmri
