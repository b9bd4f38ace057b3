#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "csmri/tensor.hpp"

namespace csmri {

struct Gray8 {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> pixels;
};

void write_png_gray(const std::filesystem::path& path, const Gray8& image);
void write_png_rgb(const std::filesystem::path& path, int rows, int cols, std::span<const std::uint8_t> rgb);
// PNG (any bit depth / color type, reduced to 8-bit gray) or binary PGM (P5).
Gray8 read_gray(const std::filesystem::path& path);

// [0, 1] image <-> 8-bit gray; values are clamped and rounded on write.
void save_image(const std::filesystem::path& path, const Image& x);
Image load_image(const std::filesystem::path& path);

Gray8 to_gray8(const Image& x);

}  // namespace csmri
