#include "csmri/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "csmri/errors.hpp"

namespace csmri {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return f;
}

void write_png(const std::filesystem::path& path, int rows, int cols, int color_type, int channels,
               std::span<const std::uint8_t> data) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng: out of memory");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng: failed writing " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(cols), static_cast<png_uint_32>(rows), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < rows; ++r) {
    png_write_row(png, const_cast<png_bytep>(data.data() + static_cast<std::size_t>(r) * cols * channels));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Gray8 read_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng: out of memory");
  }
  Gray8 out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng: failed reading " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  out.rows = static_cast<int>(png_get_image_height(png, info));
  out.cols = static_cast<int>(png_get_image_width(png, info));
  if (png_get_rowbytes(png, info) != static_cast<std::size_t>(out.cols)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("unsupported PNG layout in " + path.string());
  }
  out.pixels.resize(static_cast<std::size_t>(out.rows) * out.cols);
  for (int r = 0; r < out.rows; ++r) png_read_row(png, out.pixels.data() + static_cast<std::size_t>(r) * out.cols, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

Gray8 read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic;
  in >> magic;
  auto next_int = [&]() {
    int v = 0;
    while (in >> std::ws && in.peek() == '#') in.ignore(1 << 20, '\n');
    if (!(in >> v)) throw std::runtime_error("malformed PGM header in " + path.string());
    return v;
  };
  if (magic != "P5") throw std::runtime_error("only binary PGM (P5) is supported: " + path.string());
  Gray8 out;
  out.cols = next_int();
  out.rows = next_int();
  const int maxval = next_int();
  if (maxval != 255) throw std::runtime_error("PGM maxval must be 255: " + path.string());
  in.get();
  out.pixels.resize(static_cast<std::size_t>(out.rows) * out.cols);
  in.read(reinterpret_cast<char*>(out.pixels.data()), static_cast<std::streamsize>(out.pixels.size()));
  if (!in) throw std::runtime_error("truncated PGM " + path.string());
  return out;
}

}  // namespace

void write_png_gray(const std::filesystem::path& path, const Gray8& image) {
  write_png(path, image.rows, image.cols, PNG_COLOR_TYPE_GRAY, 1, image.pixels);
}

void write_png_rgb(const std::filesystem::path& path, int rows, int cols, std::span<const std::uint8_t> rgb) {
  write_png(path, rows, cols, PNG_COLOR_TYPE_RGB, 3, rgb);
}

Gray8 read_gray(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".pgm") return read_pgm(path);
  return read_png(path);
}

Gray8 to_gray8(const Image& x) {
  Gray8 g{x.rows(), x.cols(), {}};
  g.pixels.resize(static_cast<std::size_t>(g.rows) * g.cols);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) {
    const double v = std::isfinite(x[i]) ? std::clamp(x[i], 0.0, 1.0) : 0.0;
    g.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return g;
}

void save_image(const std::filesystem::path& path, const Image& x) { write_png_gray(path, to_gray8(x)); }

Image load_image(const std::filesystem::path& path) {
  const Gray8 g = read_gray(path);
  Image x = Tensor::image(g.rows, g.cols);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) x[i] = g.pixels[i] / 255.0;
  return x;
}

}  // namespace csmri
