#include "plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>

#include "csmri/errors.hpp"
#include "csmri/image_io.hpp"

namespace csmri::plot {
namespace {

struct Rgb {
  std::uint8_t r, g, b;
};

constexpr Rgb kWhite{255, 255, 255};
constexpr Rgb kBlack{0, 0, 0};
constexpr Rgb kGrid{225, 225, 225};
constexpr std::array<Rgb, 6> kPalette{{{31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {255, 127, 14},
                                       {148, 103, 189}, {140, 86, 75}}};

// 5x7 glyphs, one row per byte, bit 4 is the leftmost column.
const std::map<char, std::array<std::uint8_t, 7>>& font() {
  static const std::map<char, std::array<std::uint8_t, 7>> glyphs{
      {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
      {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
      {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
      {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
      {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
      {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
      {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
      {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
      {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
      {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}}, {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
      {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}}, {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
      {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}}, {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
      {'/', {0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00}}, {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
      {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
  };
  return glyphs;
}

class Canvas {
 public:
  Canvas(int width, int height) : width_(width), height_(height), pixels_(3u * width * height, 255) {}

  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
    const std::size_t i = 3u * (static_cast<std::size_t>(y) * width_ + x);
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
  }

  void fill_rect(int x0, int y0, int w, int h, Rgb c) {
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) set(x, y, c);
  }

  void frame(int x0, int y0, int w, int h, int thickness, Rgb c) {
    fill_rect(x0, y0, w, thickness, c);
    fill_rect(x0, y0 + h - thickness, w, thickness, c);
    fill_rect(x0, y0, thickness, h, c);
    fill_rect(x0 + w - thickness, y0, thickness, h, c);
  }

  // Bresenham with a square pen.
  void line(int x0, int y0, int x1, int y1, int pen, Rgb c) {
    const int dx = std::abs(x1 - x0);
    const int dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1;
    const int sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      fill_rect(x0 - pen / 2, y0 - pen / 2, pen, pen, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  static int text_width(const std::string& s, int scale) { return static_cast<int>(s.size()) * 6 * scale; }

  void text(int x, int y, const std::string& s, int scale, Rgb c) {
    for (char ch : s) {
      const char key = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      const auto it = font().find(key);
      if (it != font().end()) {
        for (int row = 0; row < 7; ++row) {
          for (int col = 0; col < 5; ++col) {
            if (it->second[static_cast<std::size_t>(row)] & (0x10 >> col)) fill_rect(x + col * scale, y + row * scale, scale, scale, c);
          }
        }
      }
      x += 6 * scale;
    }
  }

  void save(const std::filesystem::path& path) const { write_png_rgb(path, height_, width_, pixels_); }

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> pixels_;
};

std::string format_tick(double v, double step) {
  char buf[32];
  const int decimals = step >= 1.0 ? 0 : std::min(4, static_cast<int>(std::ceil(-std::log10(step))));
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

double nice_step(double span, int target_ticks) {
  const double raw = span / target_ticks;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

void line_plot(const std::filesystem::path& path, const std::vector<Series>& series, const std::string& title,
               const std::string& x_label, const std::string& y_label) {
  if (series.empty()) throw InvalidArgument("line_plot: no series");
  double x_min = INFINITY, x_max = -INFINITY, y_min = INFINITY, y_max = -INFINITY;
  for (const Series& s : series) {
    if (s.x.size() != s.y.size() || s.x.empty()) throw InvalidArgument("line_plot: series '" + s.label + "' is malformed");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) throw InvalidArgument("line_plot: non-finite point");
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      y_min = std::min(y_min, s.y[i]);
      y_max = std::max(y_max, s.y[i]);
    }
  }
  if (x_max - x_min < 1e-9) {
    x_min -= 0.05;
    x_max += 0.05;
  }
  if (y_max - y_min < 1e-9) {
    y_min -= 1.0;
    y_max += 1.0;
  }
  const double y_step = nice_step(y_max - y_min, 5);
  y_min = std::floor(y_min / y_step) * y_step;
  y_max = std::ceil(y_max / y_step) * y_step;
  const double x_pad = 0.05 * (x_max - x_min);
  x_min -= x_pad;
  x_max += x_pad;

  const int width = 720, height = 440;
  const int left = 80, right = 200, top = 50, bottom = 70;
  const int pw = width - left - right;
  const int ph = height - top - bottom;
  Canvas canvas(width, height);
  auto px = [&](double x) { return left + static_cast<int>(std::lround((x - x_min) / (x_max - x_min) * pw)); };
  auto py = [&](double y) { return top + ph - static_cast<int>(std::lround((y - y_min) / (y_max - y_min) * ph)); };

  for (double y = y_min; y <= y_max + 1e-9 * y_step; y += y_step) {
    canvas.line(left, py(y), left + pw, py(y), 1, kGrid);
    const std::string label = format_tick(y, y_step);
    canvas.text(left - 8 - Canvas::text_width(label, 1), py(y) - 3, label, 1, kBlack);
  }
  std::vector<double> xs;
  for (const Series& s : series) xs.insert(xs.end(), s.x.begin(), s.x.end());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }), xs.end());
  for (double x : xs) {
    canvas.line(px(x), top, px(x), top + ph, 1, kGrid);
    const std::string label = format_tick(x, 0.01);
    canvas.text(px(x) - Canvas::text_width(label, 1) / 2, top + ph + 8, label, 1, kBlack);
  }
  canvas.line(left, top + ph, left + pw, top + ph, 2, kBlack);
  canvas.line(left, top, left, top + ph, 2, kBlack);

  canvas.text(left + (pw - Canvas::text_width(title, 2)) / 2, 14, title, 2, kBlack);
  canvas.text(left + (pw - Canvas::text_width(x_label, 1)) / 2, top + ph + 30, x_label, 1, kBlack);
  canvas.text(8, top - 18, y_label, 1, kBlack);

  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const Rgb color = kPalette[k % kPalette.size()];
    std::vector<std::size_t> order(s.x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.x[a] < s.x[b]; });
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      canvas.line(px(s.x[order[i]]), py(s.y[order[i]]), px(s.x[order[i + 1]]), py(s.y[order[i + 1]]), 2, color);
    }
    for (std::size_t i : order) canvas.fill_rect(px(s.x[i]) - 3, py(s.y[i]) - 3, 7, 7, color);

    const int ly = top + 10 + static_cast<int>(k) * 20;
    canvas.fill_rect(left + pw + 20, ly, 20, 4, color);
    canvas.text(left + pw + 46, ly - 2, s.label, 1, kBlack);
  }
  canvas.save(path);
}

void trace_grid(const std::filesystem::path& path, const std::vector<Image>& stages, int mid_stage,
                const Image* reference) {
  if (stages.empty()) throw InvalidArgument("trace_grid: no stages");
  const int rows = stages.front().rows();
  const int cols = stages.front().cols();
  const int pad = 6;
  const int tiles = static_cast<int>(stages.size()) + (reference ? 1 : 0);
  const int label_h = 14;
  Canvas canvas(pad + tiles * (cols + pad), pad + rows + pad + label_h);

  auto draw = [&](const Image& img, int tile, Rgb border, const std::string& label) {
    if (img.rows() != rows || img.cols() != cols) throw ShapeMismatch("trace_grid: stage shapes differ");
    const int x0 = pad + tile * (cols + pad);
    const Gray8 g = to_gray8(img);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const std::uint8_t v = g.pixels[static_cast<std::size_t>(r) * cols + c];
        canvas.set(x0 + c, pad + r, {v, v, v});
      }
    }
    canvas.frame(x0 - 3, pad - 3, cols + 6, rows + 6, 3, border);
    canvas.text(x0, pad + rows + 6, label, 1, kBlack);
  };

  const int last = static_cast<int>(stages.size());
  for (int s = 1; s <= last; ++s) {
    const Rgb border = s == last ? Rgb{214, 39, 40} : (s == mid_stage ? Rgb{31, 119, 180} : kWhite);
    draw(stages[static_cast<std::size_t>(s - 1)], s - 1, border, std::to_string(s));
  }
  if (reference) draw(*reference, last, Rgb{44, 160, 44}, "GT");
  canvas.save(path);
}

}  // namespace csmri::plot
