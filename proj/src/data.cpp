#include "csmri/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "csmri/errors.hpp"
#include "csmri/image_io.hpp"
#include "csmri/rng.hpp"

namespace csmri {
namespace {

struct Ellipse {
  double value;
  double a;  // semi-axis along x
  double b;  // semi-axis along y
  double x0;
  double y0;
  double phi_deg;
};

constexpr std::array<Ellipse, 10> kSheppLogan{{
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
    {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
    {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
    {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
    {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
    {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
    {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
}};

// Pixel-center coordinates in [-1, 1], y pointing up.
double coord_x(int c, int cols) { return (2.0 * c + 1.0) / cols - 1.0; }
double coord_y(int r, int rows) { return 1.0 - (2.0 * r + 1.0) / rows; }

bool inside(const Ellipse& e, double x, double y) {
  const double phi = e.phi_deg * std::numbers::pi / 180.0;
  const double dx = x - e.x0;
  const double dy = y - e.y0;
  const double u = dx * std::cos(phi) + dy * std::sin(phi);
  const double v = -dx * std::sin(phi) + dy * std::cos(phi);
  return (u * u) / (e.a * e.a) + (v * v) / (e.b * e.b) <= 1.0;
}

void clip01(Image& x) {
  for (double& v : x.values()) v = std::clamp(v, 0.0, 1.0);
}

Image random_phantom(int rows, int cols, Rng& rng) {
  Image x = Tensor::image(rows, cols);
  const int count = 3 + static_cast<int>(rng.below(6));
  for (int e = 0; e < count; ++e) {
    Ellipse shape{};
    if (e == 0) {
      shape = {0.0, 0.6 + 0.3 * rng.uniform(), 0.6 + 0.3 * rng.uniform(), 0.1 * (rng.uniform() - 0.5),
               0.1 * (rng.uniform() - 0.5), 180.0 * rng.uniform()};
    } else {
      shape = {0.0, 0.08 + 0.35 * rng.uniform(), 0.08 + 0.35 * rng.uniform(), 1.0 * (rng.uniform() - 0.5),
               1.0 * (rng.uniform() - 0.5), 180.0 * rng.uniform()};
    }
    const double base = 0.15 + 0.8 * rng.uniform();
    const double gx = 0.5 * (rng.uniform() - 0.5);
    const double gy = 0.5 * (rng.uniform() - 0.5);
    for (int r = 0; r < rows; ++r) {
      const double y = coord_y(r, rows);
      for (int c = 0; c < cols; ++c) {
        const double xc = coord_x(c, cols);
        if (inside(shape, xc, y)) x.at(0, r, c) = base + gx * (xc - shape.x0) + gy * (y - shape.y0);
      }
    }
  }
  clip01(x);
  return x;
}

std::array<double, 11> gaussian_window() {
  std::array<double, 11> w{};
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    w[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace

Image shepp_logan(int rows, int cols) {
  Image x = Tensor::image(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const double y = coord_y(r, rows);
    for (int c = 0; c < cols; ++c) {
      const double xc = coord_x(c, cols);
      double v = 0.0;
      for (const Ellipse& e : kSheppLogan) {
        if (inside(e, xc, y)) v += e.value;
      }
      x.at(0, r, c) = v;
    }
  }
  clip01(x);
  return x;
}

Dataset make_phantoms(int count, int rows, int cols, std::uint64_t seed) {
  if (count < 1) throw InvalidArgument("phantom count must be >= 1");
  if (rows < 2 || cols < 2 || rows % 2 || cols % 2) throw InvalidArgument("phantom dimensions must be even");
  Dataset ds;
  ds.source = DataSource::phantom;
  ds.seed = seed;
  ds.images.push_back(shepp_logan(rows, cols));
  for (int i = 1; i < count; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    ds.images.push_back(random_phantom(rows, cols, rng));
  }
  return ds;
}

Dataset load_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw InvalidArgument("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".pgm") files.push_back(entry.path());
  }
  if (files.empty()) throw InvalidArgument("no PNG/PGM images in " + dir.string());
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  Dataset ds;
  ds.source = DataSource::files;
  for (const auto& f : files) {
    Image x = load_image(f);
    if (!ds.images.empty() && !x.same_shape(ds.images.front())) {
      throw ShapeMismatch("image " + f.filename().string() + " has shape " + shape_string(x.shape()) +
                          ", expected " + shape_string(ds.images.front().shape()));
    }
    ds.images.push_back(std::move(x));
  }
  return ds;
}

ComplexField add_gaussian_noise(const ComplexField& y, const SamplingMask& mask, double std_dev,
                                std::uint64_t seed) {
  if (std_dev < 0.0) throw InvalidArgument("noise standard deviation must be >= 0");
  if (y.rows() != mask.rows || y.cols() != mask.cols) throw ShapeMismatch("noise: field/mask shape mismatch");
  ComplexField out = y;
  if (std_dev == 0.0) return out;
  Rng rng(seed);
  const double s = std_dev / std::numbers::sqrt2;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!mask.pattern[i]) continue;
    const double re = rng.normal();
    const double im = rng.normal();
    out[i] += Complex(s * re, s * im);
  }
  return out;
}

double psnr(const Image& x, const Image& ref, double peak) {
  require_same_shape(x, ref, "psnr");
  if (!(peak > 0.0)) throw InvalidArgument("psnr peak must be positive");
  double se = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - ref[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(x.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const Image& x, const Image& ref) {
  require_same_shape(x, ref, "ssim");
  const int rows = x.rows();
  const int cols = x.cols();
  if (rows < 11 || cols < 11) throw InvalidArgument("ssim needs images of at least 11x11");
  if (x == ref) return 1.0;
  const auto w = gaussian_window();
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  double total = 0.0;
  for (int r = 0; r + 11 <= rows; ++r) {
    for (int c = 0; c + 11 <= cols; ++c) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < 11; ++i) {
        for (int j = 0; j < 11; ++j) {
          const double wij = w[i] * w[j];
          const double a = x.at(0, r + i, c + j);
          const double b = ref.at(0, r + i, c + j);
          mx += wij * a;
          my += wij * b;
          sxx += wij * a * a;
          syy += wij * b * b;
          sxy += wij * a * b;
        }
      }
      const double vx = sxx - mx * mx;
      const double vy = syy - my * my;
      const double cov = sxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  }
  return total / (static_cast<double>(rows - 10) * (cols - 10));
}

MetricRecord evaluate(const Image& x, const Image& ref) { return {psnr(x, ref), ssim(x, ref)}; }

}  // namespace csmri
