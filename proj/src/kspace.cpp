#include "csmri/kspace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "csmri/errors.hpp"
#include "csmri/fft.hpp"
#include "csmri/image_io.hpp"
#include "csmri/rng.hpp"

namespace csmri {
namespace {

std::size_t index_of(int r, int c, int cols) { return static_cast<std::size_t>(r) * cols + c; }

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

void fill_cartesian(SamplingMask& mask, Rng& rng) {
  const int rows = mask.rows;
  const int center = rows / 2;
  const int target_rows = std::clamp(static_cast<int>(std::lround(mask.alpha * rows)), 1, rows);
  const int band = std::min(target_rows, std::max(1, static_cast<int>(std::lround(0.04 * rows))));

  std::vector<std::uint8_t> row_on(rows, 0);
  for (int r = center - band / 2; r < center - band / 2 + band; ++r) row_on[r] = 1;

  // Remaining rows without replacement, weight exp(-(d / sigma)^2).
  const double sigma = rows / 6.0;
  std::vector<int> pool;
  std::vector<double> weight;
  for (int r = 0; r < rows; ++r) {
    if (row_on[r]) continue;
    const double d = (r - center) / sigma;
    pool.push_back(r);
    weight.push_back(std::exp(-d * d));
  }
  for (int picked = band; picked < target_rows; ++picked) {
    const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
    double u = rng.uniform() * total;
    std::size_t j = 0;
    while (j + 1 < pool.size() && u >= weight[j]) u -= weight[j++];
    row_on[pool[j]] = 1;
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
    weight.erase(weight.begin() + static_cast<std::ptrdiff_t>(j));
  }
  for (int r = 0; r < rows; ++r) {
    if (!row_on[r]) continue;
    std::fill_n(mask.pattern.begin() + static_cast<std::ptrdiff_t>(index_of(r, 0, mask.cols)), mask.cols, 1);
  }
}

// Marks one rasterized line through the center; returns the newly set indices.
std::vector<std::size_t> rasterize_line(SamplingMask& mask, double theta) {
  const int rows = mask.rows;
  const int cols = mask.cols;
  const double cy = rows / 2;
  const double cx = cols / 2;
  const double dy = std::sin(theta);
  const double dx = std::cos(theta);
  std::vector<std::size_t> added;
  auto mark = [&](int r, int c) {
    if (r < 0 || r >= rows || c < 0 || c >= cols) return;
    const std::size_t i = index_of(r, c, cols);
    if (!mask.pattern[i]) {
      mask.pattern[i] = 1;
      added.push_back(i);
    }
  };
  if (std::abs(dx) >= std::abs(dy)) {
    for (int c = 0; c < cols; ++c) mark(static_cast<int>(std::lround(cy + (c - cx) * dy / dx)), c);
  } else {
    for (int r = 0; r < rows; ++r) mark(r, static_cast<int>(std::lround(cx + (r - cy) * dx / dy)));
  }
  return added;
}

void fill_pseudo_radial(SamplingMask& mask, Rng& rng) {
  const std::size_t target = mask.target_count();
  const double golden = std::numbers::pi * (std::sqrt(5.0) - 1.0) / 2.0;  // ~111.246 deg
  const double start = rng.uniform() * std::numbers::pi;
  std::size_t count = 0;
  const int max_lines = 64 * (mask.rows + mask.cols) * (mask.rows + mask.cols);
  for (int line = 0; line < max_lines && count < target; ++line) {
    const auto added = rasterize_line(mask, start + line * golden);
    const std::size_t before = count;
    count += added.size();
    if (count >= target && count - target > target - before) {
      for (std::size_t i : added) mask.pattern[i] = 0;
      count = before;
      break;
    }
  }
}

void fill_random2d(SamplingMask& mask, Rng& rng) {
  const int rows = mask.rows;
  const int cols = mask.cols;
  const int bh = std::max(1, static_cast<int>(std::lround(0.02 * rows)));
  const int bw = std::max(1, static_cast<int>(std::lround(0.02 * cols)));
  std::vector<std::uint8_t> forced(mask.pattern.size(), 0);
  for (int r = rows / 2 - bh / 2; r < rows / 2 - bh / 2 + bh; ++r) {
    for (int c = cols / 2 - bw / 2; c < cols / 2 - bw / 2 + bw; ++c) forced[index_of(r, c, cols)] = 1;
  }
  for (std::size_t i = 0; i < mask.pattern.size(); ++i) {
    const bool draw = rng.coin(mask.alpha);
    mask.pattern[i] = (forced[i] || draw) ? 1 : 0;
  }
  const std::size_t target = mask.target_count();
  std::size_t count = mask.count();
  if (count > target) {
    std::vector<std::size_t> removable;
    for (std::size_t i = 0; i < mask.pattern.size(); ++i) {
      if (mask.pattern[i] && !forced[i]) removable.push_back(i);
    }
    shuffle(removable, rng);
    const std::size_t n = std::min(count - target, removable.size());
    for (std::size_t j = 0; j < n; ++j) mask.pattern[removable[j]] = 0;
  } else if (count < target) {
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < mask.pattern.size(); ++i) {
      if (!mask.pattern[i]) free.push_back(i);
    }
    shuffle(free, rng);
    for (std::size_t j = 0; j < target - count; ++j) mask.pattern[free[j]] = 1;
  }
}

}  // namespace

std::string to_string(MaskFamily family) {
  switch (family) {
    case MaskFamily::cartesian:
      return "cartesian";
    case MaskFamily::pseudo_radial:
      return "pseudo_radial";
    case MaskFamily::random2d:
      return "random2d";
  }
  return "unknown";
}

MaskFamily parse_mask_family(std::string_view name) {
  if (name == "cartesian") return MaskFamily::cartesian;
  if (name == "pseudo_radial" || name == "radial") return MaskFamily::pseudo_radial;
  if (name == "random2d") return MaskFamily::random2d;
  throw InvalidArgument("unknown mask family '" + std::string(name) + "'");
}

std::size_t SamplingMask::count() const {
  return static_cast<std::size_t>(std::count(pattern.begin(), pattern.end(), std::uint8_t{1}));
}

std::size_t SamplingMask::target_count() const {
  return static_cast<std::size_t>(std::llround(alpha * static_cast<double>(rows) * cols));
}

SamplingMask make_mask(int rows, int cols, double alpha, MaskFamily family, std::uint64_t seed) {
  if (rows < 8 || cols < 8 || rows % 2 != 0 || cols % 2 != 0) {
    throw InvalidArgument("mask dimensions must be even and >= 8, got " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("sampling ratio must lie in (0, 1]");

  SamplingMask mask{rows, cols, alpha, family, seed, std::vector<std::uint8_t>(static_cast<std::size_t>(rows) * cols, 0)};
  if (alpha >= 1.0) {
    std::fill(mask.pattern.begin(), mask.pattern.end(), 1);
    return mask;
  }
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(family) + 1));
  switch (family) {
    case MaskFamily::cartesian:
      fill_cartesian(mask, rng);
      break;
    case MaskFamily::pseudo_radial:
      fill_pseudo_radial(mask, rng);
      break;
    case MaskFamily::random2d:
      fill_random2d(mask, rng);
      break;
  }
  mask.pattern[index_of(rows / 2, cols / 2, cols)] = 1;
  return mask;
}

void save_mask(const SamplingMask& mask, const std::filesystem::path& stem) {
  Gray8 g{mask.rows, mask.cols, std::vector<std::uint8_t>(mask.pattern.size())};
  for (std::size_t i = 0; i < mask.pattern.size(); ++i) g.pixels[i] = mask.pattern[i] ? 255 : 0;
  auto png = stem;
  png += ".png";
  write_png_gray(png, g);
  nlohmann::ordered_json j;
  j["family"] = to_string(mask.family);
  j["alpha"] = mask.alpha;
  j["seed"] = mask.seed;
  j["m"] = mask.rows;
  j["n"] = mask.cols;
  auto manifest = stem;
  manifest += ".json";
  std::ofstream(manifest) << j.dump(2) << '\n';
}

SamplingMask load_mask(const std::filesystem::path& stem) {
  auto manifest = stem;
  manifest += ".json";
  std::ifstream in(manifest);
  if (!in) throw InvalidArgument("missing mask manifest " + manifest.string());
  const auto j = nlohmann::json::parse(in);
  SamplingMask mask;
  mask.family = parse_mask_family(j.at("family").get<std::string>());
  mask.alpha = j.at("alpha").get<double>();
  mask.seed = j.at("seed").get<std::uint64_t>();
  mask.rows = j.at("m").get<int>();
  mask.cols = j.at("n").get<int>();
  auto png = stem;
  png += ".png";
  const Gray8 g = read_gray(png);
  if (g.rows != mask.rows || g.cols != mask.cols) throw ShapeMismatch("mask image does not match manifest");
  mask.pattern.resize(g.pixels.size());
  for (std::size_t i = 0; i < g.pixels.size(); ++i) mask.pattern[i] = g.pixels[i] >= 128 ? 1 : 0;
  return mask;
}

MeasurementOp::MeasurementOp(SamplingMask mask)
    : mask_(std::make_shared<const SamplingMask>(std::move(mask))) {}

MeasurementOp::MeasurementOp(std::shared_ptr<const SamplingMask> mask) : mask_(std::move(mask)) {
  if (!mask_) throw InvalidArgument("MeasurementOp: null mask");
}

void MeasurementOp::check(int rows, int cols, const char* where) const {
  if (rows != mask_->rows || cols != mask_->cols) {
    throw ShapeMismatch(std::string(where) + ": field " + std::to_string(rows) + "x" + std::to_string(cols) +
                        " does not match operator " + std::to_string(mask_->rows) + "x" +
                        std::to_string(mask_->cols));
  }
}

void MeasurementOp::project(ComplexField& y) const {
  check(y.rows(), y.cols(), "project");
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!mask_->pattern[i]) y[i] = Complex{};
  }
}

ComplexField MeasurementOp::forward(const Image& x) const {
  if (x.rank() != 3 || x.channels() != 1) throw ShapeMismatch("forward: expected a single-channel image");
  check(x.rows(), x.cols(), "forward");
  return forward(to_complex(x));
}

ComplexField MeasurementOp::forward(const ComplexField& x) const {
  check(x.rows(), x.cols(), "forward");
  ComplexField k = fft2c(x);
  project(k);
  return k;
}

ComplexField MeasurementOp::adjoint(const ComplexField& y) const {
  check(y.rows(), y.cols(), "adjoint");
  ComplexField z = y;
  project(z);
  ifft2c(z);
  return z;
}

ComplexField MeasurementOp::normal(const ComplexField& x) const { return adjoint(forward(x)); }

Image zero_fill(const MeasurementOp& op, const ComplexField& y) { return magnitude(op.adjoint(y)); }

}  // namespace csmri
