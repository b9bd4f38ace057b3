#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "csmri/data.hpp"
#include "csmri/errors.hpp"
#include "csmri/image_io.hpp"
#include "csmri/training.hpp"
#include "support.hpp"

using namespace csmri;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Phantoms, FirstImageIsDeterministicSheppLogan) {
  const Dataset a = make_phantoms(1, 64, 64, 1);
  const Dataset b = make_phantoms(1, 64, 64, 99);
  EXPECT_EQ(a.images[0], b.images[0]);
  EXPECT_EQ(a.images[0], shepp_logan(64, 64));
}

TEST(Phantoms, ValuesInUnitRange) {
  const Dataset d = make_phantoms(12, 32, 48, 3);
  for (const Image& x : d.images) {
    EXPECT_EQ(x.rows(), 32);
    EXPECT_EQ(x.cols(), 48);
    for (double v : x.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Phantoms, SeedChangesRandomImagesOnly) {
  const Dataset a = make_phantoms(8, 32, 32, 5);
  const Dataset b = make_phantoms(8, 32, 32, 6);
  EXPECT_EQ(a.images[0], b.images[0]);
  for (int i = 1; i < 8; ++i) EXPECT_NE(a.images[static_cast<std::size_t>(i)], b.images[static_cast<std::size_t>(i)]);
  EXPECT_EQ(a.images[3], make_phantoms(8, 32, 32, 5).images[3]);
}

TEST(Phantoms, RejectsBadArguments) {
  EXPECT_THROW(make_phantoms(0, 32, 32, 0), InvalidArgument);
  EXPECT_THROW(make_phantoms(1, 31, 32, 0), InvalidArgument);
}

TEST(Phantoms, StayInRangeAfterAugmentation) {
  const Dataset d = make_phantoms(4, 32, 32, 7);
  Rng rng(1);
  for (const Image& x : d.images) {
    const Image a = augment(x, rng);
    for (double v : a.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(LoadImages, ConstantImage) {
  const auto dir = fresh_dir("csmri_load_const");
  Gray8 g{16, 16, std::vector<std::uint8_t>(256, 128)};
  write_png_gray(dir / "a.png", g);
  const Dataset d = load_images(dir);
  ASSERT_EQ(d.size(), 1u);
  for (double v : d.images[0].values()) EXPECT_DOUBLE_EQ(v, 128.0 / 255.0);
  fs::remove_all(dir);
}

TEST(LoadImages, QuantizationRoundTrip) {
  const auto dir = fresh_dir("csmri_load_roundtrip");
  const Dataset src = make_phantoms(3, 32, 32, 2);
  for (std::size_t i = 0; i < src.size(); ++i) save_image(dir / ("img" + std::to_string(i) + ".png"), src.images[i]);
  const Dataset back = load_images(dir);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back.source, DataSource::files);
  for (std::size_t i = 0; i < src.size(); ++i) EXPECT_LE(fixtures::max_abs_diff(back.images[i], src.images[i]), 1.0 / 510.0 + 1e-15);
  fs::remove_all(dir);
}

TEST(LoadImages, LexicographicOrderAndPgm) {
  const auto dir = fresh_dir("csmri_load_order");
  write_png_gray(dir / "b.png", Gray8{8, 8, std::vector<std::uint8_t>(64, 200)});
  {
    std::ofstream pgm(dir / "a.pgm", std::ios::binary);
    pgm << "P5\n8 8\n255\n";
    const std::vector<char> bytes(64, 10);
    pgm.write(bytes.data(), 64);
  }
  const Dataset d = load_images(dir);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_DOUBLE_EQ(d.images[0][0], 10.0 / 255.0);
  EXPECT_DOUBLE_EQ(d.images[1][0], 200.0 / 255.0);
  fs::remove_all(dir);
}

TEST(LoadImages, Errors) {
  const auto empty = fresh_dir("csmri_load_empty");
  EXPECT_THROW(load_images(empty), InvalidArgument);
  EXPECT_THROW(load_images(empty / "missing"), InvalidArgument);
  const auto mixed = fresh_dir("csmri_load_mixed");
  write_png_gray(mixed / "a.png", Gray8{8, 8, std::vector<std::uint8_t>(64, 1)});
  write_png_gray(mixed / "b.png", Gray8{8, 10, std::vector<std::uint8_t>(80, 1)});
  EXPECT_THROW(load_images(mixed), ShapeMismatch);
  std::ofstream(mixed / "c.png") << "not an image";
  EXPECT_ANY_THROW(load_images(mixed));
  fs::remove_all(empty);
  fs::remove_all(mixed);
}

TEST(Noise, ZeroStdIsIdentity) {
  const Dataset d = make_phantoms(1, 32, 32, 0);
  const SamplingMask m = make_mask(32, 32, 0.3, MaskFamily::random2d, 1);
  const ComplexField y = MeasurementOp(m).forward(d.images[0]);
  EXPECT_EQ(add_gaussian_noise(y, m, 0.0, 5), y);
}

TEST(Noise, SampleStdAndSupport) {
  const SamplingMask m = make_mask(64, 64, 0.3, MaskFamily::random2d, 1);
  const ComplexField y(64, 64);
  const ComplexField noisy = add_gaussian_noise(y, m, 0.1, 3);
  double sum_sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    if (m.pattern[i]) {
      sum_sq += std::norm(noisy[i]);
      ++n;
    } else {
      EXPECT_EQ(noisy[i], Complex{});
    }
  }
  EXPECT_NEAR(std::sqrt(sum_sq / static_cast<double>(n)), 0.1, 0.005);
  EXPECT_EQ(noisy, add_gaussian_noise(y, m, 0.1, 3));
  EXPECT_THROW(add_gaussian_noise(y, m, -0.1, 3), InvalidArgument);
}

TEST(Psnr, ConstantOffset) {
  const Image ref = shepp_logan(32, 32);
  Image x = ref;
  for (double& v : x.values()) v += 0.1;
  EXPECT_NEAR(psnr(x, ref), 20.0, 1e-10);
}

TEST(Psnr, IdenticalGivesSentinel) {
  const Image ref = shepp_logan(32, 32);
  EXPECT_EQ(psnr(ref, ref), kPsnrCap);
}

TEST(Psnr, MatchesDirectFormulaAndIsSymmetric) {
  Rng rng(4);
  const Image a = fixtures::random_image(4, 4, rng);
  const Image b = fixtures::random_image(4, 4, rng);
  double mse = 0.0;
  for (std::size_t i = 0; i < 16; ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
  mse /= 16.0;
  EXPECT_NEAR(psnr(a, b), 10.0 * std::log10(1.0 / mse), 1e-10);
  EXPECT_EQ(psnr(a, b), psnr(b, a));
  EXPECT_NEAR(psnr(a, b, 2.0), 10.0 * std::log10(4.0 / mse), 1e-10);
  EXPECT_THROW(psnr(a, Tensor::image(4, 5)), ShapeMismatch);
}

TEST(Psnr, DecreasesWithNoiseLevel) {
  const Image ref = shepp_logan(32, 32);
  double previous = kPsnrCap;
  for (double s : {0.01, 0.05, 0.2}) {
    Rng rng(11);
    Image x = ref;
    for (double& v : x.values()) v += s * rng.normal();
    const double p = psnr(x, ref);
    EXPECT_LT(p, previous);
    previous = p;
  }
}

TEST(Ssim, IdenticalIsOne) {
  const Image x = shepp_logan(32, 32);
  EXPECT_EQ(ssim(x, x), 1.0);
}

TEST(Ssim, InvertedContrastIsLow) {
  const Image x = shepp_logan(64, 64);
  Image inv = x;
  for (double& v : inv.values()) v = 1.0 - v;
  EXPECT_LT(ssim(inv, x), 0.2);
}

TEST(Ssim, ConstantImagesMatchClosedForm) {
  const double a = 0.2;
  const double b = 0.7;
  const double c1 = 1e-4;
  const double expected = (2 * a * b + c1) / (a * a + b * b + c1);
  EXPECT_NEAR(ssim(Tensor::image(16, 16, a), Tensor::image(16, 16, b)), expected, 1e-9);
}

TEST(Ssim, SymmetricAndBounded) {
  Rng rng(5);
  const Image a = fixtures::random_image(24, 24, rng);
  const Image b = fixtures::random_image(24, 24, rng);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-14);
  EXPECT_LE(ssim(a, b), 1.0);
  EXPECT_GE(ssim(a, b), -1.0);
  EXPECT_THROW(ssim(Tensor::image(8, 8), Tensor::image(8, 8)), InvalidArgument);
}
