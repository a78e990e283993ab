#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "dlma/error.hpp"
#include "dlma/image_io.hpp"
#include "dlma/raster.hpp"
#include "toy_images.hpp"

namespace fs = std::filesystem;
using namespace dlma;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dlma_test_raster_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
}

template <class F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::config;
}

}  // namespace

TEST(Quantize, WorkedValues) {
  EXPECT_DOUBLE_EQ(quantize(0.26, 0.1), 0.30000000000000004);
  EXPECT_EQ(quantize(0.0, 1.0 / 255.0), 0.0);
  EXPECT_EQ(quantize(0.5, 1.0 / 255.0), 128.0 / 255.0);
}

TEST(Quantize, HalfStepRoundsUp) {
  EXPECT_EQ(quantize(0.5, 1.0), 1.0);
  EXPECT_EQ(quantize(0.25, 0.5), 0.5);
  EXPECT_EQ(quantize(-0.5, 1.0), 0.0);
}

TEST(Quantize, IdempotentAndBounded) {
  for (double q : {1.0 / 255.0, 1.0 / 64.0, 0.1}) {
    for (int i = 0; i <= 10000; ++i) {
      const double x = i / 10000.0;
      const double y = quantize(x, q);
      EXPECT_LE(std::abs(y - x), q / 2 + 1e-15);
      EXPECT_EQ(quantize(y, q), y);
    }
  }
}

TEST(Quantize, StepValidation) {
  EXPECT_EQ(error_of([] { QuantSpec{0.0}.validate(); }), ErrorCode::invalid_argument);
  EXPECT_NO_THROW(QuantSpec{}.validate());
}

TEST(RasterType, ConstructionChecks) {
  EXPECT_EQ(error_of([] { Raster(1, 2, 1, std::vector<double>{0.5}); }), ErrorCode::dimension_mismatch);
  EXPECT_EQ(error_of([] { Raster(1, 1, 1, std::vector<double>{1.5}); }), ErrorCode::invalid_argument);
  const Raster r(2, 3, 3, 0.25);
  EXPECT_EQ(r.size(), 18u);
  EXPECT_TRUE(r.in_range());
  EXPECT_EQ(r.index(1, 2, 1), 16u);
}

TEST(RasterType, Crop) {
  Raster r(3, 3, 1);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) r.at(y, x) = (3 * y + x) / 10.0;
  const Raster c = r.crop(1, 1, 2, 2);
  EXPECT_EQ(c.at(0, 0), 0.4);
  EXPECT_EQ(c.at(1, 1), 0.8);
  EXPECT_EQ(error_of([&] { (void)r.crop(2, 2, 2, 2); }), ErrorCode::dimension_mismatch);
}

TEST(ImageIo, PgmCodesNormalize) {
  const fs::path dir = scratch_dir("pgm");
  write_bytes(dir / "a.pgm", std::string("P5 2 1 255\n") + char(64) + char(128));
  const Raster r = load_image(dir / "a.pgm");
  ASSERT_EQ(r.height(), 1);
  ASSERT_EQ(r.width(), 2);
  ASSERT_EQ(r.channels(), 1);
  EXPECT_EQ(r.at(0, 0), 64.0 / 255.0);
  EXPECT_EQ(r.at(0, 1), 128.0 / 255.0);

  write_bytes(dir / "w.pgm", std::string("P5 1 1 255\n") + char(255));
  EXPECT_EQ(load_image(dir / "w.pgm").at(0, 0), 1.0);
  write_bytes(dir / "b.pgm", std::string("P5 1 1 255\n") + char(0));
  EXPECT_EQ(load_image(dir / "b.pgm").at(0, 0), 0.0);
}

TEST(ImageIo, EncodeCodes) {
  EXPECT_EQ(encode_code(0.2617, 1.0 / 255.0), 67);
  EXPECT_EQ(encode_code(1.0, 1.0 / 255.0), 255);
  EXPECT_EQ(encode_code(0.0, 1.0 / 255.0), 0);
}

TEST(ImageIo, SaveLoadEqualsQuantize) {
  const fs::path dir = scratch_dir("roundtrip");
  const Raster rgb = dlma::testing::random_image(7, 5, 3, 11);
  const Raster gray = dlma::testing::random_image(4, 9, 1, 12);
  for (const char* ext : {".png", ".ppm"}) {
    save_image(rgb, dir / (std::string("rgb") + ext));
    EXPECT_EQ(load_image(dir / (std::string("rgb") + ext)), quantize(rgb, 1.0 / 255.0)) << ext;
  }
  for (const char* ext : {".png", ".pgm"}) {
    save_image(gray, dir / (std::string("gray") + ext));
    EXPECT_EQ(load_image(dir / (std::string("gray") + ext)), quantize(gray, 1.0 / 255.0)) << ext;
  }
  const Raster q = quantize(rgb, 1.0 / 255.0);
  save_image(q, dir / "q.png");
  EXPECT_EQ(load_image(dir / "q.png"), q);
}

TEST(ImageIo, ErrorKinds) {
  const fs::path dir = scratch_dir("errors");
  EXPECT_EQ(error_of([&] { load_image(dir / "missing.png"); }), ErrorCode::io);
  write_bytes(dir / "junk.pgm", "hello world");
  EXPECT_EQ(error_of([&] { load_image(dir / "junk.pgm"); }), ErrorCode::unsupported_format);
  write_bytes(dir / "deep.pgm", std::string("P5 1 1 65535\n") + char(1) + char(2));
  EXPECT_EQ(error_of([&] { load_image(dir / "deep.pgm"); }), ErrorCode::unsupported_depth);
  EXPECT_EQ(error_of([&] { save_image(Raster(2, 2, 3), dir / "rgb.pgm"); }), ErrorCode::dimension_mismatch);
  EXPECT_EQ(error_of([&] { save_image(Raster(2, 2, 1), dir / "none" / "x.png"); }), ErrorCode::io);
}

TEST(Luma, SplitExamples) {
  Raster r(1, 3, 3);
  const double px[3][3] = {{0.4, 0.4, 0.4}, {0.2, 0.4, 0.1}, {0.0, 0.0, 0.0}};
  for (int x = 0; x < 3; ++x)
    for (int c = 0; c < 3; ++c) r.at(0, x, c) = px[x][c];
  const LumaSplit s = split_luma(r);
  EXPECT_DOUBLE_EQ(s.luma.at(0, 0), 0.4);
  EXPECT_DOUBLE_EQ(s.luma.at(0, 1), 0.4);
  EXPECT_EQ(s.luma.at(0, 2), 0.0);
  for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(s.ratios.at(0, 0, c), 1.0);
  EXPECT_DOUBLE_EQ(s.ratios.at(0, 1, 0), 0.5);
  EXPECT_DOUBLE_EQ(s.ratios.at(0, 1, 1), 1.0);
  EXPECT_DOUBLE_EQ(s.ratios.at(0, 1, 2), 0.25);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(s.ratios.at(0, 2, c), 1.0);
}

TEST(Luma, RoundTrip) {
  const Raster r = dlma::testing::random_image(16, 16, 3, 5);
  const LumaSplit s = split_luma(r);
  const Raster back = recombine_luma(s.luma, s.ratios);
  for (std::size_t p = 0; p < r.pixel_count(); ++p) {
    if (s.luma.data()[p] <= kDivideGuard) continue;
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(back.data()[p * 3 + c], r.data()[p * 3 + c], 1e-9);
  }
}

TEST(Metrics, Psnr) {
  const Raster zero(4, 4, 1, 0.0), tenth(4, 4, 1, 0.1), one(4, 4, 1, 1.0);
  EXPECT_NEAR(psnr(zero, tenth), 20.0, 1e-9);
  EXPECT_DOUBLE_EQ(psnr(zero, one), 0.0);
  EXPECT_TRUE(std::isinf(psnr(tenth, tenth)));
  EXPECT_EQ(error_of([&] { psnr(zero, Raster(4, 3, 1)); }), ErrorCode::dimension_mismatch);
}
