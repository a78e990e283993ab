#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "dlma/error.hpp"
#include "dlma/synth.hpp"
#include "toy_images.hpp"

namespace fs = std::filesystem;
using namespace dlma;

namespace {

DegradeParams global_setting(double sigma = 0.0) {
  DegradeParams p;
  p.dim_gain = 1.0 / 30.0;
  p.gamma_ratio = 1.3;
  p.q = 1.0 / 255.0;
  p.noise_sigma = sigma;
  return p;
}

}  // namespace

TEST(Capture, WorkedPixel) {
  Rng rng(1);
  const Capture c = capture_lowlight(Raster(1, 1, 1, 0.5), global_setting(), rng);
  EXPECT_EQ(c.image.at(0, 0), 3.0 / 255.0);
  EXPECT_EQ(c.noise_map[0], 0.0);
}

TEST(Capture, DegenerateParametersQuantizeOnly) {
  DegradeParams p;
  p.dim_gain = 1.0;
  p.gamma_ratio = 1.0;
  p.noise_sigma = 0.0;
  const Raster j = dlma::testing::random_image(8, 8, 3, 2);
  Rng rng(3);
  EXPECT_EQ(capture_lowlight(j, p, rng).image, quantize(j, p.q));
}

TEST(Capture, ZeroInputIsClampedNoise) {
  Rng rng(4);
  const Capture c = capture_lowlight(Raster(8, 8, 1, 0.0), global_setting(2.0), rng);
  for (std::size_t i = 0; i < c.noise_map.size(); ++i) {
    EXPECT_GE(c.image.data()[i], 0.0);
    EXPECT_EQ(c.image.data()[i], c.noise_map[i]);
  }
}

TEST(Capture, NoiseIdentityIsExact) {
  const DegradeParams p = global_setting(0.5);
  const Raster j = dlma::testing::random_image(16, 16, 3, 6);
  Rng rng(7);
  const Capture c = capture_lowlight(j, p, rng);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const double pre = quantize(p.dim_gain * std::pow(j.data()[i], p.gamma_ratio), p.q);
    EXPECT_EQ(c.image.data()[i], pre + c.noise_map[i]);
  }
}

TEST(Unstretch, WorkedValues) {
  EXPECT_DOUBLE_EQ(unstretch(Raster(1, 1, 1, 3.0 / 255.0), global_setting()).at(0, 0), 0.4488267311091612);
  EXPECT_EQ(unstretch(Raster(1, 1, 1, 0.0), global_setting()).at(0, 0), 0.0);
  DegradeParams id;
  id.dim_gain = 1.0;
  id.gamma_ratio = 1.0;
  const Raster j = dlma::testing::random_image(5, 5, 1, 8);
  EXPECT_EQ(unstretch(j, id), j);
  EXPECT_EQ(unstretch(Raster(1, 1, 1, 0.5), global_setting()).at(0, 0), 1.0);
}

TEST(TrainingPair, DegenerateIsIdentity) {
  DegradeParams p;
  p.dim_gain = 1.0;
  p.gamma_ratio = 1.0;
  p.q = 1e-9;
  p.noise_sigma = 0.0;
  Rng rng(9);
  const TrainingSample s = make_training_pair(dlma::testing::toy_image(48, 48, 3, 1), p, 32, 32, rng);
  for (std::size_t i = 0; i < s.degraded.size(); ++i) {
    EXPECT_NEAR(s.degraded.data()[i], s.ground_truth.data()[i], 1e-6);
  }
}

TEST(TrainingPair, Deterministic) {
  const Raster j = dlma::testing::toy_image(40, 40, 3, 2);
  Rng a(11), b(11);
  const TrainingSample x = make_training_pair(j, global_setting(0.25), 16, 16, a);
  const TrainingSample y = make_training_pair(j, global_setting(0.25), 16, 16, b);
  EXPECT_EQ(x.ground_truth, y.ground_truth);
  EXPECT_EQ(x.degraded, y.degraded);
  EXPECT_EQ(x.noise_map, y.noise_map);
}

TEST(TrainingPair, TooSmallImage) {
  Rng rng(1);
  try {
    make_training_pair(Raster(8, 8, 1), global_setting(), 16, 16, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::dimension_mismatch);
  }
}

TEST(TrainingPair, CaptureReproducedFromDegraded) {
  const DegradeParams p = global_setting(0.25);
  Rng rng(12);
  const TrainingSample s = make_training_pair(dlma::testing::toy_image(40, 40, 3, 3), p, 24, 24, rng);
  for (std::size_t i = 0; i < s.capture.size(); ++i) {
    EXPECT_NEAR(p.dim_gain * std::pow(s.degraded.data()[i], p.gamma_ratio), s.capture.data()[i], 1e-15);
    const double pre = quantize(p.dim_gain * std::pow(s.ground_truth.data()[i], p.gamma_ratio), p.q);
    EXPECT_EQ(s.capture.data()[i], pre + s.noise_map[i]);
  }
}

TEST(TrainingPair, DistinctPreNoiseLevels) {
  const DegradeParams p = global_setting(0.25);
  Rng rng(13);
  const TrainingSample s = make_training_pair(dlma::testing::toy_image(64, 64, 3, 4), p, 64, 64, rng);
  std::set<double> levels;
  for (std::size_t i = 0; i < s.capture.size(); ++i) levels.insert(s.capture.data()[i] - s.noise_map[i]);
  EXPECT_LE(levels.size(), static_cast<std::size_t>(std::floor(p.dim_gain / p.q + 0.5)) + 1);
  EXPECT_LE(static_cast<double>(levels.size()), 1.0 / (p.q * p.dim_gain) + 1.0);
}

TEST(Residual, Values) {
  TrainingSample s;
  s.ground_truth = Raster(1, 1, 1, 0.5);
  s.degraded = Raster(1, 1, 1, 0.4488267311091612);
  EXPECT_DOUBLE_EQ(residual(s).values[0], 0.051173268890838786);

  Rng rng(14);
  const TrainingSample t = make_training_pair(dlma::testing::toy_image(32, 32, 3, 5), global_setting(0.25), 16, 16, rng);
  const SignedField e = residual(t);
  for (std::size_t i = 0; i < e.values.size(); ++i) {
    EXPECT_NEAR(e.values[i] + t.degraded.data()[i], t.ground_truth.data()[i], 1e-15);
  }
  s.degraded = s.ground_truth;
  EXPECT_EQ(residual(s).values[0], 0.0);
}

TEST(Properties, SigmaZeroBound) {
  ParamRanges ranges;
  Rng draw(15);
  for (int k = 0; k < 20; ++k) {
    DegradeParams p = sample_params(ranges, 1.0 / 255.0, draw);
    p.noise_sigma = 0.0;
    Rng rng(100 + k);
    const TrainingSample s = make_training_pair(dlma::testing::random_image(32, 32, 3, 200 + k), p, 32, 32, rng);
    for (std::size_t i = 0; i < s.degraded.size(); ++i) {
      const double lhs = p.dim_gain * std::pow(s.degraded.data()[i], p.gamma_ratio);
      const double rhs = p.dim_gain * std::pow(s.ground_truth.data()[i], p.gamma_ratio);
      ASSERT_LE(std::abs(lhs - rhs), p.q / 2 + 1e-9);
    }
  }
}

TEST(Properties, MonotoneInInput) {
  const DegradeParams p = global_setting();
  Raster ramp(1, 1001, 1);
  for (int x = 0; x <= 1000; ++x) ramp.at(0, x) = x / 1000.0;
  Rng rng(16);
  const Raster out = unstretch(capture_lowlight(ramp, p, rng).image, p);
  for (int x = 1; x <= 1000; ++x) EXPECT_GE(out.at(0, x), out.at(0, x - 1));
}

TEST(Sampling, RangesAndSeeds) {
  ParamRanges r;
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    const DegradeParams p = sample_params(r, 0.01, rng);
    EXPECT_GE(p.dim_gain, r.dim_gain_min);
    EXPECT_LE(p.dim_gain, r.dim_gain_max);
    EXPECT_GE(p.gamma_ratio, r.gamma_ratio_min);
    EXPECT_LE(p.gamma_ratio, r.gamma_ratio_max);
    EXPECT_GE(p.noise_sigma, r.sigma_min);
    EXPECT_LE(p.noise_sigma, r.sigma_max);
    EXPECT_EQ(p.q, 0.01);
  }
  EXPECT_EQ(derive_seed(5, 1), derive_seed(5, 1));
  EXPECT_NE(derive_seed(5, 1), derive_seed(5, 2));
  EXPECT_NE(derive_seed(5, 1), derive_seed(6, 1));
}

TEST(Params, Validation) {
  DegradeParams p;
  p.dim_gain = 0.0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.gamma_ratio = -1.0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.noise_sigma = -0.1;
  EXPECT_THROW(p.validate(), Error);
}

TEST(Files, SidecarRoundTrip) {
  const fs::path dir = fs::temp_directory_path() / "dlma_test_synth_sidecar";
  fs::create_directories(dir);
  Sidecar s{global_setting(0.25), 2, 3, 1, {0.5f, -0.25f, 1e-3f, 0.0f, -1.0f, 3.0f}};
  s.params.seed = 42;
  write_sidecar(s, dir / "x.meta");
  const Sidecar t = read_sidecar(dir / "x.meta");
  EXPECT_EQ(t.params, s.params);
  EXPECT_EQ(t.height, 2);
  EXPECT_EQ(t.width, 3);
  EXPECT_EQ(t.channels, 1);
  EXPECT_EQ(t.noise_map, s.noise_map);
}

TEST(Files, Manifest) {
  const fs::path dir = fs::temp_directory_path() / "dlma_test_synth_manifest";
  fs::create_directories(dir);
  {
    std::ofstream m(dir / "m.txt");
    m << "# comment\n\na.png 0.1 1.2 0.00392156862745098 0.3 9\nsub/b.png\n";
  }
  const auto entries = read_manifest(dir / "m.txt");
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0].input, dir / "a.png");
  EXPECT_TRUE(entries[0].has_params);
  EXPECT_EQ(entries[0].params.dim_gain, 0.1);
  EXPECT_EQ(entries[0].params.gamma_ratio, 1.2);
  EXPECT_EQ(entries[0].params.noise_sigma, 0.3);
  EXPECT_EQ(entries[0].params.seed, 9u);
  EXPECT_EQ(entries[1].input, dir / "sub" / "b.png");
  EXPECT_FALSE(entries[1].has_params);

  {
    std::ofstream m(dir / "bad.txt");
    m << "a.png 0.1 x 0.1 0.1 1\n";
  }
  try {
    read_manifest(dir / "bad.txt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config);
  }
}
