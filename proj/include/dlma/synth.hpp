#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dlma/raster.hpp"

namespace dlma {

using Rng = std::mt19937_64;

/// Formation-model scalars. Dimming and gamma enter only through the
/// products a^g2 (`dim_gain`) and g2/g1 (`gamma_ratio`).
struct DegradeParams {
  double dim_gain = 1.0 / 30.0;
  double gamma_ratio = 1.3;
  double q = 1.0 / 255.0;
  double noise_sigma = 0.25;  // in units of q
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const DegradeParams&, const DegradeParams&) = default;
};

/// Ranges from which per-pair parameters are drawn during training.
struct ParamRanges {
  double dim_gain_min = 1.0 / 30.0;
  double dim_gain_max = 0.5;
  double gamma_ratio_min = 0.8;
  double gamma_ratio_max = 1.6;
  double sigma_min = 0.0;
  double sigma_max = 0.5;

  void validate() const;
  friend bool operator==(const ParamRanges&, const ParamRanges&) = default;
};

/// dim_gain log-uniform, gamma_ratio and sigma uniform; q is copied from `q`.
DegradeParams sample_params(const ParamRanges& ranges, double q, Rng& rng);

/// Independent stream seed for item `stream` of a run seeded with `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

struct Capture {
  Raster image;                    // J_a
  std::vector<double> noise_map;   // n(i), clamping folded in
};

/// J_a = clamp(Q(dim_gain * J^gamma_ratio) + n, 0, 1) with n ~ N(0, (sigma q)^2).
/// The stored noise satisfies image == Q(.) + noise exactly.
Capture capture_lowlight(const Raster& truth, const DegradeParams& p, Rng& rng);

/// clamp((J_a / dim_gain)^(1 / gamma_ratio), 0, 1).
Raster unstretch(const Raster& capture, const DegradeParams& p);

struct TrainingSample {
  Raster ground_truth;            // J
  Raster degraded;                // J~
  Raster capture;                 // J_a, restricted to [0, dim_gain]
  std::vector<double> noise_map;  // n(i)
  DegradeParams params;
};

/// Random patch of `truth` degraded by capture_lowlight + unstretch. The
/// capture is additionally limited to [0, dim_gain] (folded into the noise
/// map) so that dim_gain * degraded^gamma_ratio reproduces it.
TrainingSample make_training_pair(const Raster& truth, const DegradeParams& p, int patch_h, int patch_w,
                                  Rng& rng);

/// E = J - J~.
SignedField residual(const TrainingSample& sample);

// ---- batch synthesis interface -----------------------------------------

struct ManifestEntry {
  std::filesystem::path input;
  DegradeParams params;
  bool has_params = false;  // false when the line carried only a path
};

/// Lines `<path> <dim_gain> <gamma_ratio> <q> <sigma> <seed>` or a bare
/// `<path>`; blank lines and `#` comments are skipped. Relative paths resolve
/// against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);

/// Parameters plus the noise map of one synthesized pair.
struct Sidecar {
  DegradeParams params;
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> noise_map;
};

/// Text header of `key value` lines ending with
/// `noise_map f32le <h> <w> <c>`, followed by h*w*c little-endian floats.
void write_sidecar(const Sidecar& s, const std::filesystem::path& path);
Sidecar read_sidecar(const std::filesystem::path& path);

}  // namespace dlma
