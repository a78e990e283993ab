#include "dlma/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dlma/error.hpp"

namespace dlma {

void DegradeParams::validate() const {
  if (!(dim_gain > 0.0 && dim_gain <= 1.0)) throw Error(ErrorCode::invalid_argument, "dim_gain must lie in (0,1]");
  if (!(gamma_ratio > 0.0) || !std::isfinite(gamma_ratio)) {
    throw Error(ErrorCode::invalid_argument, "gamma_ratio must be positive");
  }
  QuantSpec{q}.validate();
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw Error(ErrorCode::invalid_argument, "noise_sigma must be non-negative");
  }
}

void ParamRanges::validate() const {
  if (!(dim_gain_min > 0.0 && dim_gain_min <= dim_gain_max && dim_gain_max <= 1.0) ||
      !(gamma_ratio_min > 0.0 && gamma_ratio_min <= gamma_ratio_max) ||
      !(sigma_min >= 0.0 && sigma_min <= sigma_max)) {
    throw Error(ErrorCode::invalid_argument, "invalid parameter sampling ranges");
  }
}

DegradeParams sample_params(const ParamRanges& ranges, double q, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  DegradeParams p;
  const double lo = std::log(ranges.dim_gain_min);
  const double hi = std::log(ranges.dim_gain_max);
  p.dim_gain = std::clamp(std::exp(lo + (hi - lo) * unit(rng)), ranges.dim_gain_min, ranges.dim_gain_max);
  p.gamma_ratio = ranges.gamma_ratio_min + (ranges.gamma_ratio_max - ranges.gamma_ratio_min) * unit(rng);
  p.noise_sigma = ranges.sigma_min + (ranges.sigma_max - ranges.sigma_min) * unit(rng);
  p.q = q;
  p.seed = rng();
  return p;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  // splitmix64 finaliser over a mix of the two inputs
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Capture capture_lowlight(const Raster& truth, const DegradeParams& p, Rng& rng) {
  p.validate();
  Capture out{Raster(truth.height(), truth.width(), truth.channels()), std::vector<double>(truth.size(), 0.0)};
  std::normal_distribution<double> noise(0.0, p.noise_sigma > 0.0 ? p.noise_sigma * p.q : 1.0);
  auto src = truth.data();
  auto dst = out.image.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double level = quantize(p.dim_gain * std::pow(src[i], p.gamma_ratio), p.q);
    const double n = p.noise_sigma > 0.0 ? noise(rng) : 0.0;
    const double v = level + n;
    if (v >= 0.0 && v <= 1.0) {
      dst[i] = v;
      out.noise_map[i] = n;
    } else {
      dst[i] = std::clamp(v, 0.0, 1.0);
      out.noise_map[i] = dst[i] - level;
    }
  }
  return out;
}

Raster unstretch(const Raster& capture, const DegradeParams& p) {
  p.validate();
  Raster out(capture.height(), capture.width(), capture.channels());
  auto src = capture.data();
  auto dst = out.data();
  const double inv_gamma = 1.0 / p.gamma_ratio;
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = std::clamp(std::pow(src[i] / p.dim_gain, inv_gamma), 0.0, 1.0);
  }
  return out;
}

TrainingSample make_training_pair(const Raster& truth, const DegradeParams& p, int patch_h, int patch_w,
                                  Rng& rng) {
  p.validate();
  if (patch_h <= 0 || patch_w <= 0 || patch_h > truth.height() || patch_w > truth.width()) {
    throw Error(ErrorCode::dimension_mismatch, "image " + std::to_string(truth.height()) + "x" +
                                                   std::to_string(truth.width()) + " is smaller than patch " +
                                                   std::to_string(patch_h) + "x" + std::to_string(patch_w));
  }
  std::uniform_int_distribution<int> pick_y(0, truth.height() - patch_h);
  std::uniform_int_distribution<int> pick_x(0, truth.width() - patch_w);
  const int y0 = pick_y(rng);
  const int x0 = pick_x(rng);

  TrainingSample s;
  s.params = p;
  s.ground_truth = truth.crop(y0, x0, patch_h, patch_w);
  Capture cap = capture_lowlight(s.ground_truth, p, rng);

  // Captures above dim_gain would clip in unstretch; fold that clip into n.
  auto ja = cap.image.data();
  auto gt = s.ground_truth.data();
  for (std::size_t i = 0; i < ja.size(); ++i) {
    if (ja[i] > p.dim_gain) {
      const double level = quantize(p.dim_gain * std::pow(gt[i], p.gamma_ratio), p.q);
      ja[i] = p.dim_gain;
      cap.noise_map[i] = p.dim_gain - level;
    }
  }
  s.degraded = unstretch(cap.image, p);
  s.capture = std::move(cap.image);
  s.noise_map = std::move(cap.noise_map);
  return s;
}

SignedField residual(const TrainingSample& sample) {
  if (!sample.ground_truth.same_shape(sample.degraded)) {
    throw Error(ErrorCode::dimension_mismatch, "training sample halves differ in shape");
  }
  SignedField e{sample.ground_truth.height(), sample.ground_truth.width(), sample.ground_truth.channels(),
                std::vector<double>(sample.ground_truth.size())};
  auto j = sample.ground_truth.data();
  auto jt = sample.degraded.data();
  for (std::size_t i = 0; i < e.values.size(); ++i) e.values[i] = j[i] - jt[i];
  return e;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorCode::io, "cannot read manifest " + manifest.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string path;
    if (!(fields >> path)) continue;
    ManifestEntry e;
    e.input = path;
    if (e.input.is_relative()) e.input = manifest.parent_path() / e.input;
    std::vector<std::string> rest;
    for (std::string tok; fields >> tok;) rest.push_back(tok);
    if (!rest.empty()) {
      if (rest.size() != 5) {
        throw Error(ErrorCode::config, manifest.string() + ":" + std::to_string(line_no) +
                                           ": expected <path> <dim_gain> <gamma_ratio> <q> <sigma> <seed>");
      }
      try {
        e.params.dim_gain = std::stod(rest[0]);
        e.params.gamma_ratio = std::stod(rest[1]);
        e.params.q = std::stod(rest[2]);
        e.params.noise_sigma = std::stod(rest[3]);
        e.params.seed = std::stoull(rest[4]);
      } catch (const std::exception&) {
        throw Error(ErrorCode::config, manifest.string() + ":" + std::to_string(line_no) + ": malformed number");
      }
      try {
        e.params.validate();
      } catch (const Error& err) {
        throw Error(ErrorCode::config, manifest.string() + ":" + std::to_string(line_no) + ": " + err.what());
      }
      e.has_params = true;
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace dlma
