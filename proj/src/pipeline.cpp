#include "dlma/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "dlma/error.hpp"
#include "dlma/image_io.hpp"

namespace dlma {

Raster linear_stretch(const Raster& r, std::optional<double> gain) {
  double g = 0.0;
  if (gain) {
    g = *gain;
  } else {
    double peak = 0.0;
    for (double v : r.data()) peak = std::max(peak, v);
    g = peak > 0.0 ? 1.0 / peak : 1.0;
  }
  if (!(g > 0.0) || !std::isfinite(g)) throw Error(ErrorCode::invalid_argument, "linear stretch gain must be positive");
  Raster out = r;
  for (double& v : out.data()) v = std::min(v * g, 1.0);
  return out;
}

Raster tone_map(const Raster& capture, ToneMode mode, const PipelineConfig& c, const DegradeParams& params) {
  switch (mode) {
    case ToneMode::laic: return laic_enhance(capture, c.laic);
    case ToneMode::linear: return linear_stretch(capture);
    case ToneMode::unstretch: return unstretch(capture, params);
  }
  throw Error(ErrorCode::invalid_argument, "unknown tone mode");
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---- synth -------------------------------------------------------------------

namespace {

std::vector<std::string> unique_stems(const std::vector<ManifestEntry>& entries) {
  std::vector<std::string> stems;
  std::set<std::string> used;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    std::string stem = entries[i].input.stem().string();
    if (!used.insert(stem).second) {
      stem += "_" + std::to_string(i);
      used.insert(stem);
    }
    stems.push_back(stem);
  }
  return stems;
}

void widen(SynthReport& r, const DegradeParams& p, bool first) {
  auto lo = [&](double& a, double b) { a = first ? b : std::min(a, b); };
  auto hi = [&](double& a, double b) { a = first ? b : std::max(a, b); };
  lo(r.min_params.dim_gain, p.dim_gain);
  hi(r.max_params.dim_gain, p.dim_gain);
  lo(r.min_params.gamma_ratio, p.gamma_ratio);
  hi(r.max_params.gamma_ratio, p.gamma_ratio);
  lo(r.min_params.q, p.q);
  hi(r.max_params.q, p.q);
  lo(r.min_params.noise_sigma, p.noise_sigma);
  hi(r.max_params.noise_sigma, p.noise_sigma);
}

}  // namespace

SynthReport run_synth(const std::filesystem::path& manifest, const std::filesystem::path& out_dir,
                      const PipelineConfig& c) {
  const auto entries = read_manifest(manifest);
  if (entries.empty()) throw Error(ErrorCode::config, "manifest " + manifest.string() + " lists no images");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create " + out_dir.string() + ": " + ec.message());

  const auto stems = unique_stems(entries);
  std::vector<std::optional<std::string>> errors(entries.size());
  std::vector<DegradeParams> used(entries.size());
  parallel_for(entries.size(), c.jobs, [&](std::size_t i) {
    const ManifestEntry& e = entries[i];
    DegradeParams p = c.degrade;
    if (e.has_params) {
      p = e.params;
    } else {
      p.seed = derive_seed(c.degrade.seed, i);
    }
    used[i] = p;
    try {
      p.validate();
      const Raster truth = load_image(e.input);
      Rng rng(p.seed);
      Capture cap = capture_lowlight(truth, p, rng);
      // The capture is stored as 8-bit codes; fold that rounding into the
      // recorded noise so Q(a J^g) + n reproduces the file exactly.
      const Raster stored = quantize(cap.image, 1.0 / 255.0);
      Sidecar side{p, truth.height(), truth.width(), truth.channels(), {}};
      side.noise_map.resize(cap.noise_map.size());
      for (std::size_t k = 0; k < cap.noise_map.size(); ++k) {
        side.noise_map[k] = static_cast<float>(cap.noise_map[k] + stored.data()[k] - cap.image.data()[k]);
      }
      save_image(truth, out_dir / (stems[i] + "_gt.png"));
      save_image(stored, out_dir / (stems[i] + "_low.png"));
      write_sidecar(side, out_dir / (stems[i] + ".meta"));
    } catch (const std::exception& ex) {
      errors[i] = e.input.string() + ": " + ex.what();
    }
  });

  SynthReport report;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (errors[i]) {
      report.failures.push_back(*errors[i]);
      continue;
    }
    widen(report, used[i], report.written == 0);
    ++report.written;
  }
  return report;
}

// ---- eval --------------------------------------------------------------------

namespace {

bool supported_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

bool strip_suffix(std::string& s, const std::string& suffix) {
  if (s.size() <= suffix.size() || s.compare(s.size() - suffix.size(), suffix.size(), suffix) != 0) return false;
  s.erase(s.size() - suffix.size());
  return true;
}

double mean_of(const std::vector<EvalRow>& rows, double EvalRow::*field) {
  double total = 0.0;
  for (const auto& r : rows) total += r.*field;
  return total / static_cast<double>(rows.size());
}

}  // namespace

EvalReport run_eval(const std::filesystem::path& dir, nn::Generator* g, const PipelineConfig& c) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::io, dir.string() + " is not a directory");
  std::map<std::string, std::pair<std::filesystem::path, std::filesystem::path>> pairs;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !supported_extension(entry.path())) continue;
    std::string stem = entry.path().stem().string();
    if (strip_suffix(stem, "_gt")) {
      pairs[stem].first = entry.path();
    } else if (strip_suffix(stem, "_low")) {
      pairs[stem].second = entry.path();
    }
  }
  if (pairs.empty()) throw Error(ErrorCode::invalid_argument, "no image pairs found in " + dir.string());
  std::vector<std::string> names;
  for (const auto& [stem, files] : pairs) {
    if (files.first.empty() || files.second.empty()) {
      throw Error(ErrorCode::invalid_argument, "unpaired image '" + stem + "' in " + dir.string());
    }
    names.push_back(stem);
  }

  EvalReport report;
  report.rows.resize(names.size());
  parallel_for(names.size(), c.jobs, [&](std::size_t i) {
    const auto& [gt_path, low_path] = pairs.at(names[i]);
    const Raster truth = load_image(gt_path);
    const Raster low = load_image(low_path);
    if (!truth.same_shape(low)) {
      throw Error(ErrorCode::dimension_mismatch, "pair '" + names[i] + "' differs in shape");
    }
    DegradeParams params = c.degrade;
    const auto meta = dir / (names[i] + ".meta");
    if (std::filesystem::exists(meta)) params = read_sidecar(meta).params;
    const Raster toned = tone_map(low, c.tone, c, params);
    const Raster full = g ? dequantize(*g, toned, c.tiles) : toned;
    report.rows[i] = {names[i], psnr(low, truth), psnr(toned, truth), psnr(full, truth)};
  });
  report.mean = {"mean", mean_of(report.rows, &EvalRow::degraded), mean_of(report.rows, &EvalRow::tone),
                 mean_of(report.rows, &EvalRow::full)};
  return report;
}

void write_eval_table(const EvalReport& r, std::ostream& out) {
  auto cell = [](double v) {
    if (std::isinf(v)) return std::string("inf");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  out << "image\tdegraded\ttone\tfull\n";
  for (const auto& row : r.rows) {
    out << row.name << '\t' << cell(row.degraded) << '\t' << cell(row.tone) << '\t' << cell(row.full) << '\n';
  }
  out << r.mean.name << '\t' << cell(r.mean.degraded) << '\t' << cell(r.mean.tone) << '\t' << cell(r.mean.full) << '\n';
}

}  // namespace dlma
