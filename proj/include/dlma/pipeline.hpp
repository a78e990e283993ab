#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dlma/laic.hpp"
#include "dlma/synth.hpp"
#include "dlma/trainer.hpp"

namespace dlma {

/// How a capture is brought to normal exposure before dequantization.
enum class ToneMode { laic, linear, unstretch };

const char* to_string(ToneMode m);

struct PipelineConfig {
  DegradeParams degrade;
  LaicOptions laic;
  TrainConfig train;
  ToneMode tone = ToneMode::laic;
  TileOptions tiles;
  int jobs = 1;

  /// Throws Error(config) describing the first invalid field.
  void validate() const;
  friend bool operator==(const PipelineConfig&, const PipelineConfig&);
};

/// Every key with its current value, in a fixed order.
std::vector<std::pair<std::string, std::string>> config_entries(const PipelineConfig& c);
/// Throws Error(config) naming the key when it is unknown or its value is bad.
void set_config_entry(PipelineConfig& c, const std::string& key, const std::string& value);
bool is_config_key(const std::string& key);

/// Flat `key = value` lines; `#` starts a comment.
void apply_config_text(PipelineConfig& c, const std::string& text, const std::string& origin = "config");
void apply_config_file(PipelineConfig& c, const std::filesystem::path& path);
std::string dump_config(const PipelineConfig& c);

/// `bsd-global` (dim 1/30, gamma ratio 1.3, sigma 0.25, unstretch tone) or
/// `bsd-local` (dim 1/5, gamma ratio 1.5, LAIC tone). Training ranges are
/// pinned to the same values.
void apply_preset(PipelineConfig& c, const std::string& name);

/// Multiplies every channel by `gain`, or by 1 / max luma when unset; clamps.
Raster linear_stretch(const Raster& r, std::optional<double> gain = std::nullopt);

/// Tone mapping of a capture. `params` feeds the unstretch mode.
Raster tone_map(const Raster& capture, ToneMode mode, const PipelineConfig& c, const DegradeParams& params);

/// Calls fn(i) for i in [0, n) on up to `jobs` threads. The first exception
/// thrown is rethrown after all workers stop.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

// ---- synth -------------------------------------------------------------------

struct SynthReport {
  std::size_t written = 0;
  std::vector<std::string> failures;
  DegradeParams min_params, max_params;
};

/// For each manifest entry writes `<stem>_gt.png`, `<stem>_low.png` (the
/// capture) and `<stem>.meta`. Entries without parameters use c.degrade with
/// a per-entry seed derived from c.degrade.seed.
SynthReport run_synth(const std::filesystem::path& manifest, const std::filesystem::path& out_dir,
                      const PipelineConfig& c);

// ---- eval --------------------------------------------------------------------

struct EvalRow {
  std::string name;
  double degraded = 0.0;  // capture vs. ground truth
  double tone = 0.0;      // tone mapping only
  double full = 0.0;      // tone mapping + network
};

struct EvalReport {
  std::vector<EvalRow> rows;
  EvalRow mean;
};

/// Pairs `<stem>_gt.*` with `<stem>_low.*` in `dir`. A sidecar `<stem>.meta`
/// supplies unstretch parameters when present. Without a generator the
/// full-pipeline column repeats the tone column.
EvalReport run_eval(const std::filesystem::path& dir, nn::Generator* g, const PipelineConfig& c);

/// Tab-separated table with a trailing `mean` row; infinite PSNR prints `inf`.
void write_eval_table(const EvalReport& r, std::ostream& out);

}  // namespace dlma
