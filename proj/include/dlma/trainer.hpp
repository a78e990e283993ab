#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dlma/losses.hpp"
#include "dlma/networks.hpp"
#include "dlma/synth.hpp"

namespace dlma {

struct TrainConfig {
  long iterations = 10000;
  int batch_size = 16;
  int patch_height = 32;
  int patch_width = 32;
  double lambda = 1e-3;  // weight of the adversarial term in L_G
  double lr_g = 1e-4;
  double lr_d = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
  int channels = 3;
  int residual_units = 16;
  int g_width = 64;
  int d_width = 64;
  double tail_init_std = 0.0;
  long checkpoint_interval = 1000;
  double q = 1.0 / 255.0;
  ParamRanges ranges;

  void validate() const;
  nn::GeneratorConfig generator() const;
  nn::DiscriminatorConfig discriminator() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Shortest round-trip text for a double.
std::string format_real(double v);
/// Text-to-number helpers for configuration values; errors name the key.
/// parse_real also accepts fractions such as `1/255`.
double parse_real(const std::string& key, const std::string& text);
std::int64_t parse_integer(const std::string& key, const std::string& text);
std::uint64_t parse_unsigned(const std::string& key, const std::string& text);

/// `key`/value pairs of every TrainConfig field, in a fixed order.
std::vector<std::pair<std::string, std::string>> train_config_entries(const TrainConfig& c);
/// Sets one field from text. Returns false for an unknown key; throws
/// Error(config) naming the key when the value does not parse.
bool set_train_config_entry(TrainConfig& c, const std::string& key, const std::string& value);
std::string train_config_text(const TrainConfig& c);
TrainConfig parse_train_config_text(const std::string& text);

// ---- optimizer -------------------------------------------------------------

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
};

/// Adaptive-moment descent over a fixed parameter list.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<nn::NamedTensor> params, double lr, double beta1, double beta2, double eps = 1e-8);

  void zero_grad();
  void step();

  long steps() const noexcept { return steps_; }
  void set_steps(long s) noexcept { steps_ = s; }
  const std::vector<nn::NamedTensor>& params() const noexcept { return params_; }
  std::vector<AdamState>& state() noexcept { return state_; }

 private:
  std::vector<nn::NamedTensor> params_;
  std::vector<AdamState> state_;
  double lr_ = 0.0, beta1_ = 0.0, beta2_ = 0.0, eps_ = 0.0;
  long steps_ = 0;
};

// ---- checkpoints -----------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { f32 = 1, f64 = 2, i64 = 3, bytes = 4 };

struct Record {
  std::string name;
  DType dtype = DType::bytes;
  std::vector<std::int64_t> dims;
  std::vector<std::uint8_t> payload;  // little-endian

  static Record reals(std::string name, std::vector<std::int64_t> dims, const std::vector<double>& values);
  static Record integer(std::string name, std::int64_t value);
  static Record text(std::string name, const std::string& value);
  std::vector<double> as_reals() const;
  std::int64_t as_integer() const;
  std::string as_text() const;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::vector<Record> records;

  const Record& get(const std::string& name) const;
  const Record* find(const std::string& name) const;
};

/// `DLMA`, u32 version, u32 record count, then per record: u32 name length,
/// name, u8 dtype, u32 rank, i64 dims, u64 payload bytes, payload, u32 CRC-32
/// of everything in the record before it.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Generator described by a checkpoint's config snapshot, with its weights.
nn::Generator load_generator(const Checkpoint& c);

// ---- training --------------------------------------------------------------

struct TrainingSet {
  std::vector<Raster> images;
  std::vector<std::optional<DegradeParams>> fixed_params;  // manifest-pinned parameters
};

/// Loads every manifest image; errors on an empty manifest.
TrainingSet load_training_set(const std::filesystem::path& manifest);

class Trainer {
 public:
  explicit Trainer(const TrainConfig& config);
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  const TrainConfig& config() const noexcept { return config_; }
  long iteration() const noexcept { return iteration_; }
  nn::Generator& generator() noexcept { return g_; }
  nn::Discriminator& discriminator() noexcept { return d_; }

  /// Batch for `iteration`: a pure function of the seed, the set and the index.
  std::vector<TrainingSample> sample_batch(const TrainingSet& set, long iteration) const;

  /// One D update on real vs. detached fake, then one G update on
  /// L_inf + lambda L_adv. Throws Error(non_finite) naming the loss.
  nn::LossBundle train_step(const std::vector<TrainingSample>& batch);

  /// L_D on a batch without changing any state.
  double discriminator_loss(const std::vector<TrainingSample>& batch);

  Checkpoint checkpoint();
  /// Restores weights, statistics, optimizer state and iteration. The
  /// snapshot's config must match this trainer's.
  void restore(const Checkpoint& c);

 private:
  TrainConfig config_;
  nn::Generator g_;
  nn::Discriminator d_;
  Adam opt_g_;
  Adam opt_d_;
  long iteration_ = 0;
};

struct TrainOptions {
  std::optional<std::filesystem::path> checkpoint_path;
  std::ostream* log = nullptr;  // tab-separated `iter l_inf l_adv l_disc`
};

/// Runs train_step until config.iterations, writing periodic checkpoints and
/// the loss log. Returns the losses of the iterations run.
std::vector<nn::LossBundle> train(Trainer& trainer, const TrainingSet& set, const TrainOptions& options);

/// Writes the loss-log header line.
void write_loss_header(std::ostream& out);

// ---- inference -------------------------------------------------------------

struct TileOptions {
  int tile = 128;
  int overlap = 16;
};

/// clamp(stretched + G(stretched), 0, 1) in inference mode, in overlapping
/// tiles blended with linear feathering.
Raster dequantize(nn::Generator& g, const Raster& stretched, const TileOptions& tiles = {});

}  // namespace dlma
