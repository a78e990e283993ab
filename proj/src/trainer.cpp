#include "dlma/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <type_traits>

#include "dlma/error.hpp"
#include "dlma/image_io.hpp"

namespace dlma {
namespace {

constexpr std::uint64_t kGeneratorInitStream = 0;
constexpr std::uint64_t kOrderStream = 1;
constexpr std::uint64_t kDiscriminatorInitStream = 2;
constexpr std::uint64_t kBatchStreamBase = 1ULL << 32;

template <class Int>
Int parse_int(const std::string& key, const std::string& text) {
  if constexpr (std::is_signed_v<Int>) {
    const std::int64_t v = parse_integer(key, text);
    if (v < std::numeric_limits<Int>::min() || v > std::numeric_limits<Int>::max()) {
      throw Error(ErrorCode::config, "value '" + text + "' for key '" + key + "' is out of range");
    }
    return static_cast<Int>(v);
  } else {
    return parse_unsigned(key, text);
  }
}

template <class Int>
std::string int_text(Int v) {
  return std::to_string(v);
}

void check_finite(double v, const char* which, long iteration) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::non_finite,
                std::string(which) + " is not finite (" + format_real(v) + ") at iteration " + std::to_string(iteration));
  }
}

}  // namespace

namespace {
Error bad_value(const std::string& key, const std::string& value) {
  return Error(ErrorCode::config, "invalid value '" + value + "' for key '" + key + "'");
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) throw bad_value(key, text);
  return v;
}
}  // namespace

double parse_real(const std::string& key, const std::string& text) {
  // Accepts plain reals and fractions such as 1/255.
  const auto slash = text.find('/');
  if (slash != std::string::npos) {
    return parse_real(key, text.substr(0, slash)) / parse_real(key, text.substr(slash + 1));
  }
  const double v = parse_number<double>(key, text);
  if (!std::isfinite(v)) throw bad_value(key, text);
  return v;
}

std::int64_t parse_integer(const std::string& key, const std::string& text) {
  return parse_number<std::int64_t>(key, text);
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  return parse_number<std::uint64_t>(key, text);
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::config, what); };
  if (iterations < 1) fail("iterations must be positive");
  if (batch_size < 1) fail("batch_size must be positive");
  if (patch_height < 1 || patch_width < 1) fail("patch dimensions must be positive");
  if (!(lambda >= 0)) fail("lambda must be non-negative");
  if (!(lr_g >= 0) || !(lr_d >= 0)) fail("learning rates must be non-negative");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) fail("moment coefficients must lie in [0,1)");
  if (channels != 1 && channels != 3) fail("channels must be 1 or 3");
  if (residual_units < 0) fail("residual_units must be non-negative");
  if (g_width < 1 || d_width < 1) fail("network widths must be positive");
  if (!(tail_init_std >= 0)) fail("tail_init_std must be non-negative");
  if (checkpoint_interval < 0) fail("checkpoint_interval must be non-negative");
  if (!(q > 0)) fail("q must be positive");
  try {
    ranges.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
}

nn::GeneratorConfig TrainConfig::generator() const {
  return {channels, g_width, residual_units, tail_init_std};
}

nn::DiscriminatorConfig TrainConfig::discriminator() const {
  return {channels, d_width, patch_height, patch_width};
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<std::pair<std::string, std::string>> train_config_entries(const TrainConfig& c) {
  return {
      {"iterations", int_text(c.iterations)},
      {"batch_size", int_text(c.batch_size)},
      {"patch_height", int_text(c.patch_height)},
      {"patch_width", int_text(c.patch_width)},
      {"lambda", format_real(c.lambda)},
      {"lr_g", format_real(c.lr_g)},
      {"lr_d", format_real(c.lr_d)},
      {"beta1", format_real(c.beta1)},
      {"beta2", format_real(c.beta2)},
      {"seed", int_text(c.seed)},
      {"channels", int_text(c.channels)},
      {"residual_units", int_text(c.residual_units)},
      {"g_width", int_text(c.g_width)},
      {"d_width", int_text(c.d_width)},
      {"tail_init_std", format_real(c.tail_init_std)},
      {"checkpoint_interval", int_text(c.checkpoint_interval)},
      {"q", format_real(c.q)},
      {"dim_gain_min", format_real(c.ranges.dim_gain_min)},
      {"dim_gain_max", format_real(c.ranges.dim_gain_max)},
      {"gamma_ratio_min", format_real(c.ranges.gamma_ratio_min)},
      {"gamma_ratio_max", format_real(c.ranges.gamma_ratio_max)},
      {"sigma_min", format_real(c.ranges.sigma_min)},
      {"sigma_max", format_real(c.ranges.sigma_max)},
  };
}

bool set_train_config_entry(TrainConfig& c, const std::string& key, const std::string& v) {
  if (key == "iterations") c.iterations = parse_int<long>(key, v);
  else if (key == "batch_size") c.batch_size = parse_int<int>(key, v);
  else if (key == "patch_height") c.patch_height = parse_int<int>(key, v);
  else if (key == "patch_width") c.patch_width = parse_int<int>(key, v);
  else if (key == "lambda") c.lambda = parse_real(key, v);
  else if (key == "lr_g") c.lr_g = parse_real(key, v);
  else if (key == "lr_d") c.lr_d = parse_real(key, v);
  else if (key == "beta1") c.beta1 = parse_real(key, v);
  else if (key == "beta2") c.beta2 = parse_real(key, v);
  else if (key == "seed") c.seed = parse_int<std::uint64_t>(key, v);
  else if (key == "channels") c.channels = parse_int<int>(key, v);
  else if (key == "residual_units") c.residual_units = parse_int<int>(key, v);
  else if (key == "g_width") c.g_width = parse_int<int>(key, v);
  else if (key == "d_width") c.d_width = parse_int<int>(key, v);
  else if (key == "tail_init_std") c.tail_init_std = parse_real(key, v);
  else if (key == "checkpoint_interval") c.checkpoint_interval = parse_int<long>(key, v);
  else if (key == "q") c.q = parse_real(key, v);
  else if (key == "dim_gain_min") c.ranges.dim_gain_min = parse_real(key, v);
  else if (key == "dim_gain_max") c.ranges.dim_gain_max = parse_real(key, v);
  else if (key == "gamma_ratio_min") c.ranges.gamma_ratio_min = parse_real(key, v);
  else if (key == "gamma_ratio_max") c.ranges.gamma_ratio_max = parse_real(key, v);
  else if (key == "sigma_min") c.ranges.sigma_min = parse_real(key, v);
  else if (key == "sigma_max") c.ranges.sigma_max = parse_real(key, v);
  else return false;
  return true;
}

std::string train_config_text(const TrainConfig& c) {
  std::string out;
  for (const auto& [k, v] : train_config_entries(c)) out += k + " = " + v + "\n";
  return out;
}

TrainConfig parse_train_config_text(const std::string& text) {
  TrainConfig c;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    if (!set_train_config_entry(c, key, trim(line.substr(eq + 1)))) {
      throw Error(ErrorCode::config, "unknown configuration key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

// ---- Trainer -----------------------------------------------------------------

TrainingSet load_training_set(const std::filesystem::path& manifest) {
  const auto entries = read_manifest(manifest);
  if (entries.empty()) throw Error(ErrorCode::config, "training manifest " + manifest.string() + " lists no images");
  TrainingSet set;
  for (const auto& e : entries) {
    set.images.push_back(load_image(e.input));
    set.fixed_params.push_back(e.has_params ? std::optional<DegradeParams>(e.params) : std::nullopt);
  }
  return set;
}

Trainer::Trainer(const TrainConfig& config)
    : config_(config),
      g_([&] {
        config.validate();
        Rng rng(derive_seed(config.seed, kGeneratorInitStream));
        return nn::Generator(config.generator(), rng);
      }()),
      d_([&] {
        Rng rng(derive_seed(config.seed, kDiscriminatorInitStream));
        return nn::Discriminator(config.discriminator(), rng);
      }()) {
  opt_g_ = Adam(g_.parameters(), config_.lr_g, config_.beta1, config_.beta2);
  opt_d_ = Adam(d_.parameters(), config_.lr_d, config_.beta1, config_.beta2);
}

std::vector<TrainingSample> Trainer::sample_batch(const TrainingSet& set, long iteration) const {
  const std::size_t n = set.images.size();
  if (n == 0) throw Error(ErrorCode::invalid_argument, "training set is empty");
  Rng rng(derive_seed(config_.seed, kBatchStreamBase + static_cast<std::uint64_t>(iteration)));
  std::vector<TrainingSample> batch;
  long cached_epoch = -1;
  std::vector<std::size_t> order(n);
  for (int b = 0; b < config_.batch_size; ++b) {
    const long k = iteration * config_.batch_size + b;
    const long epoch = k / static_cast<long>(n);
    if (epoch != cached_epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng shuffle(derive_seed(derive_seed(config_.seed, kOrderStream), static_cast<std::uint64_t>(epoch)));
      std::shuffle(order.begin(), order.end(), shuffle);
      cached_epoch = epoch;
    }
    const std::size_t idx = order[static_cast<std::size_t>(k % static_cast<long>(n))];
    const Raster& img = set.images[idx];
    if (img.channels() != config_.channels) {
      throw Error(ErrorCode::dimension_mismatch, "training image " + std::to_string(idx) + " has " +
                                                     std::to_string(img.channels()) + " channels, expected " +
                                                     std::to_string(config_.channels));
    }
    const DegradeParams p = set.fixed_params[idx] ? *set.fixed_params[idx] : sample_params(config_.ranges, config_.q, rng);
    batch.push_back(make_training_pair(img, p, config_.patch_height, config_.patch_width, rng));
  }
  return batch;
}

namespace {

struct PreparedBatch {
  nn::Tensor degraded;
  nn::Tensor real;
  nn::BarrierTarget target;
};

PreparedBatch prepare(const std::vector<TrainingSample>& batch) {
  std::vector<const Raster*> degraded, real;
  std::vector<const TrainingSample*> samples;
  for (const auto& s : batch) {
    degraded.push_back(&s.degraded);
    real.push_back(&s.ground_truth);
    samples.push_back(&s);
  }
  return {nn::images_to_tensor(degraded), nn::images_to_tensor(real), nn::barrier_target(samples)};
}

}  // namespace

nn::LossBundle Trainer::train_step(const std::vector<TrainingSample>& batch) {
  using nn::NormMode;
  const PreparedBatch pb = prepare(batch);
  nn::LossBundle out;

  nn::Tensor fake = g_.restore(pb.degraded, NormMode::training);

  opt_d_.zero_grad();
  nn::Tensor d_real = d_.forward(pb.real, NormMode::training);
  nn::Tensor d_fake = d_.forward(fake.detach(), NormMode::training);
  nn::Tensor l_disc = nn::loss_disc(d_real, d_fake);
  out.l_disc = l_disc.item();
  check_finite(out.l_disc, "L_D", iteration_);
  l_disc.backward();
  opt_d_.step();

  opt_g_.zero_grad();
  nn::Tensor d_gen = d_.forward(fake, NormMode::training, false);
  nn::Tensor l_inf = nn::loss_linf(fake, pb.target);
  nn::Tensor l_adv = nn::loss_adv(d_gen);
  nn::Tensor l_gen = nn::loss_generator_total(l_inf, l_adv, config_.lambda);
  out.l_inf = l_inf.item();
  out.l_adv = l_adv.item();
  out.l_gen = l_gen.item();
  check_finite(out.l_inf, "L_inf", iteration_);
  check_finite(out.l_adv, "L_adv", iteration_);
  l_gen.backward();
  opt_g_.step();

  ++iteration_;
  return out;
}

double Trainer::discriminator_loss(const std::vector<TrainingSample>& batch) {
  using nn::NormMode;
  nn::NoGradGuard no_grad;
  const PreparedBatch pb = prepare(batch);
  nn::Tensor fake = g_.restore(pb.degraded, NormMode::training, false);
  nn::Tensor d_real = d_.forward(pb.real, NormMode::training, false);
  nn::Tensor d_fake = d_.forward(fake, NormMode::training, false);
  return nn::loss_disc(d_real, d_fake).item();
}

namespace {

std::vector<std::int64_t> dims_of(const nn::Tensor& t) {
  return std::vector<std::int64_t>(t.shape().begin(), t.shape().end());
}

void add_network(Checkpoint& c, std::vector<nn::NamedTensor> params, std::vector<nn::NamedBuffer> buffers) {
  for (const auto& p : params) {
    c.records.push_back(Record::reals(p.name, dims_of(*p.tensor), {p.tensor->data().begin(), p.tensor->data().end()}));
  }
  for (const auto& b : buffers) {
    c.records.push_back(Record::reals(b.name, {static_cast<std::int64_t>(b.values->size())}, *b.values));
  }
}

void add_optimizer(Checkpoint& c, const std::string& prefix, Adam& opt) {
  c.records.push_back(Record::integer(prefix + ".steps", opt.steps()));
  for (std::size_t k = 0; k < opt.params().size(); ++k) {
    const auto& p = opt.params()[k];
    c.records.push_back(Record::reals(prefix + ".m." + p.name, dims_of(*p.tensor), opt.state()[k].m));
    c.records.push_back(Record::reals(prefix + ".v." + p.name, dims_of(*p.tensor), opt.state()[k].v));
  }
}

void copy_reals(const Checkpoint& c, const std::string& name, std::span<double> dst) {
  const std::vector<double> v = c.get(name).as_reals();
  if (v.size() != dst.size()) {
    throw Error(ErrorCode::dimension_mismatch, "checkpoint record '" + name + "' has " + std::to_string(v.size()) +
                                                   " values, expected " + std::to_string(dst.size()));
  }
  std::copy(v.begin(), v.end(), dst.begin());
}

void load_network(const Checkpoint& c, std::vector<nn::NamedTensor> params, std::vector<nn::NamedBuffer> buffers) {
  for (auto& p : params) copy_reals(c, p.name, p.tensor->data());
  for (auto& b : buffers) copy_reals(c, b.name, *b.values);
}

void load_optimizer(const Checkpoint& c, const std::string& prefix, Adam& opt) {
  opt.set_steps(c.get(prefix + ".steps").as_integer());
  for (std::size_t k = 0; k < opt.params().size(); ++k) {
    const auto& p = opt.params()[k];
    copy_reals(c, prefix + ".m." + p.name, opt.state()[k].m);
    copy_reals(c, prefix + ".v." + p.name, opt.state()[k].v);
  }
}

// Fields that may legitimately change when a run is resumed.
TrainConfig resumable_view(TrainConfig c) {
  c.iterations = 1;
  c.checkpoint_interval = 0;
  return c;
}

}  // namespace

Checkpoint Trainer::checkpoint() {
  Checkpoint c;
  c.records.push_back(Record::text("config", train_config_text(config_)));
  c.records.push_back(Record::integer("iteration", iteration_));
  add_network(c, g_.parameters(), g_.buffers());
  add_network(c, d_.parameters(), d_.buffers());
  add_optimizer(c, "adam.g", opt_g_);
  add_optimizer(c, "adam.d", opt_d_);
  return c;
}

void Trainer::restore(const Checkpoint& c) {
  const TrainConfig saved = parse_train_config_text(c.get("config").as_text());
  if (!(resumable_view(saved) == resumable_view(config_))) {
    throw Error(ErrorCode::config, "checkpoint was written with a different training configuration");
  }
  load_network(c, g_.parameters(), g_.buffers());
  load_network(c, d_.parameters(), d_.buffers());
  load_optimizer(c, "adam.g", opt_g_);
  load_optimizer(c, "adam.d", opt_d_);
  iteration_ = c.get("iteration").as_integer();
}

nn::Generator load_generator(const Checkpoint& c) {
  const TrainConfig config = parse_train_config_text(c.get("config").as_text());
  Rng rng(0);
  nn::Generator g(config.generator(), rng);
  load_network(c, g.parameters(), g.buffers());
  return g;
}

void write_loss_header(std::ostream& out) { out << "iter\tl_inf\tl_adv\tl_disc\n"; }

std::vector<nn::LossBundle> train(Trainer& trainer, const TrainingSet& set, const TrainOptions& options) {
  std::vector<nn::LossBundle> losses;
  const TrainConfig& c = trainer.config();
  while (trainer.iteration() < c.iterations) {
    const long it = trainer.iteration();
    const nn::LossBundle l = trainer.train_step(trainer.sample_batch(set, it));
    losses.push_back(l);
    if (options.log) {
      char line[160];
      std::snprintf(line, sizeof line, "%ld\t%.10g\t%.10g\t%.10g\n", it, l.l_inf, l.l_adv, l.l_disc);
      *options.log << line << std::flush;
    }
    const bool periodic = c.checkpoint_interval > 0 && trainer.iteration() % c.checkpoint_interval == 0;
    if (options.checkpoint_path && (periodic || trainer.iteration() == c.iterations)) {
      save_checkpoint(trainer.checkpoint(), *options.checkpoint_path);
    }
  }
  return losses;
}

}  // namespace dlma
