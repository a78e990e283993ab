#include <fstream>
#include <sstream>

#include "dlma/error.hpp"
#include "dlma/pipeline.hpp"

namespace dlma {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string grid_text(const std::optional<GridSize>& g) {
  return g ? std::to_string(g->height) + "x" + std::to_string(g->width) : "auto";
}

std::optional<GridSize> parse_grid(const std::string& key, const std::string& v) {
  if (v == "auto") return std::nullopt;
  const auto x = v.find('x');
  if (x == std::string::npos) throw Error(ErrorCode::config, "invalid value '" + v + "' for key '" + key + "'");
  return GridSize{static_cast<int>(parse_integer(key, v.substr(0, x))),
                  static_cast<int>(parse_integer(key, v.substr(x + 1)))};
}

ToneMode parse_tone(const std::string& key, const std::string& v) {
  if (v == "laic") return ToneMode::laic;
  if (v == "linear") return ToneMode::linear;
  if (v == "unstretch") return ToneMode::unstretch;
  throw Error(ErrorCode::config, "invalid value '" + v + "' for key '" + key + "' (laic, linear or unstretch)");
}

PricingRule parse_pricing(const std::string& key, const std::string& v) {
  if (v == "dantzig") return PricingRule::dantzig;
  if (v == "bland") return PricingRule::bland;
  throw Error(ErrorCode::config, "invalid value '" + v + "' for key '" + key + "' (dantzig or bland)");
}

// Keys owned here; training keys are delegated to the trainer module. `q`
// and `seed` are shared by synthesis and training.
bool set_local(PipelineConfig& c, const std::string& key, const std::string& v) {
  if (key == "dim_gain") c.degrade.dim_gain = parse_real(key, v);
  else if (key == "gamma_ratio") c.degrade.gamma_ratio = parse_real(key, v);
  else if (key == "noise_sigma") c.degrade.noise_sigma = parse_real(key, v);
  else if (key == "lambda2") c.laic.lambda2 = parse_real(key, v);
  else if (key == "radius") c.laic.radius = static_cast<int>(parse_integer(key, v));
  else if (key == "gain_grid") c.laic.gain_grid = parse_grid(key, v);
  else if (key == "solver_tol") c.laic.solver_tol = parse_real(key, v);
  else if (key == "pricing") c.laic.pricing = parse_pricing(key, v);
  else if (key == "lp_max_iterations") c.laic.max_iterations = parse_integer(key, v);
  else if (key == "tone") c.tone = parse_tone(key, v);
  else if (key == "tile") c.tiles.tile = static_cast<int>(parse_integer(key, v));
  else if (key == "tile_overlap") c.tiles.overlap = static_cast<int>(parse_integer(key, v));
  else if (key == "jobs") c.jobs = static_cast<int>(parse_integer(key, v));
  else return false;
  return true;
}

}  // namespace

const char* to_string(ToneMode m) {
  switch (m) {
    case ToneMode::laic: return "laic";
    case ToneMode::linear: return "linear";
    case ToneMode::unstretch: return "unstretch";
  }
  return "?";
}

bool operator==(const PipelineConfig& a, const PipelineConfig& b) {
  return config_entries(a) == config_entries(b);
}

void PipelineConfig::validate() const {
  try {
    degrade.validate();
    laic.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::config, e.what());
  }
  train.validate();
  if (train.q != degrade.q || train.seed != degrade.seed) {
    throw Error(ErrorCode::config, "q and seed must agree between synthesis and training");
  }
  if (tiles.tile < 2 || tiles.overlap < 1 || tiles.overlap >= tiles.tile) {
    throw Error(ErrorCode::config, "tile must exceed tile_overlap, which must be positive");
  }
  if (jobs < 1) throw Error(ErrorCode::config, "jobs must be at least 1");
}

std::vector<std::pair<std::string, std::string>> config_entries(const PipelineConfig& c) {
  std::vector<std::pair<std::string, std::string>> out{
      {"dim_gain", format_real(c.degrade.dim_gain)},
      {"gamma_ratio", format_real(c.degrade.gamma_ratio)},
      {"noise_sigma", format_real(c.degrade.noise_sigma)},
      {"lambda2", format_real(c.laic.lambda2)},
      {"radius", std::to_string(c.laic.radius)},
      {"gain_grid", grid_text(c.laic.gain_grid)},
      {"solver_tol", format_real(c.laic.solver_tol)},
      {"pricing", c.laic.pricing == PricingRule::bland ? "bland" : "dantzig"},
      {"lp_max_iterations", std::to_string(c.laic.max_iterations)},
      {"tone", to_string(c.tone)},
      {"tile", std::to_string(c.tiles.tile)},
      {"tile_overlap", std::to_string(c.tiles.overlap)},
      {"jobs", std::to_string(c.jobs)},
  };
  for (auto& kv : train_config_entries(c.train)) out.push_back(std::move(kv));
  return out;
}

bool is_config_key(const std::string& key) {
  for (const auto& [k, v] : config_entries(PipelineConfig{})) {
    if (k == key) return true;
  }
  return false;
}

void set_config_entry(PipelineConfig& c, const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (set_local(c, key, v)) return;
  if (!set_train_config_entry(c.train, key, v)) {
    throw Error(ErrorCode::config, "unknown configuration key '" + key + "'");
  }
  if (key == "q") c.degrade.q = c.train.q;
  if (key == "seed") c.degrade.seed = c.train.seed;
}

void apply_config_text(PipelineConfig& c, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::config, origin + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    try {
      set_config_entry(c, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorCode::config, origin + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void apply_config_file(PipelineConfig& c, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::config, "cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  apply_config_text(c, text.str(), path.string());
}

std::string dump_config(const PipelineConfig& c) {
  std::string out;
  for (const auto& [k, v] : config_entries(c)) out += k + " = " + v + "\n";
  return out;
}

void apply_preset(PipelineConfig& c, const std::string& name) {
  double dim = 0, gamma = 0;
  if (name == "bsd-global") {
    dim = 1.0 / 30.0;
    gamma = 1.3;
    c.tone = ToneMode::unstretch;
  } else if (name == "bsd-local") {
    dim = 1.0 / 5.0;
    gamma = 1.5;
    c.tone = ToneMode::laic;
  } else {
    throw Error(ErrorCode::config, "unknown preset '" + name + "' (bsd-global or bsd-local)");
  }
  c.degrade.dim_gain = dim;
  c.degrade.gamma_ratio = gamma;
  c.degrade.noise_sigma = 0.25;
  c.train.ranges.dim_gain_min = c.train.ranges.dim_gain_max = dim;
  c.train.ranges.gamma_ratio_min = c.train.ranges.gamma_ratio_max = gamma;
  c.train.ranges.sigma_min = c.train.ranges.sigma_max = 0.25;
}

}  // namespace dlma
