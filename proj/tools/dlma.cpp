// dlma: low-light restoration pipeline — synthesis, tone mapping, training,
// enhancement and evaluation.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "dlma/error.hpp"
#include "dlma/image_io.hpp"
#include "dlma/pipeline.hpp"

namespace {

using namespace dlma;

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct Common {
  std::string config_file;
  std::string preset;
  bool dump_config = false;
  std::map<std::string, std::string> overrides;  // key -> value from --<key>
};

PipelineConfig resolve(const Common& common) {
  PipelineConfig c;
  if (!common.preset.empty()) apply_preset(c, common.preset);
  if (!common.config_file.empty()) apply_config_file(c, common.config_file);
  for (const auto& [key, value] : common.overrides) set_config_entry(c, key, value);
  c.validate();
  return c;
}

std::string dashed(std::string key) {
  for (char& ch : key) {
    if (ch == '_') ch = '-';
  }
  return key;
}

void print_range(const char* name, double lo, double hi) {
  std::printf("  %-12s [%s, %s]\n", name, format_real(lo).c_str(), format_real(hi).c_str());
}

int cmd_synth(const PipelineConfig& c, const std::string& manifest, const std::string& out_dir) {
  const SynthReport r = run_synth(manifest, out_dir, c);
  for (const auto& f : r.failures) std::cerr << "dlma synth: " << f << "\n";
  std::printf("synthesized %zu pair(s) into %s\n", r.written, out_dir.c_str());
  if (r.written > 0) {
    print_range("dim_gain", r.min_params.dim_gain, r.max_params.dim_gain);
    print_range("gamma_ratio", r.min_params.gamma_ratio, r.max_params.gamma_ratio);
    print_range("q", r.min_params.q, r.max_params.q);
    print_range("noise_sigma", r.min_params.noise_sigma, r.max_params.noise_sigma);
  }
  return r.failures.empty() ? 0 : kExitRuntime;
}

int cmd_train(const PipelineConfig& c, const std::string& manifest, const std::string& out,
              const std::string& resume, std::string log_path) {
  const TrainingSet set = load_training_set(manifest);
  Trainer trainer(c.train);
  if (!resume.empty()) trainer.restore(load_checkpoint(resume));
  if (log_path.empty()) log_path = out + ".log";
  std::ofstream log(log_path, resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw Error(ErrorCode::io, "cannot write loss log " + log_path);
  if (resume.empty()) write_loss_header(log);
  const long start = trainer.iteration();
  const auto losses = train(trainer, set, {out, &log});
  std::printf("trained iterations %ld..%ld; checkpoint %s; log %s\n", start, trainer.iteration(), out.c_str(),
              log_path.c_str());
  if (!losses.empty()) {
    const auto& l = losses.back();
    std::printf("final l_inf %.6g  l_adv %.6g  l_disc %.6g\n", l.l_inf, l.l_adv, l.l_disc);
  }
  return 0;
}

struct EnhanceArgs {
  std::string input, output, checkpoint, meta;
  bool skip_network = false;
  std::optional<double> linear_gain;
  bool linear = false;
};

int cmd_enhance(const PipelineConfig& c, const EnhanceArgs& a) {
  if (!a.skip_network && a.checkpoint.empty()) {
    throw Error(ErrorCode::config, "enhance needs --checkpoint unless --skip-network is given");
  }
  const Raster input = load_image(a.input);
  DegradeParams params = c.degrade;
  if (!a.meta.empty()) params = read_sidecar(a.meta).params;
  const Raster toned = a.linear ? linear_stretch(input, a.linear_gain) : tone_map(input, c.tone, c, params);
  Raster out = toned;
  if (!a.skip_network) {
    nn::Generator g = load_generator(load_checkpoint(a.checkpoint));
    out = dequantize(g, toned, c.tiles);
  }
  save_image(out, a.output);
  return 0;
}

int cmd_eval(const PipelineConfig& c, const std::string& dir, const std::string& checkpoint) {
  std::optional<nn::Generator> g;
  if (!checkpoint.empty()) g.emplace(load_generator(load_checkpoint(checkpoint)));
  const EvalReport r = run_eval(dir, g ? &*g : nullptr, c);
  write_eval_table(r, std::cout);
  return 0;
}

int cmd_laic(const PipelineConfig& c, const std::string& input, const std::string& output, const std::string& lp) {
  const Raster img = load_image(input);
  if (!lp.empty()) {
    std::ofstream out(lp);
    if (!out) throw Error(ErrorCode::io, "cannot write " + lp);
    write_lp_format(grid_problem(img, c.laic).lp, out);
  }
  save_image(laic_enhance(img, c.laic), output);
  return 0;
}

bool usage_error(ErrorCode code) { return code == ErrorCode::config; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-light image restoration: synthesis, LAIC tone mapping, dequantization network"};
  app.require_subcommand(0, 1);
  Common common;
  app.add_option("--config", common.config_file, "Configuration file of 'key = value' lines");
  app.add_option("--preset", common.preset, "Parameter preset: bsd-global or bsd-local");
  app.add_flag("--dump-config", common.dump_config, "Print the resolved configuration and exit");
  for (const auto& [key, value] : config_entries(PipelineConfig{})) {
    std::string names = "--" + key;
    if (key.find('_') != std::string::npos) names += ",--" + dashed(key);
    app.add_option_function<std::string>(
           names, [&common, key = key](const std::string& v) { common.overrides[key] = v; },
           "Config key '" + key + "' (default " + value + ")")
        ->group("Configuration keys");
  }

  auto* synth = app.add_subcommand("synth", "Synthesize low-light training pairs from a manifest");
  std::string manifest, out_dir;
  synth->add_option("manifest", manifest, "Manifest of input images")->required();
  synth->add_option("out_dir", out_dir, "Output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "Train the dequantization network");
  std::string train_out, resume, log_path;
  train_cmd->add_option("manifest", manifest, "Manifest of ground-truth images")->required();
  train_cmd->add_option("-o,--out", train_out, "Checkpoint to write")->required();
  train_cmd->add_option("--resume", resume, "Checkpoint to continue from");
  train_cmd->add_option("--log", log_path, "Loss log (default: <out>.log)");

  auto* enhance = app.add_subcommand("enhance", "Tone-map a capture and remove quantization artifacts");
  EnhanceArgs ea;
  double gain = 0.0;
  enhance->add_option("input", ea.input, "Low-light input image")->required();
  enhance->add_option("output", ea.output, "Output image")->required();
  enhance->add_option("--checkpoint", ea.checkpoint, "Trained network checkpoint");
  enhance->add_flag("--skip-network", ea.skip_network, "Stop after tone mapping");
  enhance->add_option("--meta", ea.meta, "Sidecar supplying parameters for the unstretch tone mode");
  auto* linear_opt = enhance->add_option("--linear-stretch", gain, "Global linear gain (no value: max luma to 1)")
                         ->expected(0, 1);

  auto* eval = app.add_subcommand("eval", "PSNR table over a directory of synthesized pairs");
  std::string pairs_dir, eval_ckpt;
  eval->add_option("pairs_dir", pairs_dir, "Directory of <stem>_gt / <stem>_low images")->required();
  eval->add_option("--checkpoint", eval_ckpt, "Trained network checkpoint");

  auto* laic = app.add_subcommand("laic", "LAIC tone mapping only");
  std::string laic_in, laic_out, lp_path;
  laic->add_option("input", laic_in, "Input image")->required();
  laic->add_option("output", laic_out, "Output image")->required();
  laic->add_option("--dump-lp", lp_path, "Also write the solved LP in CPLEX LP text format");

  for (auto* sub : {synth, train_cmd, enhance, eval, laic}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  PipelineConfig config;
  try {
    config = resolve(common);
  } catch (const Error& e) {
    std::cerr << "dlma: " << e.what() << "\n";
    return kExitUsage;
  }
  if (common.dump_config) {
    std::cout << dump_config(config);
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(config, manifest, out_dir);
    if (train_cmd->parsed()) return cmd_train(config, manifest, train_out, resume, log_path);
    if (enhance->parsed()) {
      ea.linear = linear_opt->count() > 0;
      if (ea.linear && !linear_opt->results().empty() && !linear_opt->results().front().empty()) ea.linear_gain = gain;
      return cmd_enhance(config, ea);
    }
    if (eval->parsed()) return cmd_eval(config, pairs_dir, eval_ckpt);
    if (laic->parsed()) return cmd_laic(config, laic_in, laic_out, lp_path);
  } catch (const Error& e) {
    std::cerr << "dlma: " << to_string(e.code()) << ": " << e.what() << "\n";
    return usage_error(e.code()) ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "dlma: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
