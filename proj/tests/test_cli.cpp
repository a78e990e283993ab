#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dlma/error.hpp"
#include "dlma/image_io.hpp"
#include "dlma/pipeline.hpp"
#include "toy_images.hpp"

namespace fs = std::filesystem;
using namespace dlma;

namespace {

struct CliResult {
  int status;
  std::string out;
};

// Runs the dlma binary with `args`; stderr is folded into the captured output.
CliResult dlma_cli(const std::string& args) {
  const std::string cmd = std::string(DLMA_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string out;
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe)) out += buf;
  const int raw = pclose(pipe);
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, out};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dlma_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Three small toy images plus a manifest listing them.
fs::path toy_corpus(const fs::path& dir) {
  std::ofstream m(dir / "manifest.txt");
  for (int i = 0; i < 3; ++i) {
    const std::string name = "toy" + std::to_string(i) + ".png";
    save_image(dlma::testing::toy_image(24, 24, 3, 40 + i), dir / name);
    m << name << "\n";
  }
  return dir / "manifest.txt";
}

}  // namespace

TEST(Config, DefaultsValidate) { EXPECT_NO_THROW(PipelineConfig{}.validate()); }

TEST(Config, DumpRoundTrip) {
  PipelineConfig c;
  apply_preset(c, "bsd-local");
  set_config_entry(c, "lambda2", "0.125");
  set_config_entry(c, "gain_grid", "8x12");
  set_config_entry(c, "seed", "17");
  PipelineConfig d;
  apply_config_text(d, dump_config(c));
  EXPECT_EQ(d, c);
  EXPECT_EQ(dump_config(d), dump_config(c));
}

TEST(Config, SharedKeys) {
  PipelineConfig c;
  set_config_entry(c, "q", "1/64");
  set_config_entry(c, "seed", "9");
  EXPECT_EQ(c.degrade.q, 1.0 / 64.0);
  EXPECT_EQ(c.train.q, 1.0 / 64.0);
  EXPECT_EQ(c.degrade.seed, 9u);
  EXPECT_EQ(c.train.seed, 9u);
}

TEST(Config, Errors) {
  PipelineConfig c;
  try {
    set_config_entry(c, "bogus", "1");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config);
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
  try {
    apply_config_text(c, "# header\nradius = 2\nradius = two\n", "f.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("f.cfg:3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(apply_config_text(c, "no equals sign\n"), Error);
  EXPECT_THROW(apply_preset(c, "nope"), Error);
  c = {};
  c.jobs = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Config, Presets) {
  PipelineConfig g;
  apply_preset(g, "bsd-global");
  EXPECT_DOUBLE_EQ(g.degrade.dim_gain, 1.0 / 30.0);
  EXPECT_EQ(g.degrade.gamma_ratio, 1.3);
  EXPECT_EQ(g.degrade.noise_sigma, 0.25);
  EXPECT_EQ(g.tone, ToneMode::unstretch);
  EXPECT_EQ(g.train.ranges.dim_gain_min, g.degrade.dim_gain);
  EXPECT_EQ(g.train.ranges.dim_gain_max, g.degrade.dim_gain);
  PipelineConfig l;
  apply_preset(l, "bsd-local");
  EXPECT_DOUBLE_EQ(l.degrade.dim_gain, 0.2);
  EXPECT_EQ(l.degrade.gamma_ratio, 1.5);
  EXPECT_EQ(l.tone, ToneMode::laic);
}

TEST(Pipeline, LinearStretch) {
  const Raster r(1, 2, 1, {0.1, 0.25});
  const Raster s = linear_stretch(r);
  EXPECT_DOUBLE_EQ(s.at(0, 0), 0.4);
  EXPECT_DOUBLE_EQ(s.at(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(linear_stretch(r, 5.0).at(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(linear_stretch(r, 2.0).at(0, 0), 0.2);
  EXPECT_THROW(linear_stretch(r, -1.0), Error);
}

TEST(Pipeline, ParallelForCoversAllAndRethrows) {
  std::vector<int> hits(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 7) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

TEST(Pipeline, SynthThenEval) {
  const fs::path dir = scratch("synth_eval");
  const fs::path manifest = toy_corpus(dir);
  PipelineConfig c;
  apply_preset(c, "bsd-global");
  c.jobs = 2;
  const SynthReport r = run_synth(manifest, dir / "pairs", c);
  EXPECT_EQ(r.written, 3u);
  EXPECT_TRUE(r.failures.empty());
  for (int i = 0; i < 3; ++i) {
    const std::string stem = "toy" + std::to_string(i);
    ASSERT_TRUE(fs::exists(dir / "pairs" / (stem + "_gt.png")));
    ASSERT_TRUE(fs::exists(dir / "pairs" / (stem + "_low.png")));
    // The stored capture equals Q(a J^g) + n from the sidecar.
    const Sidecar side = read_sidecar(dir / "pairs" / (stem + ".meta"));
    const Raster gt = load_image(dir / "pairs" / (stem + "_gt.png"));
    const Raster low = load_image(dir / "pairs" / (stem + "_low.png"));
    for (std::size_t k = 0; k < low.size(); ++k) {
      const double pre = quantize(side.params.dim_gain * std::pow(gt.data()[k], side.params.gamma_ratio), side.params.q);
      EXPECT_NEAR(low.data()[k], pre + side.noise_map[k], 1e-6);
    }
  }
  const EvalReport e = run_eval(dir / "pairs", nullptr, c);
  ASSERT_EQ(e.rows.size(), 3u);
  for (const auto& row : e.rows) {
    EXPECT_GT(row.tone, row.degraded);
    EXPECT_EQ(row.full, row.tone);
  }
  std::ostringstream table;
  write_eval_table(e, table);
  EXPECT_EQ(table.str().substr(0, table.str().find('\n')), "image\tdegraded\ttone\tfull");
  EXPECT_NE(table.str().find("\nmean\t"), std::string::npos);

  fs::remove(dir / "pairs" / "toy1_low.png");
  EXPECT_THROW(run_eval(dir / "pairs", nullptr, c), Error);
}

// ---- the binary ------------------------------------------------------------------

TEST(Binary, HelpAndDumpConfig) {
  EXPECT_EQ(dlma_cli("--help").status, 0);
  const CliResult dump = dlma_cli("--preset bsd-local --radius 3 --dump-config");
  ASSERT_EQ(dump.status, 0) << dump.out;
  PipelineConfig c;
  apply_config_text(c, dump.out);
  EXPECT_EQ(c.laic.radius, 3);
  EXPECT_EQ(c.degrade.gamma_ratio, 1.5);
}

TEST(Binary, FlagsOverrideFile) {
  const fs::path dir = scratch("precedence");
  std::ofstream(dir / "a.cfg") << "radius = 4\nlambda2 = 0.5\n";
  const CliResult r = dlma_cli("--config " + (dir / "a.cfg").string() + " --lambda2 0.25 --dump-config");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("radius = 4\n"), std::string::npos);
  EXPECT_NE(r.out.find("lambda2 = 0.25\n"), std::string::npos);
}

TEST(Binary, ExitCodes) {
  EXPECT_EQ(dlma_cli("").status, 1);
  EXPECT_EQ(dlma_cli("frobnicate").status, 1);
  EXPECT_EQ(dlma_cli("--iterations 0 --dump-config").status, 1);
  const CliResult bad_key = dlma_cli("--config /nonexistent.cfg --dump-config");
  EXPECT_EQ(bad_key.status, 1);
  EXPECT_EQ(dlma_cli("enhance in.png out.png").status, 1);
  EXPECT_EQ(dlma_cli("eval /nonexistent/pairs").status, 2);
  EXPECT_EQ(dlma_cli("laic /nonexistent.png out.png").status, 2);
}

TEST(Binary, EndToEnd) {
  const fs::path dir = scratch("e2e");
  const fs::path manifest = toy_corpus(dir);
  const std::string common = "--preset bsd-global --residual-units 1 --g-width 4 --d-width 4 --batch-size 2 "
                             "--patch-height 16 --patch-width 16 --iterations 3 ";
  CliResult r = dlma_cli(common + "synth " + manifest.string() + " " + (dir / "pairs").string());
  ASSERT_EQ(r.status, 0) << r.out;
  r = dlma_cli(common + "train " + manifest.string() + " -o " + (dir / "g.ckpt").string());
  ASSERT_EQ(r.status, 0) << r.out;
  ASSERT_TRUE(fs::exists(dir / "g.ckpt"));
  std::ifstream log(dir / "g.ckpt.log");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) ++lines;
  EXPECT_EQ(lines, 4);

  r = dlma_cli(common + "enhance " + (dir / "pairs" / "toy0_low.png").string() + " " + (dir / "out.png").string() +
               " --checkpoint " + (dir / "g.ckpt").string() + " --meta " + (dir / "pairs" / "toy0.meta").string());
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(load_image(dir / "out.png").height(), 24);

  r = dlma_cli(common + "eval " + (dir / "pairs").string() + " --checkpoint " + (dir / "g.ckpt").string());
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(r.out.rfind("image\tdegraded\ttone\tfull\n", 0), 0u) << r.out;

  r = dlma_cli("--radius 1 laic " + (dir / "toy0.png").string() + " " + (dir / "laic.png").string() + " --dump-lp " +
               (dir / "p.lp").string());
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_TRUE(fs::exists(dir / "laic.png"));
  std::ifstream lp(dir / "p.lp");
  const std::string text((std::istreambuf_iterator<char>(lp)), {});
  EXPECT_NE(text.find("\nMinimize\n"), std::string::npos);
  EXPECT_NE(text.find("\nEnd\n"), std::string::npos);

  r = dlma_cli("enhance " + (dir / "toy0.png").string() + " " + (dir / "lin.png").string() +
               " --skip-network --linear-stretch 2");
  EXPECT_EQ(r.status, 0) << r.out;
}
