#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "kmcg/config.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

// Runs the CLI with stdout captured and stderr discarded.
Run cli(const std::string& args) {
  const std::string cmd = std::string(KMCG_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::string out;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, p)) out.append(buf, n);
  const int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

fs::path write_config(const fs::path& root) {
  std::ofstream f(root / "run.cfg");
  f << "paths.data_dir = " << (root / "data").string() << "\n"
    << "paths.checkpoint_dir = " << (root / "ckpt").string() << "\n"
    << "paths.report_dir = " << (root / "reports").string() << "\n"
    << "synth.sequences = 3\nsynth.frames = 40\nsynth.dims = 3\n"
    << "model.hidden = 8\nmodel.blocks = 1\nmodel.time_dim = 4\nmodel.kernel = 3\n"
    << "schedule.T = 100\ntrain.steps = 5\ntrain.batch_size = 2\ntrain.warmup = 1\n"
    << "train.loss_window = 2\nsampler.steps = 5\nkeyframes.count = 3\nkeyframes.min_gap = 5\n"
    << "cycle.samples = 2\n";
  return root / "run.cfg";
}

}  // namespace

TEST_CASE("help lists every flag") {
  const auto top = cli("--help");
  CHECK(top.code == 0);
  for (const char* s : {"synth", "train", "transfer", "cycle", "evaluate", "keyframes", "--config", "--seed", "--force"})
    CHECK(top.out.find(s) != std::string::npos);
  const auto sub = cli("transfer --help");
  CHECK(sub.code == 0);
  for (const auto& k : kmcg::config_keys()) {
    if (k.name == "seed") continue;
    CAPTURE(k.name);
    CHECK(sub.out.find("--" + k.name) != std::string::npos);
  }
}

TEST_CASE("usage errors exit 1") {
  CHECK(cli("").code == 1);
  CHECK(cli("bogus").code == 1);
  CHECK(cli("synth --no-such-flag").code == 1);
  CHECK(cli("synth --sampler.steps").code == 1);
  CHECK(cli("synth --sampler.steps ten").code == 1);
  CHECK(cli("train").code == 1);
  CHECK(cli("--config /nonexistent/run.cfg synth").code == 1);
}

TEST_CASE("pipeline through the CLI") {
  const auto root = kmcg::testing::scratch_dir("cli");
  const std::string c = "--config " + write_config(root).string() + " --seed 3 ";

  REQUIRE(cli(c + "synth").code == 0);
  CHECK(cli(c + "synth").code == 1);
  REQUIRE(cli(c + "train styleA styleB").code == 0);
  CHECK(cli(c + "train styleQ --force").code == 2);

  const auto src = (root / "data" / "styleA" / "seq0000.motion").string();
  const auto out = (root / "x" / "out.motion").string();
  REQUIRE(cli(c + "transfer --source " + src + " --from styleA --to styleB --output " + out + " --mode gradient").code == 0);
  CHECK(fs::exists(root / "x" / "out.diag.csv"));
  CHECK(cli(c + "transfer --source " + src + " --from styleA --to styleB --output " + out).code == 1);
  CHECK(cli(c + "transfer --source " + src + " --from styleA --to styleB --output " + out + " --force --mode explicit").code == 1);
  CHECK(cli(c + "transfer --source /nonexistent.motion --from styleA --to styleB --output " + out + " --force").code == 2);
  CHECK(cli(c + "transfer --from styleA --to styleB").code == 1);

  const auto data = (root / "data").string();
  const auto outs = (root / "outs").string();
  REQUIRE(cli(c + "transfer --source-dir " + data + "/styleA --from styleA --to styleB --output-dir " + outs + "/vanilla").code == 0);
  REQUIRE(cli(c + "transfer --source-dir " + data + "/styleA --from styleA --to styleB --output-dir " + outs + "/gradient --mode gradient").code == 0);
  const auto ev = cli(c + "evaluate --outputs " + outs + " --real " + data + "/styleB --sources " + data + "/styleA");
  CHECK(ev.code == 0);
  CHECK(ev.out.find("fpd.gradient = ") != std::string::npos);
  CHECK(cli(c + "evaluate --outputs " + data + " --real " + data + "/styleB --sources " + data + "/styleA --force").code == 2);

  const auto cyc = cli(c + "cycle --from styleA --to styleB");
  CHECK(cyc.code == 0);
  CHECK(cyc.out.find("cycle.mean = ") != std::string::npos);
  CHECK(cli(c + "cycle --from styleA --to styleB --force --samples 0").code == 1);

  const auto kf = cli(c + "keyframes " + src);
  CHECK(kf.code == 0);
  CHECK(kf.out.rfind("index saliency\n", 0) == 0);
  CHECK(cli(c + "keyframes " + (root / "run.cfg").string()).code == 2);

  // Flags override the config file.
  const auto kf1 = cli(c + "keyframes --keyframes.count 1 " + src);
  CHECK(std::count(kf1.out.begin(), kf1.out.end(), '\n') == 2);
}
