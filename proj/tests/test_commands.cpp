#include <fstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "kmcg/commands.hpp"
#include "kmcg/error.hpp"

using namespace kmcg;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_run(const fs::path& root) {
  RunConfig cfg;
  cfg.data_dir = root / "data";
  cfg.checkpoint_dir = root / "ckpt";
  cfg.report_dir = root / "reports";
  cfg.seed = 9;
  cfg.synth.sequences = 4;
  cfg.synth.frames = 40;
  cfg.synth.dims = 3;
  cfg.model.hidden = 8;
  cfg.model.blocks = 1;
  cfg.model.time_dim = 4;
  cfg.model.kernel = 3;
  cfg.model.T = 100;
  cfg.train.steps = 10;
  cfg.train.batch_size = 2;
  cfg.train.warmup = 2;
  cfg.train.loss_window = 5;
  cfg.train.crop = 16;
  cfg.sampler.num_steps = 5;
  cfg.keyframes = {3, 5};
  cfg.cycle_samples = 2;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::contract;
}

}  // namespace

TEST_CASE("command pipeline on a tiny run") {
  const auto root = kmcg::testing::scratch_dir("pipeline");
  RunConfig cfg = tiny_run(root);

  cmd_synth(cfg, false);
  CHECK(read_manifest(cfg.data_dir / "styleA").size() == 4);
  CHECK(read_manifest(cfg.data_dir / "styleB").size() == 4);
  const std::string first = slurp(cfg.data_dir / "styleA" / "seq0000.motion");
  CHECK(kind_of([&] { cmd_synth(cfg, false); }) == ErrorKind::usage);
  cmd_synth(cfg, true);
  CHECK(slurp(cfg.data_dir / "styleA" / "seq0000.motion") == first);
  RunConfig other = cfg;
  other.seed = 10;
  other.data_dir = root / "data2";
  cmd_synth(other, false);
  const auto a1 = load_motion(cfg.data_dir / "styleA" / "seq0000.motion").motion.frames;
  const auto a2 = load_motion(other.data_dir / "styleA" / "seq0000.motion").motion.frames;
  CHECK(a1.rows() == a2.rows());
  CHECK(a1 != a2);

  const auto ck = cmd_train(cfg, "styleA", false);
  cmd_train(cfg, "styleB", false);
  const std::string bytes = slurp(ck);
  CHECK(kind_of([&] { cmd_train(cfg, "styleA", false); }) == ErrorKind::usage);
  cmd_train(cfg, "styleA", true);
  CHECK(slurp(ck) == bytes);
  CHECK(kind_of([&] { cmd_train(cfg, "styleZ", false); }) == ErrorKind::data);
  CHECK(kind_of([&] { cmd_train(cfg, "../x", false); }) == ErrorKind::usage);

  // Single transfer with its diagnostics trace.
  cfg.mode = TransferMode::gradient;
  const auto out = root / "single" / "out.motion";
  cmd_transfer(cfg, cfg.data_dir / "styleA" / "seq0001.motion", "styleA", "styleB", out, false);
  CHECK(load_motion(out).motion.domain == "styleB");
  const std::string diag = slurp(root / "single" / "out.diag.csv");
  CHECK(diag.rfind("step,k,residual,alpha\n", 0) == 0);
  CHECK(kind_of([&] {
          cmd_transfer(cfg, cfg.data_dir / "styleA" / "seq0001.motion", "styleA", "styleB", out, false);
        }) == ErrorKind::usage);
  cfg.mode = TransferMode::explicit_keyframes;
  CHECK(kind_of([&] {
          cmd_transfer(cfg, cfg.data_dir / "styleA" / "seq0001.motion", "styleA", "styleB", out, true);
        }) == ErrorKind::usage);

  // Directory transfers per mode, then evaluation.
  for (auto mode : {TransferMode::vanilla, TransferMode::gradient}) {
    cfg.mode = mode;
    cmd_transfer_dir(cfg, cfg.data_dir / "styleA", "styleA", "styleB", root / "out" / to_string(mode), false);
  }
  CHECK(read_manifest(root / "out" / "gradient").size() == 4);
  const auto rep = cmd_evaluate(cfg, root / "out", cfg.data_dir / "styleB", cfg.data_dir / "styleA", false);
  auto field = [&](const std::string& key) {
    for (const auto& [k, v] : rep.fields)
      if (k == key) return v;
    return std::string("<missing>");
  };
  CHECK(field("fmd.gradient") != "<missing>");
  CHECK(field("fpd.vanilla") != "<missing>");
  CHECK(field("fmd.source") != "<missing>");
  CHECK(rep.rows.size() == 8);
  // Gradient outputs keep the source keyframes.
  for (const auto& row : rep.rows)
    if (row[0] == "gradient") CHECK(std::stod(row[3]) <= 1e-6);
  CHECK(fs::exists(cfg.report_dir / "evaluate.txt"));
  CHECK(kind_of([&] {
          cmd_evaluate(cfg, root / "out", cfg.data_dir / "styleB", cfg.data_dir / "styleA", false);
        }) == ErrorKind::usage);

  // A copy of the real set evaluates to zero motion distance against itself.
  {
    const auto copy = root / "copy" / "self";
    fs::create_directories(copy);
    std::ofstream pairs(copy / "pairs.txt");
    for (const auto& e : read_manifest(cfg.data_dir / "styleB")) {
      fs::copy_file(cfg.data_dir / "styleB" / e, copy / e);
      pairs << e << " " << e << "\n";
    }
    pairs.close();
    RunConfig c2 = cfg;
    c2.report_dir = root / "reports_copy";
    const auto self = cmd_evaluate(c2, copy, cfg.data_dir / "styleB", cfg.data_dir / "styleB", false);
    for (const auto& [k, v] : self.fields)
      if (k == "fmd.self" || k == "fpd.self") CHECK(std::stod(v) <= 1e-8);
  }

  // Broken pairing manifests name the offending files.
  {
    const auto bad = root / "bad" / "m";
    fs::create_directories(bad);
    std::ofstream(bad / "pairs.txt") << "seq0000.motion ghost.motion\nnope.motion seq0000.motion\n";
    fs::copy_file(cfg.data_dir / "styleB" / "seq0000.motion", bad / "seq0000.motion");
    RunConfig c3 = cfg;
    c3.report_dir = root / "reports_bad";
    try {
      cmd_evaluate(c3, root / "bad", cfg.data_dir / "styleB", cfg.data_dir / "styleA", false);
      FAIL("expected an error");
    } catch (const Error& e) {
      const std::string msg = e.what();
      CHECK(e.kind() == ErrorKind::data);
      CHECK(msg.find("ghost.motion") != std::string::npos);
      CHECK(msg.find("nope.motion") != std::string::npos);
    }
    CHECK(kind_of([&] {
            cmd_evaluate(c3, root / "single", cfg.data_dir / "styleB", cfg.data_dir / "styleA", false);
          }) == ErrorKind::data);
  }

  // Cycle report.
  cfg.mode = TransferMode::vanilla;
  const auto cyc = cmd_cycle(cfg, "styleA", "styleB", false);
  CHECK(cyc.rows.size() == 2);
  const std::string cyc_text = slurp(cfg.report_dir / "cycle_styleA_styleB.txt");
  CHECK(cyc_text.find("cycle.mean = ") != std::string::npos);
  cmd_cycle(cfg, "styleA", "styleB", true);
  CHECK(slurp(cfg.report_dir / "cycle_styleA_styleB.txt") == cyc_text);
  cfg.cycle_samples = 0;
  CHECK(kind_of([&] { cmd_cycle(cfg, "styleA", "styleB", true); }) == ErrorKind::usage);
  cfg.cycle_samples = 5;
  CHECK(kind_of([&] { cmd_cycle(cfg, "styleA", "styleB", true); }) == ErrorKind::data);

  const std::string kf = cmd_keyframes(cfg, cfg.data_dir / "styleA" / "seq0000.motion");
  CHECK(kf.rfind("index saliency\n", 0) == 0);
  CHECK(std::count(kf.begin(), kf.end(), '\n') == 4);
}
