// Acceptance gate: prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. Criteria 5-10 drive the `kmcg` CLI end to end.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "kmcg/bridge.hpp"
#include "kmcg/commands.hpp"
#include "kmcg/config.hpp"
#include "kmcg/error.hpp"
#include "kmcg/metrics.hpp"
#include "kmcg/synth.hpp"

namespace fs = std::filesystem;
using namespace kmcg;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::vector<std::pair<int, Outcome>> results;
fs::path work;
std::string cli_path;

void record(int id, const std::string& title, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, fmt::format("error: {}", e.what())};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("criterion %2d %s  %s: %s (%.1fs)\n", id, o.pass ? "PASS" : "FAIL", title.c_str(),
              o.detail.c_str(), secs);
  std::fflush(stdout);
  results.emplace_back(id, o);
}

// Runs the CLI; returns its exit code. stdout goes to `out` when given.
int cli(const std::string& args, std::string* out = nullptr) {
  const std::string cmd = cli_path + " " + args + " 2>>" + (work / "cli.log").string();
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) fail(ErrorKind::io, "cannot start " + cli_path);
  std::string text;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) text.append(buf, n);
  const int status = pclose(p);
  if (out) *out = text;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void must(const std::string& args, std::string* out = nullptr) {
  const int code = cli(args, out);
  require(code == 0, ErrorKind::data, fmt::format("`kmcg {}` exited {}", args, code));
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

std::map<std::string, std::string> report_fields(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

double field(const std::map<std::string, std::string>& f, const std::string& key) {
  const auto it = f.find(key);
  require(it != f.end(), ErrorKind::data, "report lacks " + key);
  return std::stod(it->second);
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-5}); }

// ---------------------------------------------------------------------------
// Criterion 1

DenoiserModel perturbed(const DenoiserConfig& cfg) {
  DenoiserModel m = init_model(cfg);
  Rng rng = derive_stream(cfg.seed, {99});
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& p : m.parameters())
    for (auto& v : p.values) v += n(rng);
  return m;
}

ModelContext context_for(const DenoiserConfig& cfg, Index frames, Rng& rng) {
  ModelContext ctx;
  ctx.cond = gaussian_matrix(frames, cfg.cond_dim, rng);
  if (cfg.keyframe_context) {
    ctx.keyframe_indices = {0, static_cast<int>(frames) - 3};
    ctx.keyframe_poses = gaussian_matrix(2, cfg.input_dim, rng);
  }
  return ctx;
}

Outcome gradients() {
  const double h = 1e-5;
  double worst_param = 0, worst_vjp = 0, worst_mcg = 0;
  int configs = 0;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    Rng pick = derive_stream(seed, {1});
    DenoiserConfig c;
    c.input_dim = 2 + static_cast<int>(pick() % 3);
    c.cond_dim = 1 + static_cast<int>(pick() % 2);
    c.hidden = 4 + static_cast<int>(pick() % 4);
    c.blocks = 1 + static_cast<int>(pick() % 2);
    c.time_dim = 4;
    c.kernel = 3;
    c.T = 50;
    c.cond_mode = seed % 2 ? CondMode::concat : CondMode::cross_attention;
    c.keyframe_context = seed % 3 == 0;
    c.seed = seed;
    DenoiserModel m = perturbed(c);
    const Index frames = 6;
    Rng rng = derive_stream(seed, {2});

    std::vector<TrainingExample> batch;
    for (int i = 0; i < 2; ++i)
      batch.push_back({gaussian_matrix(frames, c.input_dim, rng), gaussian_matrix(frames, c.input_dim, rng),
                       5 + 17 * i, context_for(c, frames, rng)});
    const auto lg = loss_and_param_grad(m, batch);
    for (std::size_t p = 0; p < m.parameters().size(); ++p) {
      auto& values = m.parameters()[p].values;
      for (std::size_t j = 0; j < values.size(); ++j) {
        const double keep = values[j];
        values[j] = keep + h;
        const double up = loss_and_param_grad(m, batch).loss;
        values[j] = keep - h;
        const double down = loss_and_param_grad(m, batch).loss;
        values[j] = keep;
        worst_param = std::max(worst_param, rel_err(lg.grads[p][j], (up - down) / (2 * h)));
      }
    }

    const Mat x = gaussian_matrix(frames, c.input_dim, rng);
    const ModelContext ctx = context_for(c, frames, rng);
    const Mat cot = gaussian_matrix(frames, c.input_dim, rng);
    const Mat vjp = input_vjp(m, x, 23, ctx, cot);
    for (int t = 0; t < 4; ++t) {
      const Mat v = gaussian_matrix(frames, c.input_dim, rng);
      const Mat d = (forward(m, x + h * v, 23, ctx) - forward(m, x - h * v, 23, ctx)) / (2 * h);
      worst_vjp = std::max(worst_vjp, rel_err((vjp.array() * v.array()).sum(), (d.array() * cot.array()).sum()));
    }

    if (!c.keyframe_context) {
      Measurement meas = measure(gaussian_matrix(frames, c.input_dim, rng), KeyframeSet{{1, 4}, {}}, 0.0);
      meas.weights = Vec::LinSpaced(c.input_dim, 0.5, 1.5);
      const auto g = residual_gradient(m, x, 23, ctx, meas);
      auto residual = [&](const Mat& xx) {
        const Mat diff = select_frames(m.predict(xx, 23, ctx), meas.indices) - meas.y;
        return (diff.array().rowwise() * meas.weights.transpose().array()).square().sum();
      };
      for (Index r = 0; r < frames; ++r)
        for (Index col = 0; col < c.input_dim; ++col) {
          Mat up = x, down = x;
          up(r, col) += h;
          down(r, col) -= h;
          worst_mcg = std::max(worst_mcg, rel_err(g.gradient(r, col), (residual(up) - residual(down)) / (2 * h)));
        }
    }
    ++configs;
  }
  const double worst = std::max({worst_param, worst_vjp, worst_mcg});
  return {worst <= 1e-4 && configs >= 5,
          fmt::format("{} configs, max rel err param {:.2e}, vjp {:.2e}, residual grad {:.2e} (<= 1e-4)", configs,
                      worst_param, worst_vjp, worst_mcg)};
}

// ---------------------------------------------------------------------------
// Criterion 2

Outcome schedules() {
  double worst_identity = 0;
  bool ok = true;
  for (auto kind : {ScheduleKind::cosine, ScheduleKind::linear})
    for (int T : {100, 1000}) {
      const auto s = make_schedule(kind, T);
      ok = ok && s.a[0] == 1.0 && s.b[0] == 0.0;
      for (int k = 0; k <= T; ++k) {
        worst_identity = std::max(worst_identity, std::abs(s.a[k] * s.a[k] + s.b[k] * s.b[k] - 1.0));
        if (k > 0) ok = ok && s.a[k] < s.a[k - 1] && s.b[k] > s.b[k - 1];
      }
    }
  ok = ok && worst_identity <= 1e-6;
  return {ok, fmt::format("cosine and linear at T=100,1000: endpoints exact, monotone, max |a^2+b^2-1| {:.1e}",
                          worst_identity)};
}

// ---------------------------------------------------------------------------
// Criterion 3

Outcome frechet() {
  auto st = [](Vec m, Mat c) { return GaussianStats{std::move(m), std::move(c), 2}; };
  const Mat one = Mat::Identity(1, 1);
  Rng rng = derive_stream(3, {1});
  const Mat g = gaussian_matrix(4, 6, rng);
  const Mat spd = g * g.transpose() + 0.1 * Mat::Identity(4, 4);
  const Vec mu = gaussian_matrix(4, 1, rng);
  const double same = frechet_distance(st(mu, spd), st(mu, spd));
  const double shift = frechet_distance(st(Vec::Zero(1), one), st(Vec::Ones(1), one));
  const double scale = frechet_distance(st(Vec::Zero(1), one), st(Vec::Zero(1), 4.0 * one));
  Vec d1(3), d2(3), m2(3);
  d1 << 1.0, 2.5, 0.3;
  d2 << 0.2, 1.0, 3.0;
  m2 << 0.4, -0.2, 1.0;
  double expect = m2.squaredNorm();
  for (int i = 0; i < 3; ++i) expect += std::pow(std::sqrt(d1[i]) - std::sqrt(d2[i]), 2);
  const double diag = frechet_distance(st(Vec::Zero(3), d1.asDiagonal()), st(m2, d2.asDiagonal()));
  const bool ok = same <= 1e-8 && std::abs(shift - 1.0) <= 1e-6 && std::abs(scale - 1.0) <= 1e-6 &&
                  std::abs(diag - expect) <= 1e-6;
  return {ok, fmt::format("identical {:.1e}, shift {:.9f}, scale {:.9f}, diagonal err {:.1e}", same, shift, scale,
                          std::abs(diag - expect))};
}

// ---------------------------------------------------------------------------
// Criterion 4

Outcome projection() {
  bool ok = true;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng = derive_stream(seed, {4});
    const Index n = 10 + static_cast<Index>(rng() % 30);
    const Index d = 1 + static_cast<Index>(rng() % 6);
    std::vector<int> idx;
    for (Index i = 0; i < n; ++i)
      if (rng() % 4 == 0) idx.push_back(static_cast<int>(i));
    const Mat x = gaussian_matrix(n, d, rng);
    const Mat y = gaussian_matrix(static_cast<Index>(idx.size()), d, rng);
    ok = ok && select_frames(project_frames(x, idx, y), idx) == y;
    const Mat ax = complement_frames(x, idx);
    ok = ok && complement_frames(ax, idx) == ax;
  }
  DenoiserConfig c;
  c.input_dim = 3;
  c.cond_dim = 2;
  c.hidden = 8;
  c.blocks = 2;
  c.T = 100;
  c.seed = 4;
  const DenoiserModel m = perturbed(c);
  Rng rng = derive_stream(4, {5});
  const Mat latent = gaussian_matrix(30, 3, rng);
  const ModelContext ctx{gaussian_matrix(30, 2, rng), {}, {}};
  const auto meas = measure(gaussian_matrix(30, 3, rng), KeyframeSet{{2, 11, 25}, {}}, 0.0);
  GuidanceConfig g;
  g.alpha0 = 0.0;
  g.projection = false;
  bool bitwise = true;
  for (double eta : {0.0, 0.5}) {
    SamplerConfig s;
    s.num_steps = 20;
    s.eta = eta;
    s.seed = 8;
    bitwise = bitwise && guided_decode(m, latent, ctx, meas, g, s) == ddim_decode(m, latent, ctx, s);
  }
  return {ok && bitwise, fmt::format("H(Ax+H^T y)=y and A^2=A exact on 20 random masks: {}; "
                                     "alpha0=0 without projection bitwise equal to vanilla: {}",
                                     ok ? "yes" : "no", bitwise ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// Pipeline shared by criteria 5-8.

struct Pipeline {
  std::string flags;  // --config ... --seed ...
  fs::path root, heldout;
  bool ready = false;
  double train_seconds = 0;
};

Pipeline pipe;

void build_pipeline() {
  pipe.root = work / "desk";
  pipe.heldout = pipe.root / "heldout";
  fs::create_directories(pipe.root);
  std::ofstream cfg(pipe.root / "desk.cfg");
  cfg << "# desk experiment: 2 styles, 64 sequences x 150 frames x 6 channels, T=1000, S=100\n"
      << "paths.data_dir = " << (pipe.root / "data").string() << "\n"
      << "paths.checkpoint_dir = " << (pipe.root / "checkpoints").string() << "\n"
      << "paths.report_dir = " << (pipe.root / "reports").string() << "\n"
      << "sampler.steps = 100\n"
      << "guidance.alpha0 = 0.2\n"
      << "cycle.samples = 16\n";
  cfg.close();
  pipe.flags = "--config " + (pipe.root / "desk.cfg").string() + " --seed 1 --force ";
  must(pipe.flags + "synth");
  // Held-out sources: same styles, content from another seed.
  must("--config " + (pipe.root / "desk.cfg").string() + " --seed 2 --force synth --synth.styles styleA " +
       "--synth.sequences 32 --paths.data_dir " + pipe.heldout.string());
  const auto t0 = std::chrono::steady_clock::now();
  must(pipe.flags + "train styleA styleB");
  pipe.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  pipe.ready = true;
}

std::vector<MotionSequence> load_dir(const fs::path& dir) {
  std::vector<MotionSequence> out;
  for (const auto& e : read_manifest(dir)) out.push_back(load_motion(dir / e).motion);
  return out;
}

Outcome roundtrip() {
  build_pipeline();
  const auto model = load_checkpoint(pipe.root / "checkpoints" / "styleA.ckpt");
  const auto src_dir = pipe.heldout / "styleA";
  const auto sources = load_dir(src_dir);
  const std::size_t count = 8;
  std::vector<double> errs;
  for (int s : {10, 25, 50, 100}) {
    const auto out_dir = pipe.root / fmt::format("roundtrip_s{}", s);
    // Only the first `count` held-out files.
    const auto subset = pipe.root / "heldout_subset";
    if (!fs::exists(subset)) {
      fs::create_directories(subset);
      std::vector<std::string> entries = read_manifest(src_dir);
      entries.resize(count);
      for (const auto& e : entries) fs::copy_file(src_dir / e, subset / e);
      write_manifest(subset, entries);
    }
    must(pipe.flags + fmt::format("transfer --source-dir {} --from styleA --to styleA --output-dir {} "
                                  "--mode vanilla --sampler.steps {}",
                                  subset.string(), out_dir.string(), s));
    double sum = 0;
    for (std::size_t i = 0; i < count; ++i) {
      const auto out = load_motion(out_dir / read_manifest(subset)[i]).motion;
      sum += rms_distance(model.normalizer.apply(sources[i].frames), model.normalizer.apply(out.frames));
    }
    errs.push_back(sum / static_cast<double>(count));
  }
  int increases = 0;
  for (std::size_t i = 1; i < errs.size(); ++i)
    if (errs[i] > errs[i - 1]) ++increases;
  const bool ok = errs.back() <= 0.05 && increases <= 1 && pipe.train_seconds <= 15 * 60;
  return {ok, fmt::format("held-out RMS at S=10/25/50/100: {:.4f} {:.4f} {:.4f} {:.4f} (S=100 <= 0.05, "
                          "{} increase(s) <= 1); training both models took {:.0f}s",
                          errs[0], errs[1], errs[2], errs[3], increases, pipe.train_seconds)};
}

Outcome cycle() {
  require(pipe.ready, ErrorKind::data, "pipeline not built");
  std::string text;
  must(pipe.flags + "cycle --from styleA --to styleB --mode vanilla --paths.data_dir " + pipe.heldout.string(), &text);
  const auto f = report_fields(text);
  const double mean = field(f, "cycle.mean");
  const bool ref = f.count("reference.cycle_l2") > 0;
  return {mean <= 0.1 && ref, fmt::format("16 held-out sequences at S=100: mean {:.4f} +- {:.4f} (<= 0.1); "
                                          "published reference magnitudes in report: {}",
                                          mean, field(f, "cycle.std"), ref ? "yes" : "no")};
}

std::map<std::string, std::string> ablation_fields;

Outcome ablation() {
  require(pipe.ready, ErrorKind::data, "pipeline not built");
  const auto outs = pipe.root / "ablation";
  for (const char* mode : {"vanilla", "gradient"})
    must(pipe.flags + fmt::format("transfer --source-dir {} --from styleA --to styleB --output-dir {} --mode {}",
                                  (pipe.heldout / "styleA").string(), (outs / mode).string(), mode));
  std::string text;
  must(pipe.flags + fmt::format("evaluate --outputs {} --real {} --sources {}", outs.string(),
                                (pipe.root / "data" / "styleB").string(), (pipe.heldout / "styleA").string()),
       &text);
  ablation_fields = report_fields(text);
  const auto& f = ablation_fields;
  const double fpd_g = field(f, "fpd.gradient"), fpd_v = field(f, "fpd.vanilla");
  const double fmd_g = field(f, "fmd.gradient"), fmd_v = field(f, "fmd.vanilla");
  const auto pairs = static_cast<int>(field(f, "pairs.gradient"));
  const bool fpd_ok = fpd_g < fpd_v;
  const bool fmd_ok = fmd_g <= 1.2 * fmd_v;
  return {fpd_ok && fmd_ok && pairs >= 32,
          fmt::format("{} sequences: FPD gradient {:.5f} < vanilla {:.5f}: {}; FMD gradient {:.5f} <= 1.2 x vanilla "
                      "{:.5f} = {:.5f}: {} (ratio {:.2f}); untransferred sources FMD {:.5f}",
                      pairs, fpd_g, fpd_v, fpd_ok ? "yes" : "no", fmd_g, fmd_v, 1.2 * fmd_v, fmd_ok ? "yes" : "no",
                      fmd_g / fmd_v, field(f, "fmd.source"))};
}

Outcome keyframes_exact() {
  require(pipe.ready, ErrorKind::data, "pipeline not built");
  const auto outs = pipe.root / "ablation" / "gradient";
  require(fs::exists(outs / "pairs.txt"), ErrorKind::data, "no gradient outputs");
  const auto src_dir = pipe.heldout / "styleA";
  KeyframeParams kp;
  double worst = 0;
  std::size_t checked = 0;
  for (const auto& e : read_manifest(src_dir)) {
    const auto src = load_motion(src_dir / e).motion;
    const auto out = load_motion(outs / e).motion;
    const auto kf = extract_keyframes(src, kp.count, kp.min_gap);
    for (int idx : kf.indices) {
      worst = std::max(worst, (src.frames.row(idx) - out.frames.row(idx)).cwiseAbs().maxCoeff());
      ++checked;
    }
  }
  return {worst <= 1e-6 && checked > 0,
          fmt::format("{} keyframes over 32 gradient-mode outputs, max |output - source| {:.2e} (<= 1e-6)", checked,
                      worst)};
}

// ---------------------------------------------------------------------------
// Criteria 9 and 10 use a small configuration.

void write_small_config(const fs::path& root, const std::string& styles) {
  fs::create_directories(root);
  std::ofstream cfg(root / "small.cfg");
  cfg << "paths.data_dir = " << (root / "data").string() << "\n"
      << "paths.checkpoint_dir = " << (root / "checkpoints").string() << "\n"
      << "paths.report_dir = " << (root / "reports").string() << "\n"
      << "synth.styles = " << styles << "\n"
      << "synth.sequences = 6\nsynth.frames = 90\n"
      << "model.hidden = 16\nmodel.blocks = 2\nschedule.T = 200\n"
      << "train.steps = 60\ntrain.batch_size = 4\ntrain.warmup = 10\ntrain.loss_window = 10\n"
      << "sampler.steps = 20\ncycle.samples = 3\n";
}

class RecordingSource final : public DataSource {
 public:
  explicit RecordingSource(DirectoryDataSource inner) : inner_(std::move(inner)) {}
  std::string domain() const override { return inner_.domain(); }
  std::vector<std::string> entries() const override { return inner_.entries(); }
  MotionClip read(const std::string& entry) const override {
    reads.insert((inner_.root() / entry).lexically_normal().string());
    return inner_.read(entry);
  }
  mutable std::set<std::string> reads;

 private:
  DirectoryDataSource inner_;
};

Outcome scalability() {
  const auto root = work / "four";
  fs::remove_all(root);
  write_small_config(root, "styleA,styleB,styleC,styleD");
  const std::string flags = "--config " + (root / "small.cfg").string() + " --seed 7 ";
  const std::vector<std::string> doms{"styleA", "styleB", "styleC", "styleD"};
  must(flags + "synth");
  must(flags + "train styleA styleB styleC styleD");
  int ckpts = 0;
  for (const auto& d : doms) ckpts += fs::exists(root / "checkpoints" / (d + ".ckpt"));

  std::map<std::string, fs::file_time_type> stamps;
  for (const auto& d : doms) stamps[d] = fs::last_write_time(root / "checkpoints" / (d + ".ckpt"));
  int transfers = 0;
  for (const auto& a : doms)
    for (const auto& b : doms) {
      if (a == b) continue;
      must(flags + fmt::format("transfer --source {} --from {} --to {} --output {} --mode gradient",
                               (root / "data" / a / "seq0000.motion").string(), a, b,
                               (root / "out" / (a + "_to_" + b + ".motion")).string()));
      ++transfers;
    }
  bool untouched = true;
  for (const auto& d : doms) untouched = untouched && fs::last_write_time(root / "checkpoints" / (d + ".ckpt")) == stamps[d];

  // Training A through a recording source sees only A's files.
  RunConfig cfg;
  load_config_file(cfg, root / "small.cfg");
  cfg.seed = 7;
  RecordingSource rec(DirectoryDataSource(root / "data" / "styleA", "styleA"));
  const auto dm = train_domain(rec, cfg);
  const std::string a_prefix = (root / "data" / "styleA").lexically_normal().string() + "/";
  bool only_a = rec.reads.size() == 6;
  for (const auto& p : rec.reads) only_a = only_a && p.rfind(a_prefix, 0) == 0;
  const bool same_bytes = serialize_checkpoint(dm) == slurp(root / "checkpoints" / "styleA.ckpt");

  // Removing B's data leaves A's training unchanged.
  fs::rename(root / "data" / "styleB", root / "styleB_moved");
  must(flags + "train styleA --force");
  const bool b_free = slurp(root / "checkpoints" / "styleA.ckpt") == serialize_checkpoint(dm);
  fs::rename(root / "styleB_moved", root / "data" / "styleB");

  const bool ok = ckpts == 4 && transfers == 12 && untouched && only_a && same_bytes && b_free;
  return {ok, fmt::format("{} checkpoints, {} directed transfers without retraining (checkpoints untouched: {}); "
                          "recorded reads of A's training: {} files, all under A: {}; A's checkpoint identical with "
                          "B's data removed: {}",
                          ckpts, transfers, untouched ? "yes" : "no", rec.reads.size(), only_a ? "yes" : "no",
                          b_free && same_bytes ? "yes" : "no")};
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

Outcome determinism() {
  const auto root = work / "repeat";
  fs::remove_all(root);
  write_small_config(root, "styleA,styleB");
  const std::string flags = "--config " + (root / "small.cfg").string() + " --seed 11 --force ";
  const std::string data = (root / "data").string();
  std::vector<std::string> stdouts;
  auto run_all = [&] {
    std::vector<std::string> printed;
    std::string text;
    must(flags + "synth");
    must(flags + "train styleA styleB");
    for (const char* mode : {"vanilla", "gradient"}) {
      must(flags + fmt::format("transfer --source {}/styleA/seq0001.motion --from styleA --to styleB --output {}/single_{}.motion --mode {}",
                               data, (root / "out").string(), mode, mode));
      must(flags + fmt::format("transfer --source-dir {}/styleA --from styleA --to styleB --output-dir {}/modes/{} --mode {}",
                               data, (root / "out").string(), mode, mode));
    }
    must(flags + fmt::format("evaluate --outputs {}/modes --real {}/styleB --sources {}/styleA", (root / "out").string(),
                             data, data),
         &text);
    printed.push_back(text);
    must(flags + "cycle --from styleA --to styleB", &text);
    printed.push_back(text);
    must(flags + fmt::format("keyframes {}/styleB/seq0002.motion", data), &text);
    printed.push_back(text);
    return printed;
  };
  const auto first_out = run_all();
  const auto first = snapshot(root);
  const auto second_out = run_all();
  const auto second = snapshot(root);
  std::vector<std::string> differ;
  for (const auto& [k, v] : first) {
    const auto it = second.find(k);
    if (it == second.end() || it->second != v) differ.push_back(k);
  }
  const bool same_stdout = first_out == second_out;
  std::size_t ckpt = 0, motion = 0, report = 0;
  for (const auto& [k, v] : first) {
    if (k.ends_with(".ckpt")) ++ckpt;
    if (k.ends_with(".motion")) ++motion;
    if (k.ends_with(".txt") && k.rfind("reports", 0) == 0) ++report;
  }
  return {differ.empty() && first.size() == second.size() && same_stdout,
          fmt::format("{} files ({} checkpoints, {} motion files, {} reports) byte-identical across reruns of synth, "
                      "train, transfer, evaluate, cycle, keyframes: {}{}; printed output identical: {}",
                      first.size(), ckpt, motion, report, differ.empty() ? "yes" : "no",
                      differ.empty() ? "" : " (first differing: " + differ.front() + ")", same_stdout ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  cli_path = KMCG_CLI_PATH;
  work = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance_work";
  fs::remove_all(work);
  fs::create_directories(work);
  std::printf("acceptance: work directory %s\n", work.string().c_str());
  const auto t0 = std::chrono::steady_clock::now();

  record(1, "gradient correctness", gradients);
  record(2, "schedule invariants", schedules);
  record(3, "Frechet distance", frechet);
  record(4, "projection algebra", projection);
  record(5, "DDIM roundtrip", roundtrip);
  record(6, "cycle consistency", cycle);
  record(7, "ablation ordering", ablation);
  record(8, "keyframe exactness", keyframes_exact);
  record(9, "scalability and independence", scalability);
  record(10, "determinism", determinism);

  int failed = 0;
  for (const auto& [id, o] : results) failed += !o.pass;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("acceptance: %zu criteria, %d failed (%.0fs)\n", results.size(), failed, secs);
  return failed ? 1 : 0;
}
