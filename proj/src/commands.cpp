#include "kmcg/commands.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "kmcg/error.hpp"
#include "kmcg/synth.hpp"

namespace kmcg {

namespace fs = std::filesystem;

namespace {

void say(const LogFn& log, const std::string& msg) {
  if (log) log(msg);
}

void check_output(const fs::path& path, bool force) {
  require(force || !fs::exists(path), ErrorKind::usage,
          fmt::format("{} already exists (use --force to overwrite)", path.string()));
}

void ensure_dir(const fs::path& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::io, fmt::format("cannot create {}: {}", dir.string(), ec.message()));
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_dir(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
  require(static_cast<bool>(f), ErrorKind::io, fmt::format("cannot write {}", path.string()));
}

fs::path resolve_entry(const fs::path& root, const std::string& entry) {
  const fs::path rel(entry);
  require(rel.is_relative(), ErrorKind::data, fmt::format("entry '{}' must be relative", entry));
  for (const auto& part : rel)
    require(part != "..", ErrorKind::data, fmt::format("entry '{}' escapes {}", entry, root.string()));
  return root / rel;
}

std::shared_ptr<const DomainModel> load_domain_model(const RunConfig& cfg, const std::string& domain) {
  const auto path = checkpoint_path(cfg, domain);
  require(fs::exists(path), ErrorKind::data,
          fmt::format("no checkpoint for domain '{}' ({})", domain, path.string()));
  auto dm = std::make_shared<DomainModel>(load_checkpoint(path));
  require(dm->domain == domain, ErrorKind::data,
          fmt::format("{} holds domain '{}', expected '{}'", path.string(), dm->domain, domain));
  return dm;
}

fs::path diagnostics_path(const fs::path& output) {
  fs::path p = output;
  p.replace_extension(".diag.csv");
  return p;
}

struct Pair {
  std::string source;
  std::string output;
};

std::vector<Pair> read_pairs(const fs::path& dir) {
  const auto path = dir / "pairs.txt";
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::data, fmt::format("missing pairing manifest {}", path.string()));
  std::vector<Pair> pairs;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    Pair p;
    std::string extra;
    require(static_cast<bool>(ss >> p.source >> p.output) && !(ss >> extra), ErrorKind::data,
            fmt::format("{}:{}: expected '<source> <output>'", path.string(), lineno));
    pairs.push_back(p);
  }
  require(!pairs.empty(), ErrorKind::data, fmt::format("{} lists no pairs", path.string()));
  return pairs;
}

void write_pairs(const fs::path& dir, const std::vector<Pair>& pairs) {
  std::string text;
  for (const auto& p : pairs) text += p.source + " " + p.output + "\n";
  write_text(dir / "pairs.txt", text);
}

std::vector<std::pair<std::string, std::string>> metric_notes(const RunConfig& cfg) {
  return {
      {"standardization", "per domain, population statistics of the training set"},
      {"features.fmd", "per-channel mean and std of frame velocity and acceleration"},
      {"features.fpd", fmt::format("hip-centric poses at acceleration maxima, count={} min_gap={}",
                                   cfg.keyframes.count, cfg.keyframes.min_gap)},
      {"sampler.steps", std::to_string(cfg.sampler.num_steps)},
      {"reference.cycle_l2", "0.0192-0.0264 (published, full-size datasets)"},
      {"reference.fmd", "gradient 0.1214, vanilla 0.1295, explicit 0.1313 (published, full-size datasets)"},
      {"reference.fpd", "gradient 0.1208, explicit 0.1748, vanilla 0.2904 (published, full-size datasets)"},
  };
}

}  // namespace

TransferRequest make_transfer_request(const RunConfig& cfg, const MotionClip& clip,
                                      std::shared_ptr<const DomainModel> src,
                                      std::shared_ptr<const DomainModel> tgt,
                                      const std::string& name) {
  TransferRequest req;
  req.source = clip.motion;
  req.cond = clip.cond;
  req.source_model = std::move(src);
  req.target_model = std::move(tgt);
  req.mode = cfg.mode;
  req.sampler = cfg.sampler;
  req.guidance = cfg.guidance;
  req.keyframes = cfg.keyframes;
  req.measurement_noise = cfg.measurement_noise;
  req.measurement_weights = cfg.measurement_weights;
  req.seed = named_seed(cfg.seed, fs::path(name).filename().string());
  return req;
}

std::string diagnostics_csv(const std::vector<StepDiagnostics>& diagnostics) {
  std::string out = "step,k,residual,alpha\n";
  for (const auto& d : diagnostics)
    out += fmt::format("{},{},{},{}\n", d.step, d.k, format_number(d.residual), fmt::format("{:.9g}", d.alpha));
  return out;
}

fs::path checkpoint_path(const RunConfig& cfg, const std::string& domain) {
  require(!domain.empty() && domain.find('/') == std::string::npos && domain != "..",
          ErrorKind::usage, fmt::format("invalid domain name '{}'", domain));
  return cfg.checkpoint_dir / (domain + ".ckpt");
}

void cmd_synth(const RunConfig& cfg, bool force, const LogFn& log) {
  cfg.validate();
  std::vector<SyntheticStyleSpec> specs;
  for (const auto& name : cfg.synth.styles) {
    SyntheticStyleSpec spec = style_preset(name);
    spec.seed = cfg.seed;
    spec.dims = cfg.synth.dims;
    spec.fps = cfg.synth.fps;
    spec.noise = cfg.synth.noise;
    spec.validate();
    specs.push_back(spec);
    const auto dir = cfg.data_dir / name;
    require(force || !fs::exists(dir) || fs::is_empty(dir), ErrorKind::usage,
            fmt::format("{} is not empty (use --force to overwrite)", dir.string()));
  }
  for (const auto& spec : specs) {
    const auto dir = cfg.data_dir / spec.name;
    ensure_dir(dir);
    const auto clips = synth_dataset(spec, cfg.synth.sequences, cfg.synth.frames);
    std::vector<std::string> entries;
    for (std::size_t i = 0; i < clips.size(); ++i) {
      entries.push_back(fmt::format("seq{:04d}.motion", i));
      save_motion(clips[i].motion, clips[i].cond, dir / entries.back());
    }
    write_manifest(dir, entries);
    say(log, fmt::format("synth: {} sequences of {} into {}", clips.size(), spec.name, dir.string()));
  }
}

DomainModel train_domain(const DataSource& source, const RunConfig& cfg, const LogFn& log) {
  cfg.validate();
  const auto clips = load_domain(source);
  std::vector<MotionSequence> seqs;
  for (const auto& c : clips) {
    require(c.motion.dims() == clips.front().motion.dims() &&
                c.cond.values.cols() == clips.front().cond.values.cols(),
            ErrorKind::data, fmt::format("domain '{}' mixes frame shapes", source.domain()));
    seqs.push_back(c.motion);
  }
  const Normalizer norm = fit_standardizer(seqs);
  DenoiserConfig mc = cfg.model;
  mc.input_dim = static_cast<int>(seqs.front().dims());
  mc.cond_dim = static_cast<int>(clips.front().cond.values.cols());
  mc.seed = named_seed(cfg.seed, "model:" + source.domain());
  TrainConfig tc = cfg.train;
  tc.seed = named_seed(cfg.seed, "train:" + source.domain());
  const auto data = make_training_set(clips, norm, mc.keyframe_context, cfg.keyframes);
  const int every = std::max(1, tc.steps / 10);
  auto model = train(data, init_model(mc), tc, nullptr, [&](int step, double loss) {
    if ((step + 1) % every == 0)
      say(log, fmt::format("train {}: step {}/{} loss {:.5f}", source.domain(), step + 1, tc.steps, loss));
  });
  return DomainModel{source.domain(), std::move(model), norm};
}

fs::path cmd_train(const RunConfig& cfg, const std::string& domain, bool force, const LogFn& log) {
  const auto out = checkpoint_path(cfg, domain);
  check_output(out, force);
  const auto dir = cfg.data_dir / domain;
  require(fs::is_directory(dir), ErrorKind::data, fmt::format("no dataset directory {}", dir.string()));
  DirectoryDataSource source(dir, domain);
  const DomainModel dm = train_domain(source, cfg, log);
  ensure_dir(out.parent_path());
  save_checkpoint(dm, out);
  say(log, fmt::format("train {}: loss {:.5f} -> {:.5f}, wrote {}", domain, dm.model.metadata.initial_loss,
                       dm.model.metadata.final_loss, out.string()));
  return out;
}

void cmd_transfer(const RunConfig& cfg, const fs::path& source, const std::string& source_domain,
                  const std::string& target_domain, const fs::path& output, bool force,
                  const LogFn& log) {
  cfg.validate();
  check_output(output, force);
  check_output(diagnostics_path(output), force);
  auto src = load_domain_model(cfg, source_domain);
  auto tgt = load_domain_model(cfg, target_domain);
  check_compatible(*src, *tgt, cfg.mode);
  const MotionClip clip = load_motion(source);
  const auto result = transfer(make_transfer_request(cfg, clip, src, tgt, source.filename().string()));
  ensure_dir(output.parent_path());
  save_motion(result.target, clip.cond, output);
  write_text(diagnostics_path(output), diagnostics_csv(result.diagnostics));
  say(log, fmt::format("transfer {} -> {} ({}): wrote {}", source_domain, target_domain,
                       to_string(cfg.mode), output.string()));
}

void cmd_transfer_dir(const RunConfig& cfg, const fs::path& source_dir,
                      const std::string& source_domain, const std::string& target_domain,
                      const fs::path& output_dir, bool force, const LogFn& log) {
  cfg.validate();
  check_output(output_dir / "pairs.txt", force);
  auto src = load_domain_model(cfg, source_domain);
  auto tgt = load_domain_model(cfg, target_domain);
  check_compatible(*src, *tgt, cfg.mode);
  const auto entries = read_manifest(source_dir);
  std::vector<MotionClip> clips;
  std::vector<TransferRequest> requests;
  for (const auto& e : entries) clips.push_back(load_motion(resolve_entry(source_dir, e)));
  for (std::size_t i = 0; i < entries.size(); ++i)
    requests.push_back(make_transfer_request(cfg, clips[i], src, tgt, entries[i]));
  ensure_dir(output_dir);
  std::vector<Pair> pairs;
  std::vector<std::string> outputs;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const auto result = transfer(requests[i]);
    const auto out = resolve_entry(output_dir, entries[i]);
    ensure_dir(out.parent_path());
    save_motion(result.target, clips[i].cond, out);
    write_text(diagnostics_path(out), diagnostics_csv(result.diagnostics));
    pairs.push_back({entries[i], entries[i]});
    outputs.push_back(entries[i]);
    say(log, fmt::format("transfer {}/{}: {}", i + 1, requests.size(), entries[i]));
  }
  write_manifest(output_dir, outputs);
  write_pairs(output_dir, pairs);
}

TransferReport cmd_cycle(const RunConfig& cfg, const std::string& domain_a,
                         const std::string& domain_b, bool force, const LogFn& log) {
  cfg.validate();
  const auto stem = fmt::format("cycle_{}_{}", domain_a, domain_b);
  check_output(cfg.report_dir / (stem + ".txt"), force);
  auto a = load_domain_model(cfg, domain_a);
  auto b = load_domain_model(cfg, domain_b);
  check_compatible(*a, *b, cfg.mode);
  const auto dir = cfg.data_dir / domain_a;
  auto entries = read_manifest(dir);
  require(static_cast<int>(entries.size()) >= cfg.cycle_samples, ErrorKind::data,
          fmt::format("{} has {} sequences, cycle.samples is {}", dir.string(), entries.size(),
                      cfg.cycle_samples));
  entries.resize(static_cast<std::size_t>(cfg.cycle_samples));

  std::vector<std::pair<Mat, Mat>> pairs;
  ReportInputs in;
  in.command = "cycle";
  in.config_text = config_text(cfg);
  in.columns = {"source", "cycle_l2"};
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const MotionClip clip = load_motion(resolve_entry(dir, entries[i]));
    const auto r = cycle_transfer(make_transfer_request(cfg, clip, a, b, entries[i]));
    pairs.emplace_back(a->normalizer.apply(clip.motion.frames), r.back.target_standardized);
    in.rows.push_back({entries[i], format_number(r.cycle_l2)});
    say(log, fmt::format("cycle {}/{}: {} l2 {:.5f}", i + 1, entries.size(), entries[i], r.cycle_l2));
  }
  in.cycle = cycle_report(pairs);
  in.notes = metric_notes(cfg);
  in.notes.insert(in.notes.begin(), {"mode", to_string(cfg.mode)});
  in.notes.insert(in.notes.begin(), {"domains", domain_a + " -> " + domain_b + " -> " + domain_a});
  auto report = build_report(in);
  write_report(report, cfg.report_dir, stem);
  return report;
}

TransferReport cmd_evaluate(const RunConfig& cfg, const fs::path& outputs_dir, const fs::path& real_dir,
                            const fs::path& source_dir, bool force, const LogFn& log) {
  cfg.validate();
  check_output(cfg.report_dir / "evaluate.txt", force);
  require(fs::is_directory(outputs_dir), ErrorKind::data,
          fmt::format("no outputs directory {}", outputs_dir.string()));

  std::vector<std::pair<std::string, fs::path>> modes;
  if (fs::exists(outputs_dir / "pairs.txt")) {
    modes.emplace_back(fs::absolute(outputs_dir).lexically_normal().filename().string(), outputs_dir);
    if (modes.back().first.empty()) modes.back().first = "outputs";
  } else {
    for (const auto& e : fs::directory_iterator(outputs_dir))
      if (e.is_directory() && fs::exists(e.path() / "pairs.txt"))
        modes.emplace_back(e.path().filename().string(), e.path());
    std::sort(modes.begin(), modes.end());
  }
  require(!modes.empty(), ErrorKind::data,
          fmt::format("missing pairing manifest: no pairs.txt in {} or its subdirectories",
                      outputs_dir.string()));

  std::vector<MotionSequence> real;
  for (const auto& e : read_manifest(real_dir)) real.push_back(load_motion(resolve_entry(real_dir, e)).motion);

  const auto source_entries = read_manifest(source_dir);
  std::map<std::string, MotionSequence> sources;

  ReportInputs in;
  in.command = "evaluate";
  in.config_text = config_text(cfg);
  in.columns = {"mode", "source", "output", "keyframe_rms"};
  std::vector<MotionSequence> all_sources;
  for (const auto& [mode, dir] : modes) {
    const auto pairs = read_pairs(dir);
    std::vector<std::string> unmatched;
    for (const auto& p : pairs) {
      if (std::find(source_entries.begin(), source_entries.end(), p.source) == source_entries.end())
        unmatched.push_back(p.source + " (not in " + source_dir.string() + ")");
      if (!fs::exists(resolve_entry(dir, p.output)))
        unmatched.push_back(p.output + " (missing in " + dir.string() + ")");
    }
    if (!unmatched.empty()) {
      std::string list;
      for (const auto& u : unmatched) list += (list.empty() ? "" : ", ") + u;
      fail(ErrorKind::data, fmt::format("pairing manifest {} has unmatched files: {}",
                                        (dir / "pairs.txt").string(), list));
    }
    std::vector<MotionSequence> src, gen;
    for (const auto& p : pairs) {
      if (!sources.count(p.source))
        sources.emplace(p.source, load_motion(resolve_entry(source_dir, p.source)).motion);
      const MotionSequence& s = sources.at(p.source);
      MotionSequence g = load_motion(resolve_entry(dir, p.output)).motion;
      require(g.frames.rows() == s.frames.rows() && g.frames.cols() == s.frames.cols(), ErrorKind::data,
              fmt::format("{} and {} differ in shape", p.source, p.output));
      g.layout = s.layout;
      const auto kf = extract_keyframes(s, cfg.keyframes.count, cfg.keyframes.min_gap);
      const double kf_rms = std::sqrt((select_frames(s.frames, kf.indices) -
                                       select_frames(g.frames, kf.indices)).squaredNorm() /
                                      static_cast<double>(kf.indices.size() * s.frames.cols()));
      in.rows.push_back({mode, p.source, p.output, format_number(kf_rms)});
      src.push_back(s);
      gen.push_back(std::move(g));
    }
    ModeScores scores;
    scores.mode = mode;
    scores.pairs = static_cast<Index>(pairs.size());
    scores.fmd = fmd(real, gen);
    const FpdResult f = fpd(src, gen, cfg.keyframes);
    scores.fpd = f.distance;
    scores.fpd_fallback_ridge = f.fallback_ridge;
    if (f.fallback_ridge) say(log, fmt::format("evaluate {}: too few salient poses, ridge raised", mode));
    say(log, fmt::format("evaluate {}: fmd {:.5f} fpd {:.5f}", mode, scores.fmd, scores.fpd));
    in.modes.push_back(scores);
    if (all_sources.empty()) all_sources = src;
  }
  in.source_fmd = fmd(real, all_sources);
  in.notes = metric_notes(cfg);
  auto report = build_report(in);
  write_report(report, cfg.report_dir, "evaluate");
  return report;
}

std::string cmd_keyframes(const RunConfig& cfg, const fs::path& motion_file) {
  cfg.validate();
  const MotionClip clip = load_motion(motion_file);
  const auto kf = extract_keyframes(clip.motion, cfg.keyframes.count, cfg.keyframes.min_gap);
  std::string out = "index saliency\n";
  for (std::size_t i = 0; i < kf.indices.size(); ++i)
    out += fmt::format("{} {:.9g}\n", kf.indices[i], kf.saliency[i]);
  return out;
}

}  // namespace kmcg
