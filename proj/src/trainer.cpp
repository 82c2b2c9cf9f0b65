#include "kmcg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "kmcg/error.hpp"

namespace kmcg {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  require(batch_size >= 1, ErrorKind::usage, "train.batch_size must be positive");
  require(lr > 0, ErrorKind::usage, "train.lr must be positive");
  require(steps >= 1, ErrorKind::usage, "train.steps must be at least 1");
  require(warmup >= 0, ErrorKind::usage, "train.warmup must be >= 0");
  require(ema >= 0 && ema < 1, ErrorKind::usage, "train.ema must be in [0, 1)");
  require(crop == 0 || crop >= 3, ErrorKind::usage, "train.crop must be 0 or >= 3");
  require(loss_window >= 1, ErrorKind::usage, "train.loss_window must be positive");
}

LrSchedule parse_lr_schedule(std::string_view text) {
  if (text == "constant") return LrSchedule::constant;
  if (text == "cosine") return LrSchedule::cosine;
  fail(ErrorKind::usage, fmt::format("unknown learning-rate schedule '{}'", text));
}

std::string to_string(LrSchedule s) { return s == LrSchedule::constant ? "constant" : "cosine"; }

namespace {

double learning_rate(const TrainConfig& cfg, int step) {
  double lr = cfg.lr;
  if (cfg.warmup > 0 && step < cfg.warmup) lr *= static_cast<double>(step + 1) / cfg.warmup;
  if (cfg.lr_schedule == LrSchedule::cosine) {
    const double progress = static_cast<double>(step) / std::max(1, cfg.steps);
    lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  }
  return lr;
}

double window_mean(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  return std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(begin),
                         v.begin() + static_cast<std::ptrdiff_t>(end), 0.0) /
         static_cast<double>(end - begin);
}

}  // namespace

DenoiserModel train(std::span<const TrainingSequence> dataset, DenoiserModel model,
                    const TrainConfig& cfg, TrainStats* stats, const TrainProgress& progress) {
  cfg.validate();
  require(!dataset.empty(), ErrorKind::data, "training dataset is empty");
  const auto& mc = model.config();
  for (const auto& s : dataset) {
    require(s.x0.cols() == mc.input_dim && s.cond.cols() == mc.cond_dim &&
                s.cond.rows() == s.x0.rows() && s.x0.rows() >= 3,
            ErrorKind::data, "training sequence shape does not match the model");
  }

  auto& params = model.parameters();
  Gradients m1 = model.zero_gradients();
  Gradients m2 = model.zero_gradients();
  std::vector<std::vector<double>> ema_values;
  if (cfg.ema > 0)
    for (const auto& p : params) ema_values.push_back(p.values);

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  Rng rng = derive_stream(cfg.seed, {kStreamTrain});
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  std::uniform_int_distribution<int> pick_k(1, mc.T);
  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(cfg.steps));
  std::vector<TrainingExample> batch(static_cast<std::size_t>(cfg.batch_size));

  for (int step = 0; step < cfg.steps; ++step) {
    for (auto& ex : batch) {
      const auto& seq = dataset[pick(rng)];
      const Index n = seq.x0.rows();
      const Index len = (cfg.crop > 0 && cfg.crop < n) ? cfg.crop : n;
      const Index start =
          len < n ? std::uniform_int_distribution<Index>(0, n - len)(rng) : Index{0};
      ex.x0 = seq.x0.middleRows(start, len);
      ex.ctx.cond = seq.cond.middleRows(start, len);
      ex.ctx.keyframe_indices.clear();
      ex.ctx.keyframe_poses.resize(0, mc.input_dim);
      if (mc.keyframe_context) {
        std::vector<int> local;
        for (int idx : seq.keyframes)
          if (idx >= start && idx < start + len) local.push_back(static_cast<int>(idx - start));
        ex.ctx.keyframe_indices = local;
        ex.ctx.keyframe_poses.resize(static_cast<Index>(local.size()), mc.input_dim);
        for (std::size_t i = 0; i < local.size(); ++i)
          ex.ctx.keyframe_poses.row(static_cast<Index>(i)) = ex.x0.row(local[i]);
      }
      ex.k = pick_k(rng);
      ex.z = gaussian_matrix(len, mc.input_dim, rng);
    }

    LossAndGrad lg = loss_and_param_grad(model, batch);
    if (!std::isfinite(lg.loss))
      fail(ErrorKind::numerical, fmt::format("training diverged at step {} (loss {})", step, lg.loss));
    history.push_back(lg.loss);

    const double lr = learning_rate(cfg, step);
    const double bc1 = 1.0 - std::pow(kBeta1, step + 1);
    const double bc2 = 1.0 - std::pow(kBeta2, step + 1);
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto& w = params[p].values;
      const auto& g = lg.grads[p];
      for (std::size_t i = 0; i < w.size(); ++i) {
        m1[p][i] = kBeta1 * m1[p][i] + (1 - kBeta1) * g[i];
        m2[p][i] = kBeta2 * m2[p][i] + (1 - kBeta2) * g[i] * g[i];
        w[i] -= lr * (m1[p][i] / bc1) / (std::sqrt(m2[p][i] / bc2) + kEps);
      }
      if (cfg.ema > 0)
        for (std::size_t i = 0; i < w.size(); ++i)
          ema_values[p][i] = cfg.ema * ema_values[p][i] + (1 - cfg.ema) * w[i];
    }
    if (progress) progress(step, lg.loss);
  }

  if (cfg.ema > 0)
    for (std::size_t p = 0; p < params.size(); ++p) params[p].values = ema_values[p];
  model.round_to_storage_precision();

  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(cfg.loss_window), history.size());
  model.metadata.steps = cfg.steps;
  model.metadata.initial_loss = window_mean(history, 0, w);
  model.metadata.final_loss = window_mean(history, history.size() - w, history.size());
  if (stats) {
    stats->initial_loss = model.metadata.initial_loss;
    stats->final_loss = model.metadata.final_loss;
    stats->history = std::move(history);
  }
  return model;
}

// ---------------------------------------------------------------------------

DirectoryDataSource::DirectoryDataSource(fs::path root, std::string domain)
    : root_(std::move(root)), domain_(std::move(domain)) {}

std::vector<std::string> DirectoryDataSource::entries() const { return read_manifest(root_); }

MotionClip DirectoryDataSource::read(const std::string& entry) const {
  const fs::path rel(entry);
  require(rel.is_relative(), ErrorKind::data,
          fmt::format("manifest entry '{}' must be a relative path", entry));
  for (const auto& part : rel)
    require(part != "..", ErrorKind::data,
            fmt::format("manifest entry '{}' escapes the dataset directory", entry));
  return load_motion(root_ / rel);
}

std::vector<MotionClip> load_domain(const DataSource& source) {
  std::vector<MotionClip> clips;
  for (const auto& e : source.entries()) {
    MotionClip clip = source.read(e);
    require(clip.motion.domain == source.domain(), ErrorKind::data,
            fmt::format("{} belongs to domain '{}', expected '{}'", e, clip.motion.domain,
                        source.domain()));
    clips.push_back(std::move(clip));
  }
  require(!clips.empty(), ErrorKind::data,
          fmt::format("no training data for domain '{}'", source.domain()));
  return clips;
}

std::vector<TrainingSequence> make_training_set(const std::vector<MotionClip>& clips,
                                                const Normalizer& norm, bool with_keyframes,
                                                const KeyframeParams& kf) {
  std::vector<TrainingSequence> out;
  out.reserve(clips.size());
  for (const auto& clip : clips) {
    TrainingSequence s;
    s.x0 = norm.apply(clip.motion.frames);
    s.cond = clip.cond.values;
    if (with_keyframes) s.keyframes = extract_keyframes(clip.motion, kf.count, kf.min_gap).indices;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace kmcg
