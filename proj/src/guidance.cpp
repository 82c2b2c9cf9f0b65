#include "kmcg/guidance.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "kmcg/error.hpp"

namespace kmcg {

void Measurement::validate(Index frames, Index dims) const {
  require(y.rows() == static_cast<Index>(indices.size()) && y.cols() == dims, ErrorKind::contract,
          "measurement rows do not match its keyframes");
  require(weights.size() == dims && (weights.array() >= 0).all() && weights.allFinite(),
          ErrorKind::contract, "measurement weights must be finite and non-negative");
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] >= 0 && indices[i] < frames, ErrorKind::contract,
            fmt::format("keyframe {} outside [0, {})", indices[i], frames));
    require(i == 0 || indices[i] > indices[i - 1], ErrorKind::contract,
            "keyframe indices must be strictly increasing");
  }
}

AlphaMode parse_alpha_mode(std::string_view text) {
  if (text == "residual_norm") return AlphaMode::residual_norm;
  if (text == "constant") return AlphaMode::constant;
  fail(ErrorKind::usage, fmt::format("unknown alpha mode '{}'", text));
}

std::string to_string(AlphaMode mode) {
  return mode == AlphaMode::residual_norm ? "residual_norm" : "constant";
}

void GuidanceConfig::validate() const {
  require(alpha0 >= 0 && std::isfinite(alpha0), ErrorKind::usage,
          "guidance.alpha0 must be finite and >= 0");
}

bool GuidanceConfig::guides(int decode_step) const {
  return steps.empty() || std::find(steps.begin(), steps.end(), decode_step) != steps.end();
}

Measurement measure(const Mat& x, const KeyframeSet& keyframes, double noise_level,
                    std::uint64_t seed) {
  require(noise_level >= 0, ErrorKind::usage, "measurement noise must be >= 0");
  Measurement m;
  m.indices = keyframes.indices;
  m.weights = Vec::Ones(x.cols());
  m.noise_level = noise_level;
  for (int idx : m.indices)
    require(idx >= 0 && idx < x.rows(), ErrorKind::contract,
            fmt::format("keyframe {} outside [0, {})", idx, x.rows()));
  m.y = select_frames(x, m.indices);
  if (noise_level > 0) {
    Rng rng = derive_stream(seed, {kStreamMeasurement});
    m.y += noise_level * gaussian_matrix(m.y.rows(), m.y.cols(), rng);
  }
  m.validate(x.rows(), x.cols());
  return m;
}

Measurement measure(const MotionSequence& x, const KeyframeSet& keyframes, double noise_level,
                    std::uint64_t seed) {
  return measure(x.frames, keyframes, noise_level, seed);
}

Mat select_frames(const Mat& x, const std::vector<int>& indices) {
  Mat out(static_cast<Index>(indices.size()), x.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) out.row(static_cast<Index>(i)) = x.row(indices[i]);
  return out;
}

Mat scatter_frames(const Mat& rows, const std::vector<int>& indices, Index frames) {
  Mat out = Mat::Zero(frames, rows.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) out.row(indices[i]) = rows.row(static_cast<Index>(i));
  return out;
}

Mat complement_frames(const Mat& x, const std::vector<int>& indices) {
  Mat out = x;
  for (int idx : indices) out.row(idx).setZero();
  return out;
}

Mat project_frames(const Mat& x, const std::vector<int>& indices, const Mat& y) {
  Mat out = x;
  for (std::size_t i = 0; i < indices.size(); ++i) out.row(indices[i]) = y.row(static_cast<Index>(i));
  return out;
}

ResidualGradient residual_gradient(const Denoiser& model, const Mat& x_k, int k,
                                   const ModelContext& ctx, const Measurement& m) {
  m.validate(x_k.rows(), x_k.cols());
  const RowVec w2 = m.weights.array().square().matrix().transpose();
  ResidualGradient out;
  auto cotangent = [&](const Mat& x0_hat) {
    const Mat diff = select_frames(x0_hat, m.indices) - m.y;  // H x0_hat - y
    out.residual = (diff.array().rowwise() * m.weights.transpose().array()).square().sum();
    const Mat weighted = 2.0 * (diff.array().rowwise() * w2.array()).matrix();
    return scatter_frames(weighted, m.indices, x_k.rows());
  };
  out.gradient = model.predict_and_pullback(x_k, k, ctx, cotangent, out.x0_hat);
  return out;
}

Mat guided_reverse_step(const Denoiser& model, const Mat& x_k, int k_from, int k_to,
                        const ModelContext& ctx, const Measurement& m, const GuidanceConfig& cfg,
                        int decode_step, double eta, const Mat* z, StepDiagnostics* diag) {
  cfg.validate();
  const auto& sched = model.schedule();
  require(k_from >= 1 && k_from <= sched.T && k_to >= 0 && k_to < k_from, ErrorKind::contract,
          fmt::format("guided step {} -> {} out of range", k_from, k_to));

  Mat x0_hat;
  Mat grad;
  double residual = 0.0;
  if (cfg.alpha0 > 0.0) {
    ResidualGradient g = residual_gradient(model, x_k, k_from, ctx, m);
    x0_hat = std::move(g.x0_hat);
    grad = std::move(g.gradient);
    residual = g.residual;
  } else {
    m.validate(x_k.rows(), x_k.cols());
    x0_hat = model.predict(x_k, k_from, ctx);
    residual = (select_frames(x0_hat, m.indices) - m.y).array().rowwise()
                   .operator*(m.weights.transpose().array()).square().sum();
  }

  Mat x = ddim_update(sched, x_k, x0_hat, k_from, k_to, eta, z);

  double alpha = 0.0;
  if (cfg.alpha0 > 0.0) {
    alpha = cfg.alpha_mode == AlphaMode::residual_norm ? cfg.alpha0 / (std::sqrt(residual) + 1e-8)
                                                       : cfg.alpha0;
    x -= alpha * grad;
  }

  const bool project = cfg.projection && (k_to > 0 || cfg.final_projection);
  if (project) {
    Mat y_level = m.y;
    if (cfg.noisy_consistency && k_to > 0) {
      Rng rng = derive_stream(cfg.seed, {kStreamConsistency, static_cast<std::uint64_t>(decode_step)});
      y_level = sched.a[k_to] * m.y + sched.b[k_to] * gaussian_matrix(m.y.rows(), m.y.cols(), rng);
    }
    x = project_frames(x, m.indices, y_level);
  }

  if (diag) *diag = StepDiagnostics{decode_step, k_from, residual, alpha};
  return x;
}

Mat guided_decode(const Denoiser& model, const Mat& latent, const ModelContext& ctx,
                  const Measurement& m, const GuidanceConfig& cfg, const SamplerConfig& sampler,
                  std::vector<StepDiagnostics>* diagnostics) {
  if (!cfg.enabled) return ddim_decode(model, latent, ctx, sampler);
  cfg.validate();
  m.validate(latent.rows(), latent.cols());
  require(sampler.eta >= 0.0 && sampler.eta <= 1.0, ErrorKind::usage, "eta must be in [0, 1]");

  const auto steps = step_subsequence(sampler, model.schedule().T);
  Mat x = latent;
  int decode_step = 0;
  for (std::size_t i = steps.size() - 1; i > 0; --i, ++decode_step) {
    const int from = steps[i];
    const int to = steps[i - 1];
    Mat z;
    const bool noisy = sampler.eta > 0.0 && to > 0;
    if (noisy) {
      Rng rng = derive_stream(sampler.seed, {kStreamSampler, static_cast<std::uint64_t>(i)});
      z = gaussian_matrix(x.rows(), x.cols(), rng);
    }
    const double eta = noisy ? sampler.eta : 0.0;
    if (cfg.guides(decode_step)) {
      StepDiagnostics d;
      x = guided_reverse_step(model, x, from, to, ctx, m, cfg, decode_step, eta,
                              noisy ? &z : nullptr, &d);
      if (diagnostics) diagnostics->push_back(d);
    } else {
      x = ddim_step(model, x, from, to, ctx, eta, noisy ? &z : nullptr);
      if (diagnostics) diagnostics->push_back(StepDiagnostics{decode_step, from, std::nan(""), 0.0});
    }
  }
  require(x.allFinite(), ErrorKind::numerical, "guided decode produced non-finite values");
  return x;
}

}  // namespace kmcg
