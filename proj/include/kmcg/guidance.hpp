#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "kmcg/denoiser.hpp"
#include "kmcg/motion.hpp"
#include "kmcg/sampler.hpp"

namespace kmcg {

// y = H x + noise, where H selects whole frames at `indices`.
struct Measurement {
  std::vector<int> indices;  // sorted, unique
  Mat y;                     // one measured frame per index
  Vec weights;               // per-channel W (non-negative)
  double noise_level = 0.0;

  void validate(Index frames, Index dims) const;
};

enum class AlphaMode { residual_norm, constant };
AlphaMode parse_alpha_mode(std::string_view text);
std::string to_string(AlphaMode mode);

struct GuidanceConfig {
  bool enabled = true;
  double alpha0 = 1.0;
  AlphaMode alpha_mode = AlphaMode::residual_norm;
  bool projection = true;
  // true: keyframes are re-noised to the target level, y_k = a_k y + b_k z'.
  // false: the clean measurement is written at every step.
  bool noisy_consistency = true;
  bool final_projection = true;  // project on the last (k -> 0) step as well
  std::vector<int> steps;        // decode step numbers to guide; empty = all
  std::uint64_t seed = 0;        // stream for z'

  void validate() const;
  bool guides(int decode_step) const;
};

/// Frames of `x` at the keyframes plus N(0, noise_level^2) noise.
Measurement measure(const Mat& x, const KeyframeSet& keyframes, double noise_level,
                    std::uint64_t seed = 0);
Measurement measure(const MotionSequence& x, const KeyframeSet& keyframes, double noise_level,
                    std::uint64_t seed = 0);

// Frame-mask forms of H, H^T and A = I - H^T H.
Mat select_frames(const Mat& x, const std::vector<int>& indices);
Mat scatter_frames(const Mat& rows, const std::vector<int>& indices, Index frames);
Mat complement_frames(const Mat& x, const std::vector<int>& indices);
/// A x + H^T y.
Mat project_frames(const Mat& x, const std::vector<int>& indices, const Mat& y);

struct ResidualGradient {
  Mat gradient;  // d residual / d x_k through the denoiser
  double residual = 0.0;
  Mat x0_hat;
};

/// residual = || W (y - H x0_hat(x_k)) ||^2 and its exact gradient in x_k.
ResidualGradient residual_gradient(const Denoiser& model, const Mat& x_k, int k,
                                   const ModelContext& ctx, const Measurement& m);

struct StepDiagnostics {
  int step = 0;  // decode step number, 0 = first step out of the latent
  int k = 0;     // level the step starts from
  double residual = 0.0;
  double alpha = 0.0;
};

/// One guided reverse step k_from -> k_to:
///   x' = ddim(x_k) - alpha * grad,  x_{k_to} = A x' + H^T y_{k_to}.
/// `decode_step` selects the z' stream. eta > 0 needs z.
Mat guided_reverse_step(const Denoiser& model, const Mat& x_k, int k_from, int k_to,
                        const ModelContext& ctx, const Measurement& m, const GuidanceConfig& cfg,
                        int decode_step = 0, double eta = 0.0, const Mat* z = nullptr,
                        StepDiagnostics* diag = nullptr);

/// Reverse pass with guidance on the configured steps. With guidance disabled
/// this is ddim_decode.
Mat guided_decode(const Denoiser& model, const Mat& latent, const ModelContext& ctx,
                  const Measurement& m, const GuidanceConfig& cfg, const SamplerConfig& sampler,
                  std::vector<StepDiagnostics>* diagnostics = nullptr);

}  // namespace kmcg
